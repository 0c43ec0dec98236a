//! Experiment runners.
//!
//! A run is cut into independent jobs (one per TM seed, or per sweep point
//! and TM seed). Every random stream of a job is derived from the master
//! seed and the job's coordinates, so results do not depend on the number
//! of jobs, the worker count or completion order, and growing
//! `n_tm_seeds` leaves earlier seeds untouched.

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::time::Instant;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::config::{ExperimentConfig, ExperimentKind, NoiseConfig};
use super::features::{shot_noise, FeatureTerms};
use super::record::{aggregate, FitRow, MetricRow, ResultRecord};
use crate::datasets::{downsample, filter_classes, phase_encode, random_probe_inputs_in_range, EncodingSpec, ImageSet};
use crate::detector::sample_subsets;
use crate::elm::{cross_validate, Dataset, EvalReport};
use crate::error::{QelmError, Result, ResultExt};
use crate::expressivity::{fit_loglog_slope, gaussian_baseline_rank, rank_at_threshold};
use crate::optics::{binomial, EncodedInput, TransmissionMatrix};
use crate::rng::{derive_seed, domain, rng_from_seed};

/// A labelled, phase-encoded dataset.
#[derive(Clone, Debug)]
pub struct EncodedTask {
    pub inputs: Vec<EncodedInput>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

/// Loads, filters, downsamples and encodes the configured task.
pub fn load_task(config: &ExperimentConfig) -> Result<EncodedTask> {
    let task = config.task.as_ref().ok_or_else(|| QelmError::config("task: required for this experiment"))?;
    let set = ImageSet::load(&task.images, &task.labels).context(|| "task.images / task.labels".into())?;
    let set = filter_classes(&set, &task.classes, task.max_per_class, derive_seed(config.master_seed, &[domain::DATA]))
        .context(|| "task.classes".into())?;
    let spec = EncodingSpec::new(task.target_side, task.phase_scale, config.optics.d).context(|| "task.target_side".into())?;
    let images = set.images();
    let inputs = (0..set.len())
        .into_par_iter()
        .map(|i| phase_encode(downsample(images.image_f64(i).view(), spec.target_side)?.view(), &spec))
        .collect::<Result<Vec<_>>>()?;
    let mut labels: Vec<usize> = set.labels().iter().map(|&l| l as usize).collect();
    if task.shuffle_labels {
        labels.shuffle(&mut rng_from_seed(derive_seed(config.master_seed, &[domain::LABEL_SHUFFLE])));
    }
    Ok(EncodedTask { inputs, labels, n_classes: task.classes.len() })
}

/// Feature family fed to the readout.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Readout {
    Coincidence(f64),
    Intensity,
}

impl Readout {
    fn name(self) -> &'static str {
        match self {
            Readout::Coincidence(_) => "coincidence",
            Readout::Intensity => "intensity",
        }
    }

    fn alpha(self) -> Option<f64> {
        match self {
            Readout::Coincidence(a) => Some(a),
            Readout::Intensity => None,
        }
    }

    fn label(self) -> u64 {
        match self {
            Readout::Coincidence(a) => a.to_bits(),
            Readout::Intensity => u64::MAX,
        }
    }

    fn features(self, terms: &FeatureTerms, columns: Option<&[usize]>, detectors: Option<&[usize]>) -> Array2<f64> {
        match self {
            Readout::Coincidence(a) => terms.coincidences(a, columns),
            Readout::Intensity => terms.intensities(detectors),
        }
    }
}

fn readouts(config: &ExperimentConfig) -> Vec<Readout> {
    let mut r: Vec<Readout> = config.model.alpha_list().into_iter().map(Readout::Coincidence).collect();
    if config.model.intensity {
        r.push(Readout::Intensity);
    }
    r
}

/// `None` counts means noiseless features.
#[derive(Clone, Copy, Debug)]
struct NoiseVariant {
    counts: Option<u64>,
    replicate: usize,
}

fn noise_variants(noise: &NoiseConfig) -> Vec<NoiseVariant> {
    let mut v = Vec::new();
    if noise.counts.is_empty() || noise.include_noiseless {
        v.push(NoiseVariant { counts: None, replicate: 0 });
    }
    for &c in &noise.counts {
        v.extend((0..noise.n_noise_seeds).map(|r| NoiseVariant { counts: Some(c), replicate: r }));
    }
    v
}

fn apply_noise<'a>(x: &'a Array2<f64>, v: NoiseVariant, seed: u64) -> Result<Cow<'a, Array2<f64>>> {
    match v.counts {
        None => Ok(Cow::Borrowed(x)),
        Some(n) => Ok(Cow::Owned(shot_noise(x, n, derive_seed(seed, &[n, v.replicate as u64]))?)),
    }
}

/// Coordinates shared by the rows of one evaluation.
#[derive(Clone, Copy)]
struct Cell {
    tm_seed: usize,
    replicate: usize,
    n_photons: usize,
    detectors: usize,
    counts: Option<u64>,
}

impl Cell {
    fn row(&self, readout: Readout, metric: &str, value: f64) -> MetricRow {
        MetricRow {
            tm_seed: self.tm_seed,
            replicate: self.replicate,
            permutation: None,
            n_photons: self.n_photons,
            detectors: self.detectors,
            counts: self.counts,
            model: readout.name().into(),
            alpha: readout.alpha(),
            metric: metric.into(),
            value,
        }
    }

    fn accuracy_rows(&self, readout: Readout, report: &EvalReport, out: &mut Vec<MetricRow>) {
        out.push(self.row(readout, "accuracy", report.accuracy_mean));
        out.push(self.row(readout, "accuracy_std", report.accuracy_std));
        out.push(self.row(readout, "lambda", report.chosen_lambda));
    }
}

fn evaluate(x: Array2<f64>, task: &EncodedTask, cv: &crate::elm::CrossValidation) -> Result<EvalReport> {
    cross_validate(&Dataset::with_classes(x, task.labels.clone(), task.n_classes)?, cv)
}

fn sample_tm(config: &ExperimentConfig, m: usize, n: usize, labels: &[u64]) -> Result<TransmissionMatrix> {
    let mut path = vec![domain::TM];
    path.extend_from_slice(labels);
    TransmissionMatrix::sample(config.optics.tm_kind, m, n * config.optics.d, derive_seed(config.master_seed, &path))
}

fn run_jobs<J: Sync>(jobs: &[J], work: impl Fn(&J) -> Result<Vec<MetricRow>> + Sync + Send) -> Result<Vec<MetricRow>> {
    let rows = jobs.par_iter().map(work).collect::<Result<Vec<_>>>()?;
    Ok(rows.into_iter().flatten().collect())
}

fn check_kind(config: &ExperimentConfig, allowed: &[ExperimentKind]) -> Result<()> {
    if allowed.contains(&config.experiment) {
        Ok(())
    } else {
        Err(QelmError::config(format!("experiment: {:?} is not handled by this runner", config.experiment)))
    }
}

/// Dispatches on the experiment kind using a pool of `jobs` workers.
pub fn run(config: &ExperimentConfig, jobs: usize) -> Result<ResultRecord> {
    config.validate()?;
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| QelmError::config(format!("jobs: cannot start worker pool: {e}")))?;
    let metrics = pool.install(|| match config.experiment {
        ExperimentKind::Classify => classify_rows(config),
        ExperimentKind::RankVsDetectors | ExperimentKind::RankVsPhotons => rank_rows(config),
        ExperimentKind::AccuracyVsCounts | ExperimentKind::AlphaSweep => noise_rows(config),
        ExperimentKind::PhotonScalingAccuracy => photon_rows(config),
    })?;
    let fits = if config.experiment.is_rank() { rank_fits(config, &metrics) } else { Vec::new() };
    Ok(ResultRecord::new(config.clone(), metrics, fits, start.elapsed().as_secs_f64()))
}

/// Accuracy per TM seed and detector subset for every requested readout,
/// plus per-permutation coincidence-minus-intensity differences.
pub fn run_classify(config: &ExperimentConfig, jobs: usize) -> Result<ResultRecord> {
    check_kind(config, &[ExperimentKind::Classify])?;
    run(config, jobs)
}

/// Threshold rank of probe feature matrices across detectors or photons.
pub fn run_rank_scaling(config: &ExperimentConfig, jobs: usize) -> Result<ResultRecord> {
    check_kind(config, &[ExperimentKind::RankVsDetectors, ExperimentKind::RankVsPhotons])?;
    run(config, jobs)
}

/// Accuracy over a grid of coincidence counts and α values.
pub fn run_noise_sweep(config: &ExperimentConfig, jobs: usize) -> Result<ResultRecord> {
    check_kind(config, &[ExperimentKind::AccuracyVsCounts, ExperimentKind::AlphaSweep])?;
    run(config, jobs)
}

/// Accuracy versus photon number at a fixed detector count.
pub fn run_photon_scaling_accuracy(config: &ExperimentConfig, jobs: usize) -> Result<ResultRecord> {
    check_kind(config, &[ExperimentKind::PhotonScalingAccuracy])?;
    run(config, jobs)
}

fn classify_rows(config: &ExperimentConfig) -> Result<Vec<MetricRow>> {
    let task = load_task(config)?;
    let o = &config.optics;
    let (m, n) = (o.m, o.n_photons);
    let readouts = readouts(config);
    let variants = noise_variants(&config.noise);
    let master = config.master_seed;
    let seeds: Vec<usize> = (0..o.n_tm_seeds).collect();
    run_jobs(&seeds, |&s| {
        let tm = sample_tm(config, m, n, &[s as u64])?;
        let terms = FeatureTerms::compute(&tm, &task.inputs, n)?;
        let mut rows = Vec::new();
        for k in config.subset_sizes() {
            let subsets = sample_subsets(m, k, config.sweep.max_subsets, derive_seed(master, &[domain::SUBSETS, s as u64, k as u64]))?;
            for (j, subset) in subsets.iter().enumerate() {
                let columns = if k >= n { Some(terms.outcomes().restriction_indices(subset.indices())?.1) } else { None };
                let cv = config.cv.protocol(derive_seed(master, &[domain::CV, s as u64, k as u64, j as u64]));
                for &v in &variants {
                    let cell = Cell { tm_seed: s, replicate: j, n_photons: n, detectors: k, counts: v.counts };
                    let mut reports = Vec::with_capacity(readouts.len());
                    for &r in &readouts {
                        let x = r.features(&terms, columns.as_deref(), Some(subset.indices()));
                        let seed = derive_seed(master, &[domain::NOISE, s as u64, k as u64, j as u64, r.label()]);
                        let x = apply_noise(&x, v, seed)?.into_owned();
                        let report = evaluate(x, &task, &cv)?;
                        cell.accuracy_rows(r, &report, &mut rows);
                        reports.push((r, report));
                    }
                    paired_differences(&cell, &reports, config.cv.k, &mut rows);
                }
            }
        }
        log::info!("classify: TM seed {s} done");
        Ok(rows)
    })
    .context(|| "classify run (optics, sweep.detectors)".into())
}

/// Coincidence minus intensity test accuracy, averaged over the folds of
/// each permutation. Both readouts were evaluated on identical folds.
fn paired_differences(cell: &Cell, reports: &[(Readout, EvalReport)], k: usize, rows: &mut Vec<MetricRow>) {
    let Some((_, base)) = reports.iter().find(|(r, _)| *r == Readout::Intensity) else { return };
    for (r, rep) in reports.iter().filter(|(r, _)| *r != Readout::Intensity) {
        for (p, (a, b)) in rep.per_fold.chunks(k).zip(base.per_fold.chunks(k)).enumerate() {
            let diff = a.iter().sum::<f64>() / a.len() as f64 - b.iter().sum::<f64>() / b.len() as f64;
            let mut row = cell.row(*r, "accuracy_minus_intensity", diff);
            row.permutation = Some(p);
            rows.push(row);
        }
    }
}

fn rank_points(config: &ExperimentConfig) -> Vec<(usize, usize)> {
    config.feature_shapes()
}

fn rank_rows(config: &ExperimentConfig) -> Result<Vec<MetricRow>> {
    let master = config.master_seed;
    let rc = &config.rank;
    let readouts = readouts(config);
    let variants = noise_variants(&config.noise);

    // Gaussian baselines depend only on the matrix shape; share them across seeds.
    let mut shapes = Vec::new();
    for (m, n) in rank_points(config) {
        let q = binomial(m, n).expect("validated feature dimension");
        let p = rc.probes_for(q);
        shapes.push((p, q));
        if config.model.intensity {
            shapes.push((p, m));
        }
    }
    shapes.sort_unstable();
    shapes.dedup();
    let baselines: BTreeMap<(usize, usize), f64> = shapes
        .par_iter()
        .map(|&(p, q)| {
            let seed = derive_seed(master, &[domain::BASELINE, p as u64, q as u64]);
            gaussian_baseline_rank(p, q, rc.threshold, rc.baseline_draws, seed).map(|b| ((p, q), b))
        })
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, usize, usize)> = rank_points(config)
        .into_iter()
        .flat_map(|(m, n)| (0..config.optics.n_tm_seeds).map(move |s| (m, n, s)))
        .collect();
    run_jobs(&jobs, |&(m, n, s)| {
        let coords = [s as u64, m as u64, n as u64];
        let tm = sample_tm(config, m, n, &coords)?;
        let q = binomial(m, n).expect("validated feature dimension");
        let p = rc.probes_for(q);
        let probe_seed = derive_seed(master, &[domain::PROBES, coords[0], coords[1], coords[2]]);
        let probes = random_probe_inputs_in_range(p, config.optics.d, rc.probe_phase_range, probe_seed)?;
        let terms = FeatureTerms::compute(&tm, &probes, n)?;
        let mut rows = Vec::new();
        for &r in &readouts {
            let x = r.features(&terms, None, None);
            let noise_seed = derive_seed(master, &[domain::NOISE, coords[0], coords[1], coords[2], r.label()]);
            for &v in &variants {
                let xv = apply_noise(&x, v, noise_seed)?;
                let report = rank_at_threshold(xv.view(), rc.threshold)?;
                let baseline = baselines[&(p, xv.ncols())];
                let report = report.with_baseline(baseline);
                let cell = Cell { tm_seed: s, replicate: v.replicate, n_photons: n, detectors: m, counts: v.counts };
                rows.push(cell.row(r, "rank", report.rank as f64));
                rows.push(cell.row(r, "normalized_rank", report.normalized_rank.expect("baseline attached")));
                rows.push(cell.row(r, "full_rank", report.full_rank() as f64));
                rows.push(cell.row(r, "gaussian_baseline_rank", baseline));
            }
        }
        log::info!("rank: m = {m}, n = {n}, TM seed {s} done");
        Ok(rows)
    })
    .context(|| "rank run (sweep, optics, rank)".into())
}

/// Log-log slopes of mean rank against the swept axis.
fn rank_fits(config: &ExperimentConfig, metrics: &[MetricRow]) -> Vec<FitRow> {
    let by_photons = config.experiment == ExperimentKind::RankVsPhotons;
    let axis = if by_photons { "n_photons" } else { "detectors" };
    let aggregates = aggregate(metrics);
    let mut series: Vec<((String, Option<u64>, Option<u64>, String), Vec<(f64, f64)>)> = Vec::new();
    for a in aggregates.iter().filter(|a| a.metric == "rank" || a.metric == "normalized_rank") {
        let key = (a.model.clone(), a.alpha.map(f64::to_bits), a.counts, a.metric.clone());
        let x = if by_photons { a.n_photons } else { a.detectors } as f64;
        match series.iter_mut().find(|(k, _)| *k == key) {
            Some((_, pts)) => pts.push((x, a.mean)),
            None => series.push((key, vec![(x, a.mean)])),
        }
    }
    series
        .into_iter()
        .filter_map(|((model, alpha, counts, metric), pts)| {
            let (xs, ys): (Vec<f64>, Vec<f64>) = pts.iter().copied().unzip();
            let fit = fit_loglog_slope(&xs, &ys).ok()?;
            Some(FitRow {
                axis: axis.into(),
                counts,
                model,
                alpha: alpha.map(f64::from_bits),
                metric,
                slope: fit.slope,
                intercept: fit.intercept,
                points: pts.len(),
            })
        })
        .collect()
}

fn noise_rows(config: &ExperimentConfig) -> Result<Vec<MetricRow>> {
    let task = load_task(config)?;
    let o = &config.optics;
    let (m, n) = (o.m, o.n_photons);
    let readouts = readouts(config);
    let variants = noise_variants(&config.noise);
    let master = config.master_seed;
    let seeds: Vec<usize> = (0..o.n_tm_seeds).collect();
    run_jobs(&seeds, |&s| {
        let tm = sample_tm(config, m, n, &[s as u64])?;
        let terms = FeatureTerms::compute(&tm, &task.inputs, n)?;
        let cv = config.cv.protocol(derive_seed(master, &[domain::CV, s as u64]));
        let mut rows = Vec::new();
        for &r in &readouts {
            let x = r.features(&terms, None, None);
            let noise_seed = derive_seed(master, &[domain::NOISE, s as u64, r.label()]);
            for &v in &variants {
                let cell = Cell { tm_seed: s, replicate: v.replicate, n_photons: n, detectors: m, counts: v.counts };
                let xv = apply_noise(&x, v, noise_seed)?.into_owned();
                cell.accuracy_rows(r, &evaluate(xv, &task, &cv)?, &mut rows);
            }
        }
        log::info!("noise sweep: TM seed {s} done");
        Ok(rows)
    })
    .context(|| "noise sweep (noise, model)".into())
}

fn photon_rows(config: &ExperimentConfig) -> Result<Vec<MetricRow>> {
    let task = load_task(config)?;
    let m = config.optics.m;
    let readouts = readouts(config);
    let variants = noise_variants(&config.noise);
    let master = config.master_seed;
    let jobs: Vec<(usize, usize)> = config
        .sweep
        .photons
        .iter()
        .flat_map(|&n| (0..config.optics.n_tm_seeds).map(move |s| (n, s)))
        .collect();
    run_jobs(&jobs, |&(n, s)| {
        let tm = sample_tm(config, m, n, &[s as u64, n as u64])?;
        let terms = FeatureTerms::compute(&tm, &task.inputs, n)?;
        let cv = config.cv.protocol(derive_seed(master, &[domain::CV, s as u64]));
        let mut rows = Vec::new();
        for &r in &readouts {
            let x = r.features(&terms, None, None);
            let noise_seed = derive_seed(master, &[domain::NOISE, s as u64, n as u64, r.label()]);
            for &v in &variants {
                let cell = Cell { tm_seed: s, replicate: v.replicate, n_photons: n, detectors: m, counts: v.counts };
                let xv = apply_noise(&x, v, noise_seed)?.into_owned();
                cell.accuracy_rows(r, &evaluate(xv, &task, &cv)?, &mut rows);
            }
        }
        log::info!("photon scaling: n = {n}, TM seed {s} done");
        Ok(rows)
    })
    .context(|| "photon scaling run (sweep.photons, optics)".into())
}
