//! Result records and their on-disk form.
//!
//! A run directory holds `results.json` (everything, including wall-clock
//! time) and three CSV tables that depend only on the config and seed:
//! `metrics.csv`, `aggregates.csv` and `fits.csv`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::elm::mean_std;
use crate::error::{QelmError, Result};
use crate::rng::DERIVATION_RULE;

/// One measured value. Empty optional columns mean "not applicable":
/// `counts` is empty for noiseless features, `alpha` for intensity models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub tm_seed: usize,
    /// Detector subset or shot-noise draw within a (seed, point) cell.
    pub replicate: usize,
    pub permutation: Option<usize>,
    pub n_photons: usize,
    pub detectors: usize,
    pub counts: Option<u64>,
    pub model: String,
    pub alpha: Option<f64>,
    pub metric: String,
    pub value: f64,
}

/// Mean and population std of a metric over seeds and replicates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub n_photons: usize,
    pub detectors: usize,
    pub counts: Option<u64>,
    pub model: String,
    pub alpha: Option<f64>,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

/// Least-squares line through `(ln axis, ln mean)` of one aggregate series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRow {
    pub axis: String,
    pub counts: Option<u64>,
    pub model: String,
    pub alpha: Option<f64>,
    pub metric: String,
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RngProvenance {
    pub generator: String,
    pub derivation: String,
    pub master_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub config: ExperimentConfig,
    pub software_version: String,
    pub rng: RngProvenance,
    pub wall_clock_seconds: f64,
    pub metrics: Vec<MetricRow>,
    pub aggregates: Vec<AggregateRow>,
    pub fits: Vec<FitRow>,
}

impl ResultRecord {
    pub fn new(config: ExperimentConfig, metrics: Vec<MetricRow>, fits: Vec<FitRow>, wall_clock_seconds: f64) -> Self {
        let aggregates = aggregate(&metrics);
        Self {
            rng: RngProvenance {
                generator: "ChaCha8Rng".into(),
                derivation: DERIVATION_RULE.into(),
                master_seed: config.master_seed,
            },
            config,
            software_version: env!("CARGO_PKG_VERSION").into(),
            wall_clock_seconds,
            metrics,
            aggregates,
            fits,
        }
    }

    /// Aggregate rows matching a model, metric and count setting.
    pub fn series<'a>(
        &'a self,
        model: &'a str,
        metric: &'a str,
        counts: Option<u64>,
    ) -> impl Iterator<Item = &'a AggregateRow> + 'a {
        self.aggregates
            .iter()
            .filter(move |a| a.model == model && a.metric == metric && a.counts == counts)
    }

    pub fn fit(&self, model: &str, metric: &str) -> Option<&FitRow> {
        self.fits.iter().find(|f| f.model == model && f.metric == metric && f.counts.is_none())
    }
}

type GroupKey = (usize, usize, Option<u64>, String, Option<u64>, String);

fn group_key(r: &MetricRow) -> GroupKey {
    (r.n_photons, r.detectors, r.counts, r.model.clone(), r.alpha.map(f64::to_bits), r.metric.clone())
}

/// Groups by everything except seed, replicate and permutation, in order of
/// first appearance.
pub fn aggregate(metrics: &[MetricRow]) -> Vec<AggregateRow> {
    let mut keys: Vec<GroupKey> = Vec::new();
    let mut index = std::collections::HashMap::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    for r in metrics {
        let key = group_key(r);
        let slot = *index.entry(key.clone()).or_insert_with(|| {
            keys.push(key);
            values.push(Vec::new());
            values.len() - 1
        });
        values[slot].push(r.value);
    }
    keys.into_iter()
        .zip(values)
        .map(|((n_photons, detectors, counts, model, alpha, metric), v)| {
            let (mean, std) = mean_std(&v);
            AggregateRow {
                n_photons,
                detectors,
                counts,
                model,
                alpha: alpha.map(f64::from_bits),
                metric,
                mean,
                std,
                n: v.len(),
            }
        })
        .collect()
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(!rows.is_empty()).from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(header).map_err(|e| QelmError::Serialization(e.to_string()))?;
    }
    for r in rows {
        w.serialize(r).map_err(|e| QelmError::Serialization(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| QelmError::Serialization(e.to_string()))?;
    fs::write(path, bytes).map_err(|e| QelmError::io(path, e))
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| QelmError::Serialization(format!("{}: {e}", path.display())))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| QelmError::Serialization(format!("{}: {e}", path.display())))
}

const METRIC_COLUMNS: [&str; 10] =
    ["tm_seed", "replicate", "permutation", "n_photons", "detectors", "counts", "model", "alpha", "metric", "value"];
const AGGREGATE_COLUMNS: [&str; 9] =
    ["n_photons", "detectors", "counts", "model", "alpha", "metric", "mean", "std", "n"];
const FIT_COLUMNS: [&str; 8] = ["axis", "counts", "model", "alpha", "metric", "slope", "intercept", "points"];

pub fn write_results(record: &ResultRecord, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| QelmError::io(dir, e))?;
    let json = serde_json::to_string_pretty(record).map_err(|e| QelmError::Serialization(e.to_string()))?;
    let path = dir.join("results.json");
    fs::write(&path, json + "\n").map_err(|e| QelmError::io(&path, e))?;
    write_csv(&dir.join("metrics.csv"), &record.metrics, &METRIC_COLUMNS)?;
    write_csv(&dir.join("aggregates.csv"), &record.aggregates, &AGGREGATE_COLUMNS)?;
    write_csv(&dir.join("fits.csv"), &record.fits, &FIT_COLUMNS)
}

pub fn read_results(dir: &Path) -> Result<ResultRecord> {
    let path = dir.join("results.json");
    let text = fs::read_to_string(&path).map_err(|e| QelmError::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| QelmError::Serialization(format!("{}: {e}", path.display())))
}

/// Reads the three tables back, e.g. to check them against `results.json`.
pub fn read_tables(dir: &Path) -> Result<(Vec<MetricRow>, Vec<AggregateRow>, Vec<FitRow>)> {
    Ok((
        read_csv(&dir.join("metrics.csv"))?,
        read_csv(&dir.join("aggregates.csv"))?,
        read_csv(&dir.join("fits.csv"))?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::config::ExperimentKind;

    fn row(seed: usize, model: &str, value: f64) -> MetricRow {
        MetricRow {
            tm_seed: seed,
            replicate: 0,
            permutation: None,
            n_photons: 2,
            detectors: 8,
            counts: None,
            model: model.into(),
            alpha: (model != "intensity").then_some(1.0),
            metric: "accuracy".into(),
            value,
        }
    }

    #[test]
    fn aggregates_in_first_seen_order() {
        let rows = vec![row(0, "coincidence", 0.8), row(0, "intensity", 0.7), row(1, "coincidence", 0.9)];
        let agg = aggregate(&rows);
        assert_eq!(agg.len(), 2);
        assert_eq!(agg[0].model, "coincidence");
        assert!((agg[0].mean - 0.85).abs() < 1e-15);
        assert!((agg[0].std - 0.05).abs() < 1e-15);
        assert_eq!(agg[1].n, 1);
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![row(0, "coincidence", 0.1 + 0.2), row(1, "intensity", 1.0 / 3.0)];
        let fits = vec![FitRow {
            axis: "detectors".into(),
            counts: None,
            model: "coincidence".into(),
            alpha: Some(0.0),
            metric: "rank".into(),
            slope: 1.234_567_890_123,
            intercept: -0.5,
            points: 4,
        }];
        let record = ResultRecord::new(ExperimentConfig::new(ExperimentKind::RankVsDetectors), rows, fits, 1.5);
        write_results(&record, dir.path()).unwrap();
        assert_eq!(read_results(dir.path()).unwrap(), record);
        let (m, a, f) = read_tables(dir.path()).unwrap();
        assert_eq!((m, a, f), (record.metrics.clone(), record.aggregates.clone(), record.fits.clone()));
    }

    #[test]
    fn empty_tables_keep_headers() {
        let dir = tempfile::tempdir().unwrap();
        let record = ResultRecord::new(ExperimentConfig::new(ExperimentKind::RankVsDetectors), vec![], vec![], 0.0);
        write_results(&record, dir.path()).unwrap();
        let fits = fs::read_to_string(dir.path().join("fits.csv")).unwrap();
        assert_eq!(fits.trim(), FIT_COLUMNS.join(","));
    }
}
