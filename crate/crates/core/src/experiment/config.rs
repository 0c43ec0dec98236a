//! Experiment configuration: TOML schema, defaults and validation.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::elm::CrossValidation;
use crate::error::{QelmError, Result};
use crate::expressivity::{DEFAULT_BASELINE_DRAWS, DEFAULT_THRESHOLD};
use crate::optics::{binomial, TmKind};

pub const DEFAULT_MAX_FEATURE_DIM: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Classify,
    RankVsDetectors,
    RankVsPhotons,
    AccuracyVsCounts,
    AlphaSweep,
    PhotonScalingAccuracy,
}

impl ExperimentKind {
    pub fn is_rank(self) -> bool {
        matches!(self, Self::RankVsDetectors | Self::RankVsPhotons)
    }

    pub fn needs_task(self) -> bool {
        !self.is_rank()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub master_seed: u64,
    /// Output directory; the CLI `--out` flag takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Worker threads; the CLI `--jobs` flag takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    /// Largest admissible feature dimension `C(m, n)`.
    #[serde(default = "default_max_feature_dim")]
    pub max_feature_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<TaskConfig>,
    #[serde(default)]
    pub optics: OpticsConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub cv: CvConfig,
    #[serde(default)]
    pub rank: RankConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    /// IDX image file, optionally gzipped. Relative paths resolve against
    /// the directory of the config file.
    pub images: PathBuf,
    pub labels: PathBuf,
    pub classes: Vec<u8>,
    pub max_per_class: usize,
    /// Replace labels by a seeded permutation of themselves (chance baseline).
    #[serde(default)]
    pub shuffle_labels: bool,
    #[serde(default = "default_target_side")]
    pub target_side: usize,
    #[serde(default = "default_phase_scale")]
    pub phase_scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpticsConfig {
    pub n_photons: usize,
    /// Input modes per photon.
    pub d: usize,
    /// Detectors.
    pub m: usize,
    pub tm_kind: TmKind,
    pub n_tm_seeds: usize,
}

impl Default for OpticsConfig {
    fn default() -> Self {
        Self { n_photons: 2, d: 290, m: 22, tm_kind: TmKind::Gaussian, n_tm_seeds: 10 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Single α; overrides `alphas` when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub alphas: Vec<f64>,
    /// Also evaluate intensity features.
    pub intensity: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { alpha: None, alphas: vec![0.0, 1.0], intensity: false }
    }
}

impl ModelConfig {
    pub fn alpha_list(&self) -> Vec<f64> {
        match self.alpha {
            Some(a) => vec![a],
            None => self.alphas.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Coincidence counts per sample; empty means noiseless.
    pub counts: Vec<u64>,
    /// Independent shot-noise draws per count.
    pub n_noise_seeds: usize,
    /// Also evaluate the noiseless features when `counts` is non-empty.
    pub include_noiseless: bool,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { counts: Vec::new(), n_noise_seeds: 1, include_noiseless: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    pub k: usize,
    pub lambda_grid: Vec<f64>,
    pub n_permutations: usize,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            k: CrossValidation::DEFAULT_K,
            lambda_grid: CrossValidation::DEFAULT_LAMBDA_GRID.to_vec(),
            n_permutations: 1,
        }
    }
}

impl CvConfig {
    pub fn protocol(&self, seed: u64) -> CrossValidation {
        CrossValidation {
            k: self.k,
            lambda_grid: self.lambda_grid.clone(),
            n_permutations: self.n_permutations,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankConfig {
    pub threshold: f64,
    /// Probe inputs per feature matrix; default `probe_factor · C(m, n)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probe_count: Option<usize>,
    pub probe_factor: usize,
    pub probe_phase_range: f64,
    pub baseline_draws: usize,
}

impl Default for RankConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            probe_count: None,
            probe_factor: 2,
            probe_phase_range: 2.0 * PI,
            baseline_draws: DEFAULT_BASELINE_DRAWS,
        }
    }
}

impl RankConfig {
    pub fn probes_for(&self, q: usize) -> usize {
        self.probe_count.unwrap_or(self.probe_factor * q)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Detector-subset sizes (classify) or detector counts (rank vs detectors).
    pub detectors: Vec<usize>,
    /// Photon numbers (rank vs photons, photon-scaling accuracy).
    pub photons: Vec<usize>,
    /// Detector subsets drawn per subset size.
    pub max_subsets: usize,
    /// Rank vs photons uses `m = detectors_per_photon · n` unless
    /// `fixed_detectors` is set, in which case `optics.m` is used.
    pub detectors_per_photon: usize,
    pub fixed_detectors: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { detectors: Vec::new(), photons: Vec::new(), max_subsets: 10, detectors_per_photon: 2, fixed_detectors: false }
    }
}

fn default_max_feature_dim() -> usize {
    DEFAULT_MAX_FEATURE_DIM
}

fn default_target_side() -> usize {
    8
}

fn default_phase_scale() -> f64 {
    PI
}

impl ExperimentConfig {
    /// Minimal configuration of the given kind with every default filled.
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            master_seed: 0,
            output: None,
            jobs: None,
            max_feature_dim: DEFAULT_MAX_FEATURE_DIM,
            task: None,
            optics: OpticsConfig::default(),
            model: ModelConfig::default(),
            noise: NoiseConfig::default(),
            cv: CvConfig::default(),
            rank: RankConfig::default(),
            sweep: SweepConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| QelmError::config(e.to_string()))?;
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner().to_string();
            let inner = inner.trim_end();
            QelmError::Config(vec![if path == "." { inner.to_string() } else { format!("{path}: {inner}") }])
        })?;
        config.validate()?;
        Ok(config)
    }

    /// `(m, n)` pairs whose coincidence features the experiment computes.
    pub fn feature_shapes(&self) -> Vec<(usize, usize)> {
        let o = &self.optics;
        match self.experiment {
            ExperimentKind::Classify | ExperimentKind::AccuracyVsCounts | ExperimentKind::AlphaSweep => {
                vec![(o.m, o.n_photons)]
            }
            ExperimentKind::RankVsDetectors => self.sweep.detectors.iter().map(|&m| (m, o.n_photons)).collect(),
            ExperimentKind::RankVsPhotons => self.sweep.photons.iter().map(|&n| (self.rank_detectors(n), n)).collect(),
            ExperimentKind::PhotonScalingAccuracy => self.sweep.photons.iter().map(|&n| (o.m, n)).collect(),
        }
    }

    pub fn rank_detectors(&self, n: usize) -> usize {
        if self.sweep.fixed_detectors {
            self.optics.m
        } else {
            self.sweep.detectors_per_photon * n
        }
    }

    /// Detector-subset sizes of a classification run.
    pub fn subset_sizes(&self) -> Vec<usize> {
        if self.sweep.detectors.is_empty() {
            vec![self.optics.m]
        } else {
            self.sweep.detectors.clone()
        }
    }

    /// Checks every constraint and reports all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut v = Vec::new();
        let o = &self.optics;
        let kind = self.experiment;
        if o.n_tm_seeds == 0 {
            v.push("optics.n_tm_seeds: must be at least 1".to_string());
        }
        if o.d == 0 {
            v.push("optics.d: must be at least 1".to_string());
        }
        if o.m == 0 {
            v.push("optics.m: must be at least 1".to_string());
        }
        if o.n_photons == 0 {
            v.push("optics.n_photons: must be at least 1".to_string());
        }
        if self.jobs == Some(0) {
            v.push("jobs: must be at least 1".to_string());
        }

        let alphas = self.model.alpha_list();
        if alphas.is_empty() && !(self.model.intensity && kind == ExperimentKind::Classify) {
            v.push("model.alphas: at least one alpha is required".to_string());
        }
        for a in &alphas {
            if !(0.0..=1.0).contains(a) {
                v.push(format!("model.alphas: {a} is outside [0, 1]"));
            }
        }

        if self.noise.counts.contains(&0) {
            v.push("noise.counts: counts must be positive".to_string());
        }
        if self.noise.n_noise_seeds == 0 {
            v.push("noise.n_noise_seeds: must be at least 1".to_string());
        }

        let cv = &self.cv;
        if cv.k < 3 {
            v.push(format!("cv.k: need at least 3 folds, got {}", cv.k));
        }
        if cv.lambda_grid.is_empty() {
            v.push("cv.lambda_grid: must not be empty".to_string());
        }
        if cv.lambda_grid.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            v.push("cv.lambda_grid: values must be positive and finite".to_string());
        }
        if cv.n_permutations == 0 {
            v.push("cv.n_permutations: must be at least 1".to_string());
        }

        let r = &self.rank;
        if !(r.threshold > 0.0 && r.threshold <= 1.0) {
            v.push(format!("rank.threshold: {} is outside (0, 1]", r.threshold));
        }
        if r.baseline_draws == 0 {
            v.push("rank.baseline_draws: must be at least 1".to_string());
        }
        if r.probe_count == Some(0) || (r.probe_count.is_none() && r.probe_factor == 0) {
            v.push("rank.probe_count: at least one probe is required".to_string());
        }
        if !(r.probe_phase_range > 0.0 && r.probe_phase_range <= 2.0 * PI) {
            v.push(format!("rank.probe_phase_range: {} is outside (0, 2π]", r.probe_phase_range));
        }

        match (&self.task, kind.needs_task()) {
            (None, true) => v.push("task: required for this experiment".to_string()),
            (Some(t), _) => {
                if t.classes.is_empty() {
                    v.push("task.classes: must not be empty".to_string());
                }
                if t.max_per_class == 0 {
                    v.push("task.max_per_class: must be at least 1".to_string());
                }
                if t.target_side == 0 {
                    v.push("task.target_side: must be at least 1".to_string());
                } else if t.target_side * t.target_side > o.d {
                    v.push(format!(
                        "task.target_side: {0}x{0} pixels exceed optics.d = {1} input modes",
                        t.target_side, o.d
                    ));
                }
                if !t.phase_scale.is_finite() {
                    v.push("task.phase_scale: must be finite".to_string());
                }
            }
            (None, false) => {}
        }

        match kind {
            ExperimentKind::Classify => {
                for k in self.subset_sizes() {
                    if k == 0 || k > o.m {
                        v.push(format!("sweep.detectors: subset size {k} is outside [1, {}]", o.m));
                    } else if k < o.n_photons && !alphas.is_empty() {
                        v.push(format!(
                            "sweep.detectors: subset size {k} is below optics.n_photons = {}",
                            o.n_photons
                        ));
                    }
                }
                if self.sweep.max_subsets == 0 {
                    v.push("sweep.max_subsets: must be at least 1".to_string());
                }
            }
            ExperimentKind::RankVsDetectors => {
                if self.sweep.detectors.is_empty() {
                    v.push("sweep.detectors: must list the detector counts".to_string());
                }
                for &m in &self.sweep.detectors {
                    if m < o.n_photons {
                        v.push(format!("sweep.detectors: {m} detectors cannot host {} photons", o.n_photons));
                    }
                }
            }
            ExperimentKind::RankVsPhotons | ExperimentKind::PhotonScalingAccuracy => {
                if self.sweep.photons.is_empty() {
                    v.push("sweep.photons: must list the photon numbers".to_string());
                }
                if kind == ExperimentKind::RankVsPhotons && !self.sweep.fixed_detectors && self.sweep.detectors_per_photon == 0 {
                    v.push("sweep.detectors_per_photon: must be at least 1".to_string());
                }
                for &n in &self.sweep.photons {
                    let m = if kind == ExperimentKind::RankVsPhotons { self.rank_detectors(n) } else { o.m };
                    if n == 0 || n > m {
                        v.push(format!("sweep.photons: {n} photons do not fit on {m} detectors"));
                    }
                }
            }
            ExperimentKind::AccuracyVsCounts => {
                if self.noise.counts.is_empty() {
                    v.push("noise.counts: must list the coincidence counts".to_string());
                }
            }
            ExperimentKind::AlphaSweep => {}
        }
        if kind == ExperimentKind::Classify && self.noise.counts.len() > 1 {
            v.push("noise.counts: classification takes at most one count; use accuracy_vs_counts".to_string());
        }

        for (m, n) in self.feature_shapes() {
            if n == 0 || n > m {
                continue;
            }
            match binomial(m, n) {
                Some(q) if q <= self.max_feature_dim => {}
                q => v.push(format!(
                    "max_feature_dim: C({m}, {n}) = {} exceeds the cap of {}",
                    q.map_or_else(|| "overflow".to_string(), |q| q.to_string()),
                    self.max_feature_dim
                )),
            }
        }

        if v.is_empty() {
            Ok(())
        } else {
            Err(QelmError::Config(v))
        }
    }

    /// Makes task paths absolute relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        if let Some(task) = &mut self.task {
            for p in [&mut task.images, &mut task.labels] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
    }
}

/// Reads, parses and validates a TOML configuration file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| QelmError::io(path, e))?;
    let mut config = ExperimentConfig::from_toml_str(&text).map_err(|e| match e {
        QelmError::Config(v) => QelmError::Config(v.into_iter().map(|m| format!("{}: {m}", path.display())).collect()),
        other => other,
    })?;
    config.resolve_paths(path.parent().unwrap_or(Path::new(".")));
    Ok(config)
}
