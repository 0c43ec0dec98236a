//! Coincidence and intensity features of partially distinguishable photons.
//!
//! For an ordered detector tuple `(j_1..j_n)` the click probability is
//!
//! ```text
//! C = α/n! |Σ_σ Π_i E[σ(i)][j_i]|² + (1-α)/n! Σ_σ Π_i |E[σ(i)][j_i]|²
//!   = α/n! |perm E_J|²              + (1-α)/n! perm |E_J|²
//! ```
//!
//! `C` is symmetric in the tuple, so the probability of the unordered
//! collision-free outcome `J` is `n! · C = α |perm E_J|² + (1-α) perm |E_J|²`.

use serde::{Deserialize, Serialize};

use super::fields::PhotonFields;
use super::outcomes::OutcomeSpace;
use super::permanent::{ryser, MAX_PERMANENT_ORDER};
use crate::error::{QelmError, Result};
use num_complex::Complex64;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollisionPolicy {
    /// Outcomes with two photons on one detector are not emitted.
    #[default]
    DiscardCollisions,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceModel {
    alpha: f64,
    n_photons: usize,
    collision_policy: CollisionPolicy,
}

impl CoincidenceModel {
    pub fn new(alpha: f64, n_photons: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(QelmError::Model(format!("alpha must lie in [0, 1], got {alpha}")));
        }
        if n_photons == 0 {
            return Err(QelmError::Model("at least one photon is required".into()));
        }
        Ok(Self { alpha, n_photons, collision_policy: CollisionPolicy::DiscardCollisions })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn n_photons(&self) -> usize {
        self.n_photons
    }

    pub fn collision_policy(&self) -> CollisionPolicy {
        self.collision_policy
    }
}

/// Non-negative features indexed by an [`OutcomeSpace`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    values: Vec<f64>,
    outcomes: OutcomeSpace,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>, outcomes: OutcomeSpace) -> Result<Self> {
        if values.len() != outcomes.len() {
            return Err(QelmError::Dimension(format!(
                "{} values for {} outcomes",
                values.len(),
                outcomes.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
            return Err(QelmError::Data(format!("feature value {v} is not a finite non-negative number")));
        }
        Ok(Self { values, outcomes })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn outcomes(&self) -> &OutcomeSpace {
        &self.outcomes
    }

    /// Detector subsets labelling each value.
    pub fn index_set(&self) -> Vec<Vec<usize>> {
        self.outcomes.subsets()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

/// The two α-independent parts of the coincidence probabilities:
/// `quantum = |perm E_J|²` and `classical = perm |E_J|²`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoincidenceTerms {
    quantum: Vec<f64>,
    classical: Vec<f64>,
    outcomes: OutcomeSpace,
}

impl CoincidenceTerms {
    pub fn quantum(&self) -> &[f64] {
        &self.quantum
    }

    pub fn classical(&self) -> &[f64] {
        &self.classical
    }

    pub fn outcomes(&self) -> &OutcomeSpace {
        &self.outcomes
    }

    /// Features for indistinguishability `alpha`, written as `c + α (q - c)`
    /// so that α = 0 and single-photon terms are reproduced bit-exactly.
    pub fn mix(&self, alpha: f64) -> Result<FeatureVector> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(QelmError::Model(format!("alpha must lie in [0, 1], got {alpha}")));
        }
        let mut out = Vec::with_capacity(self.quantum.len());
        self.mix_into(alpha, &mut out);
        Ok(FeatureVector { values: out, outcomes: self.outcomes.clone() })
    }

    pub(crate) fn mix_into(&self, alpha: f64, out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.quantum
                .iter()
                .zip(&self.classical)
                .map(|(&q, &c)| clamp_negative(c + alpha * (q - c))),
        );
    }
}

fn clamp_negative(v: f64) -> f64 {
    if v < 0.0 {
        0.0
    } else {
        v
    }
}

/// Computes both permanent terms for every collision-free outcome.
pub fn coincidence_terms(fields: &PhotonFields) -> Result<CoincidenceTerms> {
    let e = fields.matrix();
    let (n, m) = e.dim();
    if n > MAX_PERMANENT_ORDER {
        return Err(QelmError::Size(format!(
            "{n} photons exceed the permanent limit of {MAX_PERMANENT_ORDER}"
        )));
    }
    if n > m {
        return Err(QelmError::Infeasible(format!(
            "{n} photons cannot give collision-free coincidences on {m} detectors"
        )));
    }
    let outcomes = OutcomeSpace::combinations(m, n)?;
    let len = outcomes.len();
    let mut quantum = Vec::with_capacity(len);
    let mut classical = Vec::with_capacity(len);

    let intensity = e.mapv(|z| z.norm_sqr());
    let mut sub = vec![Complex64::new(0.0, 0.0); n * n];
    let mut sub_abs = vec![0.0; n * n];
    let mut sums = vec![Complex64::new(0.0, 0.0); n];
    let mut sums_abs = vec![0.0; n];
    outcomes.for_each(|_, cols| {
        for i in 0..n {
            for (k, &j) in cols.iter().enumerate() {
                sub[i * n + k] = e[[i, j]];
                sub_abs[i * n + k] = intensity[[i, j]];
            }
        }
        quantum.push(ryser(&sub, n, &mut sums).norm_sqr());
        classical.push(clamp_negative(ryser(&sub_abs, n, &mut sums_abs)));
    });
    Ok(CoincidenceTerms { quantum, classical, outcomes })
}

/// Unordered collision-free coincidence probabilities, length `C(m, n)`.
pub fn coincidence_probabilities(
    fields: &PhotonFields,
    model: &CoincidenceModel,
) -> Result<FeatureVector> {
    if fields.n_photons() != model.n_photons() {
        return Err(QelmError::Dimension(format!(
            "model expects {} photons, fields carry {}",
            model.n_photons(),
            fields.n_photons()
        )));
    }
    coincidence_terms(fields)?.mix(model.alpha())
}

/// Per-detector intensity `Σ_i |E[i][j]|²`, length `m`.
pub fn intensity_features(fields: &PhotonFields) -> FeatureVector {
    let e = fields.matrix();
    let values: Vec<f64> = e
        .columns()
        .into_iter()
        .map(|col| col.iter().map(|z| z.norm_sqr()).sum())
        .collect();
    let outcomes = OutcomeSpace::combinations(e.ncols(), 1).expect("fields have at least one detector");
    FeatureVector { values, outcomes }
}
