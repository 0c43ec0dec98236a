//! Finite-count measurement: multinomial shot noise and detector subsampling.

use std::collections::HashSet;

use rand::seq::index::sample as sample_indices;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{QelmError, Result};
use crate::optics::{binomial, FeatureVector, OutcomeSpace};
use crate::rng::rng_from_seed;

/// Registered events per outcome; `counts.sum() == total`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountVector {
    counts: Vec<u64>,
    total: u64,
    outcomes: OutcomeSpace,
}

impl CountVector {
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn outcomes(&self) -> &OutcomeSpace {
        &self.outcomes
    }

    /// Empirical probabilities `counts / N` (all zero when `N = 0`).
    pub fn frequencies(&self) -> FeatureVector {
        let scale = if self.total == 0 { 0.0 } else { 1.0 / self.total as f64 };
        let values = self.counts.iter().map(|&c| c as f64 * scale).collect();
        FeatureVector::new(values, self.outcomes.clone()).expect("frequencies are valid features")
    }
}

/// Draws `total` events from the distribution proportional to `features`.
pub fn sample_counts(features: &FeatureVector, total: u64, seed: u64) -> Result<CountVector> {
    let mut counts = vec![0u64; features.len()];
    multinomial_into(features.values(), total, seed, &mut counts)?;
    Ok(CountVector { counts, total, outcomes: features.outcomes().clone() })
}

/// Multinomial draw by sequential conditional binomials.
pub(crate) fn multinomial_into(weights: &[f64], total: u64, seed: u64, counts: &mut [u64]) -> Result<()> {
    debug_assert_eq!(weights.len(), counts.len());
    let mass: f64 = weights.iter().sum();
    if !(mass > 0.0) || !mass.is_finite() {
        return Err(QelmError::Degenerate(
            "cannot sample counts from an all-zero feature vector".into(),
        ));
    }
    counts.iter_mut().for_each(|c| *c = 0);
    let mut rng = rng_from_seed(seed);
    let mut remaining = total;
    let mut remaining_mass = mass;
    let last = weights.iter().rposition(|&w| w > 0.0).expect("positive mass");
    for (k, &w) in weights.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if w <= 0.0 {
            continue;
        }
        if k == last {
            counts[k] = remaining;
            break;
        }
        let p = (w / remaining_mass).clamp(0.0, 1.0);
        let draw = Binomial::new(remaining, p)
            .map_err(|e| QelmError::Degenerate(format!("binomial parameters: {e}")))?
            .sample(&mut rng);
        counts[k] = draw;
        remaining -= draw;
        remaining_mass -= w;
    }
    Ok(())
}

/// Strictly increasing, non-empty list of detector ids.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DetectorSubset(Vec<usize>);

impl DetectorSubset {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(QelmError::Dimension("detector subset is empty".into()));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(QelmError::Dimension(
                "detector subset must be strictly increasing".into(),
            ));
        }
        Ok(Self(indices))
    }

    pub fn all(m: usize) -> Result<Self> {
        Self::new((0..m).collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Keeps the outcomes whose detectors all lie in `subset`. No renormalization.
pub fn restrict_detectors(features: &FeatureVector, subset: &DetectorSubset) -> Result<FeatureVector> {
    let order = features.outcomes().order();
    if subset.len() < order {
        return Err(QelmError::Infeasible(format!(
            "{order}-fold features need at least {order} detectors, subset has {}",
            subset.len()
        )));
    }
    let (space, keep) = features.outcomes().restriction_indices(subset.indices())?;
    let values = keep.iter().map(|&i| features.values()[i]).collect();
    FeatureVector::new(values, space)
}

/// Up to `max_subsets` distinct size-`k` subsets of `0..m`; all of them, in
/// lexicographic order, when there are no more than `max_subsets`.
pub fn sample_subsets(m: usize, k: usize, max_subsets: usize, seed: u64) -> Result<Vec<DetectorSubset>> {
    if k == 0 || k > m {
        return Err(QelmError::Infeasible(format!("cannot pick {k} of {m} detectors")));
    }
    if max_subsets == 0 {
        return Err(QelmError::Dimension("max_subsets must be at least 1".into()));
    }
    let available = binomial(m, k);
    if available.is_some_and(|c| c <= max_subsets) {
        let space = OutcomeSpace::combinations(m, k)?;
        return space.subsets().into_iter().map(DetectorSubset::new).collect();
    }
    let mut rng = rng_from_seed(seed);
    let mut seen = HashSet::with_capacity(max_subsets);
    let mut out = Vec::with_capacity(max_subsets);
    while out.len() < max_subsets {
        let mut pick = sample_indices(&mut rng, m, k).into_vec();
        pick.sort_unstable();
        if seen.insert(pick.clone()) {
            out.push(DetectorSubset(pick));
        }
    }
    Ok(out)
}
