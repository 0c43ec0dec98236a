//! Detector outcome spaces: size-n detector combinations in lexicographic order.

use serde::{Deserialize, Serialize};

use crate::error::{QelmError, Result};

/// Binomial coefficient, `None` on overflow of `usize`.
pub fn binomial(n: usize, k: usize) -> Option<usize> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > usize::MAX as u128 {
            return None;
        }
    }
    Some(acc as usize)
}

/// The ordered index set of a feature vector: all size-`order` subsets of
/// `detectors`, enumerated lexicographically. Intensity features use
/// `order = 1` (singletons).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeSpace {
    detectors: Vec<usize>,
    order: usize,
}

impl OutcomeSpace {
    pub fn new(detectors: Vec<usize>, order: usize) -> Result<Self> {
        if order == 0 {
            return Err(QelmError::Dimension("outcome order must be at least 1".into()));
        }
        if detectors.windows(2).any(|w| w[0] >= w[1]) {
            return Err(QelmError::Dimension(
                "detector labels must be strictly increasing".into(),
            ));
        }
        if order > detectors.len() {
            return Err(QelmError::Infeasible(format!(
                "{order}-fold coincidences need at least {order} detectors, got {}",
                detectors.len()
            )));
        }
        Ok(Self { detectors, order })
    }

    /// All `n`-subsets of detectors `0..m`.
    pub fn combinations(m: usize, n: usize) -> Result<Self> {
        Self::new((0..m).collect(), n)
    }

    pub fn detectors(&self) -> &[usize] {
        &self.detectors
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        binomial(self.detectors.len(), self.order).expect("outcome space size overflows usize")
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Calls `f(index, detector_labels)` for every outcome in lexicographic order.
    pub fn for_each(&self, mut f: impl FnMut(usize, &[usize])) {
        let n = self.order;
        let m = self.detectors.len();
        let mut pos: Vec<usize> = (0..n).collect();
        let mut labels: Vec<usize> = pos.iter().map(|&p| self.detectors[p]).collect();
        let mut idx = 0;
        loop {
            f(idx, &labels);
            idx += 1;
            // rightmost position that can still move right
            let Some(i) = (0..n).rev().find(|&i| pos[i] < m - n + i) else {
                return;
            };
            pos[i] += 1;
            for j in i + 1..n {
                pos[j] = pos[j - 1] + 1;
            }
            for j in i..n {
                labels[j] = self.detectors[pos[j]];
            }
        }
    }

    /// Materialized index set.
    pub fn subsets(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::with_capacity(self.len());
        self.for_each(|_, s| out.push(s.to_vec()));
        out
    }

    /// Positions of the outcomes lying entirely inside `subset`, in order.
    /// `subset` must be a strictly increasing subset of this space's detectors.
    pub fn restriction_indices(&self, subset: &[usize]) -> Result<(OutcomeSpace, Vec<usize>)> {
        if let Some(&d) = subset.iter().find(|d| self.detectors.binary_search(d).is_err()) {
            return Err(QelmError::Dimension(format!(
                "detector {d} is not part of the outcome space"
            )));
        }
        let restricted = OutcomeSpace::new(subset.to_vec(), self.order)?;
        let mut keep = Vec::with_capacity(restricted.len());
        self.for_each(|i, s| {
            if s.iter().all(|d| subset.binary_search(d).is_ok()) {
                keep.push(i);
            }
        });
        Ok((restricted, keep))
    }
}
