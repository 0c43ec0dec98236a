//! Threshold rank of feature matrices as an expressivity measure.
//!
//! The rank at threshold `t` is the smallest `r` such that the leading `r`
//! singular values carry at least a fraction `t` of the total squared
//! spectrum. It is reported raw and rescaled by the same statistic of an
//! i.i.d. Gaussian matrix of identical shape, so that a "full" feature space
//! maps to `min(p, q)`.

use ndarray::{Array2, ArrayView2};
use ndarray_linalg::{JobSvd, SVDDC};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{QelmError, Result};
use crate::rng::{derive_seed, rng_from_seed};

pub const DEFAULT_THRESHOLD: f64 = 0.9;
pub const DEFAULT_BASELINE_DRAWS: usize = 10;

/// Relative slack when comparing cumulative energy to the threshold, so that
/// spectra with exactly equal singular values do not flip on rounding.
const ENERGY_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    /// Non-increasing.
    pub singular_values: Vec<f64>,
    pub threshold: f64,
    pub rank: usize,
    /// `rank · min(p, q) / gaussian_baseline_rank`, when a baseline was computed.
    pub normalized_rank: Option<f64>,
    pub gaussian_baseline_rank: Option<f64>,
}

impl RankReport {
    pub fn full_rank(&self) -> usize {
        self.singular_values.len()
    }
}

fn check_threshold(t: f64) -> Result<()> {
    if t > 0.0 && t <= 1.0 {
        Ok(())
    } else {
        Err(QelmError::Domain(format!("threshold must lie in (0, 1], got {t}")))
    }
}

pub fn singular_values(x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(QelmError::Dimension("empty feature matrix".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(QelmError::Data("feature matrix contains NaN or infinite values".into()));
    }
    let (_, s, _) = x.to_owned().svddc(JobSvd::None)?;
    let mut s = s.to_vec();
    // LAPACK returns them sorted already; enforce the contract regardless
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// Smallest `r` with `Σ_{i<r} σ_i² ≥ t Σ σ_i²`. `None` for an all-zero spectrum.
pub fn rank_from_spectrum(singular_values: &[f64], t: f64) -> Option<usize> {
    let total: f64 = singular_values.iter().map(|s| s * s).sum();
    if !(total > 0.0) {
        return None;
    }
    let target = t * total * (1.0 - ENERGY_SLACK);
    let mut acc = 0.0;
    for (i, s) in singular_values.iter().enumerate() {
        acc += s * s;
        if acc >= target {
            return Some(i + 1);
        }
    }
    Some(singular_values.len())
}

pub fn rank_at_threshold(x: ArrayView2<'_, f64>, t: f64) -> Result<RankReport> {
    check_threshold(t)?;
    let sv = singular_values(x)?;
    let rank = rank_from_spectrum(&sv, t)
        .ok_or_else(|| QelmError::Degenerate("feature matrix is identically zero".into()))?;
    Ok(RankReport {
        singular_values: sv,
        threshold: t,
        rank,
        normalized_rank: None,
        gaussian_baseline_rank: None,
    })
}

/// Mean threshold rank of `draws` standard-normal `p x q` matrices.
/// Draw `i` uses the stream `derive_seed(seed, [i])`.
pub fn gaussian_baseline_rank(p: usize, q: usize, t: f64, draws: usize, seed: u64) -> Result<f64> {
    check_threshold(t)?;
    if draws == 0 {
        return Err(QelmError::Domain("at least one baseline draw is required".into()));
    }
    if p == 0 || q == 0 {
        return Err(QelmError::Dimension(format!("baseline shape {p}x{q}")));
    }
    let mut sum = 0.0;
    for i in 0..draws {
        let mut rng = rng_from_seed(derive_seed(seed, &[i as u64]));
        let g = Array2::from_shape_simple_fn((p, q), || rng.sample::<f64, _>(StandardNormal));
        sum += rank_at_threshold(g.view(), t)?.rank as f64;
    }
    Ok(sum / draws as f64)
}

impl RankReport {
    /// Attaches a baseline computed elsewhere (e.g. cached per shape).
    pub fn with_baseline(mut self, baseline: f64) -> Self {
        self.normalized_rank = Some(self.rank as f64 * self.full_rank() as f64 / baseline);
        self.gaussian_baseline_rank = Some(baseline);
        self
    }
}

pub fn gaussian_normalized_rank(
    x: ArrayView2<'_, f64>,
    t: f64,
    n_baseline_draws: usize,
    seed: u64,
) -> Result<RankReport> {
    let report = rank_at_threshold(x, t)?;
    let (p, q) = x.dim();
    let baseline = gaussian_baseline_rank(p, q, t, n_baseline_draws, seed)?;
    Ok(report.with_baseline(baseline))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
}

/// Least-squares line through `(ln x, ln y)`.
pub fn fit_loglog_slope(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() {
        return Err(QelmError::Dimension(format!("{} abscissae, {} ordinates", xs.len(), ys.len())));
    }
    if xs.len() < 3 {
        return Err(QelmError::Domain("a slope fit needs at least 3 points".into()));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(QelmError::Domain("log-log fit needs positive finite values".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(QelmError::Domain("abscissae are all equal".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Ok(LineFit { slope, intercept: my - slope * mx })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1};

    #[test]
    fn equal_singular_values() {
        let x = Array2::<f64>::eye(10) * 3.0;
        assert_eq!(rank_at_threshold(x.view(), 0.9).unwrap().rank, 9);
        assert_eq!(rank_at_threshold(x.view(), 1.0).unwrap().rank, 10);
        assert_eq!(rank_at_threshold(x.view(), 0.05).unwrap().rank, 1);
    }

    #[test]
    fn rank_one_outer_product() {
        let u = Array1::linspace(1.0, 2.0, 7);
        let v = Array1::linspace(-1.0, 3.0, 5);
        let x = u.insert_axis(ndarray::Axis(1)).dot(&v.insert_axis(ndarray::Axis(0)));
        for t in [0.1, 0.5, 0.9, 0.999] {
            assert_eq!(rank_at_threshold(x.view(), t).unwrap().rank, 1);
        }
    }

    #[test]
    fn diagonal_three_one() {
        let x = array![[3.0, 0.0], [0.0, 1.0]];
        let r = rank_at_threshold(x.view(), 0.9).unwrap();
        assert_eq!(r.rank, 1);
        assert!((r.singular_values[0] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let zero = Array2::<f64>::zeros((3, 3));
        assert!(matches!(rank_at_threshold(zero.view(), 0.9), Err(QelmError::Degenerate(_))));
        let x = Array2::<f64>::eye(2);
        assert!(rank_at_threshold(x.view(), 0.0).is_err());
        assert!(rank_at_threshold(x.view(), 1.1).is_err());
        assert!(fit_loglog_slope(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(fit_loglog_slope(&[1.0, 2.0, 0.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn slopes() {
        let xs = [2.0, 3.0, 5.0, 8.0, 13.0];
        let lin: Vec<f64> = xs.to_vec();
        let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let flat = vec![4.2; 5];
        assert!((fit_loglog_slope(&xs, &lin).unwrap().slope - 1.0).abs() < 1e-12);
        assert!((fit_loglog_slope(&xs, &sq).unwrap().slope - 2.0).abs() < 1e-12);
        assert!(fit_loglog_slope(&xs, &flat).unwrap().slope.abs() < 1e-12);
    }

    #[test]
    fn gaussian_self_normalization() {
        let mut rng = rng_from_seed(42);
        let g = Array2::from_shape_simple_fn((120, 60), || rng.sample::<f64, _>(StandardNormal));
        let r = gaussian_normalized_rank(g.view(), 0.9, 10, 7).unwrap();
        let norm = r.normalized_rank.unwrap();
        assert!((norm - 60.0).abs() < 0.05 * 60.0, "{norm}");
    }

    #[test]
    fn low_rank_is_far_below_full() {
        let u = Array1::linspace(0.5, 1.5, 100).insert_axis(ndarray::Axis(1));
        let x = u.dot(&u.t());
        let r = gaussian_normalized_rank(x.view(), 0.9, 3, 1).unwrap();
        assert!(r.normalized_rank.unwrap() < 5.0);
    }
}
