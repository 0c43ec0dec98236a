//! Random transmission matrices modelling the multimode fiber.

use ndarray::{s, Array2};
use ndarray_linalg::QR;
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{QelmError, Result};
use crate::rng::rng_from_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TmKind {
    /// Rows of a Haar-random unitary of order `max(m, D)`, truncated to `m x D`.
    Haar,
    /// i.i.d. circularly-symmetric complex normal entries with variance `1/m`.
    Gaussian,
    /// User-supplied entries (fixtures, beamsplitters).
    Custom,
}

/// Complex `m x D` amplitude map from input modes (columns) to detectors (rows).
#[derive(Clone, Debug, PartialEq)]
pub struct TransmissionMatrix {
    entries: Array2<Complex64>,
    kind: TmKind,
    seed: u64,
}

impl TransmissionMatrix {
    pub fn sample(kind: TmKind, m: usize, d_total: usize, seed: u64) -> Result<Self> {
        if m == 0 || d_total == 0 {
            return Err(QelmError::Dimension(format!(
                "transmission matrix needs positive dimensions, got {m}x{d_total}"
            )));
        }
        let entries = match kind {
            TmKind::Haar => haar_block(m, d_total, seed)?,
            TmKind::Gaussian => complex_gaussian(m, d_total, (1.0 / m as f64).sqrt(), seed),
            TmKind::Custom => {
                return Err(QelmError::Model("custom matrices are not sampled".into()))
            }
        };
        Ok(Self { entries, kind, seed })
    }

    pub fn from_entries(entries: Array2<Complex64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(QelmError::Dimension("empty transmission matrix".into()));
        }
        Ok(Self { entries, kind: TmKind::Custom, seed: 0 })
    }

    pub fn entries(&self) -> &Array2<Complex64> {
        &self.entries
    }

    pub fn kind(&self) -> TmKind {
        self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of detectors (rows).
    pub fn n_detectors(&self) -> usize {
        self.entries.nrows()
    }

    /// Number of input modes (columns).
    pub fn n_inputs(&self) -> usize {
        self.entries.ncols()
    }

    /// The same fiber observed through a subset of detectors.
    pub fn select_detectors(&self, rows: &[usize]) -> Result<Self> {
        if let Some(&r) = rows.iter().find(|&&r| r >= self.n_detectors()) {
            return Err(QelmError::Dimension(format!("detector {r} out of range")));
        }
        Ok(Self {
            entries: self.entries.select(ndarray::Axis(0), rows),
            kind: self.kind,
            seed: self.seed,
        })
    }
}

fn complex_gaussian(rows: usize, cols: usize, std: f64, seed: u64) -> Array2<Complex64> {
    let mut rng = rng_from_seed(seed);
    // each quadrature carries half the variance
    let q = std * std::f64::consts::FRAC_1_SQRT_2;
    Array2::from_shape_simple_fn((rows, cols), || {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        Complex64::new(q * re, q * im)
    })
}

/// QR of a complex Ginibre matrix with the phases of `diag(R)` moved into `Q`
/// (Mezzadri's correction), which makes `Q` exactly Haar distributed.
fn haar_block(m: usize, d_total: usize, seed: u64) -> Result<Array2<Complex64>> {
    let dim = m.max(d_total);
    let z = complex_gaussian(dim, dim, 1.0, seed);
    let (mut q, r) = z.qr()?;
    for (j, mut col) in q.columns_mut().into_iter().enumerate() {
        let rjj = r[[j, j]];
        let norm = rjj.norm();
        if norm > 0.0 {
            let phase = rjj / norm;
            col.mapv_inplace(|v| v * phase);
        }
    }
    Ok(q.slice(s![..m, ..d_total]).to_owned())
}
