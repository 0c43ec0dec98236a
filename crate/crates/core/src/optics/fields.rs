use ndarray::{Array1, Array2, ArrayView1};
use num_complex::Complex64;

use super::tm::TransmissionMatrix;
use crate::error::{QelmError, Result};

/// Unit-norm complex amplitudes of one photon over its `d` input modes.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedInput(Array1<Complex64>);

impl EncodedInput {
    pub const NORM_TOLERANCE: f64 = 1e-12;

    pub fn new(amplitudes: Array1<Complex64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(QelmError::Dimension("encoded input has no modes".into()));
        }
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > Self::NORM_TOLERANCE {
            return Err(QelmError::Data(format!("encoded input has norm {norm}, expected 1")));
        }
        Ok(Self(amplitudes))
    }

    pub fn amplitudes(&self) -> ArrayView1<'_, Complex64> {
        self.0.view()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `E[i][j]`: output amplitude of photon `i` at detector `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhotonFields(Array2<Complex64>);

impl PhotonFields {
    pub fn from_matrix(e: Array2<Complex64>) -> Result<Self> {
        if e.is_empty() {
            return Err(QelmError::Dimension("photon fields must be non-empty".into()));
        }
        Ok(Self(e))
    }

    pub fn matrix(&self) -> &Array2<Complex64> {
        &self.0
    }

    pub fn n_photons(&self) -> usize {
        self.0.nrows()
    }

    pub fn n_detectors(&self) -> usize {
        self.0.ncols()
    }
}

/// Sends photon `i` through columns `[i*d, (i+1)*d)` of the transmission matrix:
/// `E[i][j] = Σ_k tm[j][i*d + k] · inputs[i][k]`.
pub fn propagate(tm: &TransmissionMatrix, inputs: &[&EncodedInput]) -> Result<PhotonFields> {
    let n = inputs.len();
    if n == 0 {
        return Err(QelmError::Dimension("at least one photon is required".into()));
    }
    let d = inputs[0].len();
    if let Some(bad) = inputs.iter().find(|x| x.len() != d) {
        return Err(QelmError::Dimension(format!(
            "photon inputs have different lengths ({} vs {d})",
            bad.len()
        )));
    }
    if tm.n_inputs() != n * d {
        return Err(QelmError::Dimension(format!(
            "transmission matrix has {} input modes, {n} photons x {d} modes need {}",
            tm.n_inputs(),
            n * d
        )));
    }
    let m = tm.n_detectors();
    let entries = tm.entries();
    let mut e = Array2::<Complex64>::zeros((n, m));
    for (i, input) in inputs.iter().enumerate() {
        let block = entries.slice(ndarray::s![.., i * d..(i + 1) * d]);
        e.row_mut(i).assign(&block.dot(&input.amplitudes()));
    }
    Ok(PhotonFields(e))
}
