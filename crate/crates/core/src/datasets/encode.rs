use ndarray::{Array1, Array2, ArrayView2};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{QelmError, Result};
use crate::optics::EncodedInput;
use crate::rng::rng_from_seed;

/// How images are written onto the phase of each photon's input modes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncodingSpec {
    pub target_side: usize,
    /// Phase applied to a 255-valued pixel.
    pub phase_scale: f64,
    /// Input modes per photon.
    pub modes_d: usize,
}

impl EncodingSpec {
    pub fn new(target_side: usize, phase_scale: f64, modes_d: usize) -> Result<Self> {
        let spec = Self { target_side, phase_scale, modes_d };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_modes(modes_d: usize) -> Result<Self> {
        Self::new(8, PI, modes_d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_side == 0 {
            return Err(QelmError::Dimension("target side must be positive".into()));
        }
        if !self.phase_scale.is_finite() {
            return Err(QelmError::Domain("phase scale must be finite".into()));
        }
        if self.target_side * self.target_side > self.modes_d {
            return Err(QelmError::Capacity(format!(
                "{0}x{0} pixels do not fit in {1} input modes",
                self.target_side, self.modes_d
            )));
        }
        Ok(())
    }
}

/// Overlap of source cells with `side` equal bins spanning `len` cells,
/// normalized so each output bin averages its (fractional) cells.
fn box_weights(len: usize, side: usize) -> Array2<f64> {
    let width = len as f64 / side as f64;
    let mut w = Array2::zeros((side, len));
    for b in 0..side {
        let lo = b as f64 * width;
        let hi = lo + width;
        let first = lo.floor() as usize;
        let last = (hi.ceil() as usize).min(len);
        for cell in first..last {
            let overlap = (hi.min(cell as f64 + 1.0) - lo.max(cell as f64)).max(0.0);
            w[[b, cell]] = overlap / width;
        }
    }
    w
}

/// Area-weighted box average onto a `side x side` grid.
pub fn downsample(image: ArrayView2<'_, f64>, side: usize) -> Result<Array2<f64>> {
    let (h, w) = image.dim();
    if side == 0 {
        return Err(QelmError::Dimension("downsample side must be positive".into()));
    }
    if side > h.min(w) {
        return Err(QelmError::Dimension(format!("cannot downsample {h}x{w} to {side}x{side}")));
    }
    let rows = box_weights(h, side);
    let cols = box_weights(w, side);
    Ok(rows.dot(&image).dot(&cols.t()))
}

/// Phase-only encoding: pixel `v_k` sets mode `k` to `exp(i·scale·v_k/255)/√d`;
/// modes beyond the image carry `1/√d` with zero phase.
pub fn phase_encode(image: ArrayView2<'_, f64>, spec: &EncodingSpec) -> Result<EncodedInput> {
    spec.validate()?;
    let (h, w) = image.dim();
    if h != spec.target_side || w != spec.target_side {
        return Err(QelmError::Dimension(format!(
            "expected a {0}x{0} image, got {h}x{w}",
            spec.target_side
        )));
    }
    let amp = 1.0 / (spec.modes_d as f64).sqrt();
    let mut out = Array1::from_elem(spec.modes_d, Complex64::new(amp, 0.0));
    for (slot, &v) in out.iter_mut().zip(image.iter()) {
        *slot = Complex64::from_polar(amp, spec.phase_scale * v / 255.0);
    }
    EncodedInput::new(out)
}

/// `count` phase-only inputs with i.i.d. uniform phases on `[0, 2π)`.
pub fn random_probe_inputs(count: usize, d: usize, seed: u64) -> Result<Vec<EncodedInput>> {
    random_probe_inputs_in_range(count, d, 2.0 * PI, seed)
}

/// As [`random_probe_inputs`], with phases uniform on `[0, phase_range)`.
pub fn random_probe_inputs_in_range(
    count: usize,
    d: usize,
    phase_range: f64,
    seed: u64,
) -> Result<Vec<EncodedInput>> {
    if d == 0 {
        return Err(QelmError::Dimension("probe inputs need at least one mode".into()));
    }
    if !(phase_range > 0.0 && phase_range <= 2.0 * PI) {
        return Err(QelmError::Domain(format!("probe phase range must lie in (0, 2π], got {phase_range}")));
    }
    let mut rng = rng_from_seed(seed);
    let amp = 1.0 / (d as f64).sqrt();
    (0..count)
        .map(|_| {
            let v = Array1::from_shape_simple_fn(d, || {
                Complex64::from_polar(amp, rng.random_range(0.0..phase_range))
            });
            EncodedInput::new(v)
        })
        .collect()
}
