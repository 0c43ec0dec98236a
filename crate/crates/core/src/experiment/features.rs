//! Dataset-level feature matrices (samples × outcomes).

use ndarray::{Array2, Axis};
use rayon::prelude::*;

use crate::detector::multinomial_into;
use crate::error::{QelmError, Result};
use crate::optics::{coincidence_terms, intensity_features, propagate, EncodedInput, OutcomeSpace, TransmissionMatrix};
use crate::rng::derive_seed;

/// Both permanent terms and the intensities of every sample, computed once
/// per transmission matrix and reused for every α and detector subset.
#[derive(Clone, Debug)]
pub struct FeatureTerms {
    quantum: Array2<f64>,
    classical: Array2<f64>,
    intensity: Array2<f64>,
    outcomes: OutcomeSpace,
}

impl FeatureTerms {
    /// Every photon is launched with the same input `x`, each into its own
    /// block of `tm.n_inputs() / n_photons` input modes.
    pub fn compute(tm: &TransmissionMatrix, inputs: &[EncodedInput], n_photons: usize) -> Result<Self> {
        if inputs.is_empty() {
            return Err(QelmError::Data("no inputs to featurize".into()));
        }
        let m = tm.n_detectors();
        let outcomes = OutcomeSpace::combinations(m, n_photons)?;
        let rows = inputs
            .par_iter()
            .map(|x| {
                let photons = vec![x; n_photons];
                let fields = propagate(tm, &photons)?;
                let terms = coincidence_terms(&fields)?;
                let intensity = intensity_features(&fields).into_values();
                Ok((terms.quantum().to_vec(), terms.classical().to_vec(), intensity))
            })
            .collect::<Result<Vec<_>>>()?;
        let p = rows.len();
        let q = outcomes.len();
        let mut quantum = Array2::zeros((p, q));
        let mut classical = Array2::zeros((p, q));
        let mut intensity = Array2::zeros((p, m));
        for (i, (qu, cl, it)) in rows.into_iter().enumerate() {
            quantum.row_mut(i).assign(&ndarray::ArrayView1::from(&qu));
            classical.row_mut(i).assign(&ndarray::ArrayView1::from(&cl));
            intensity.row_mut(i).assign(&ndarray::ArrayView1::from(&it));
        }
        Ok(Self { quantum, classical, intensity, outcomes })
    }

    pub fn outcomes(&self) -> &OutcomeSpace {
        &self.outcomes
    }

    pub fn n_samples(&self) -> usize {
        self.quantum.nrows()
    }

    /// Coincidence features `c + α (q − c)`, clamped at zero.
    pub fn coincidences(&self, alpha: f64, columns: Option<&[usize]>) -> Array2<f64> {
        let mix = |q: f64, c: f64| (c + alpha * (q - c)).max(0.0);
        match columns {
            None => ndarray::Zip::from(&self.quantum).and(&self.classical).map_collect(|&q, &c| mix(q, c)),
            Some(cols) => {
                let q = self.quantum.select(Axis(1), cols);
                let c = self.classical.select(Axis(1), cols);
                ndarray::Zip::from(&q).and(&c).map_collect(|&q, &c| mix(q, c))
            }
        }
    }

    pub fn intensities(&self, detectors: Option<&[usize]>) -> Array2<f64> {
        match detectors {
            None => self.intensity.clone(),
            Some(d) => self.intensity.select(Axis(1), d),
        }
    }
}

/// Replaces each row by the empirical frequencies of `total` multinomial
/// draws from it. Row `i` uses the stream `derive_seed(seed, [i])`.
pub fn shot_noise(features: &Array2<f64>, total: u64, seed: u64) -> Result<Array2<f64>> {
    let mut out = Array2::zeros(features.raw_dim());
    let mut counts = vec![0u64; features.ncols()];
    for (i, (row, mut dst)) in features.outer_iter().zip(out.outer_iter_mut()).enumerate() {
        let weights = row.to_vec();
        multinomial_into(&weights, total, derive_seed(seed, &[i as u64]), &mut counts)
            .map_err(|e| QelmError::Context { context: format!("sample {i}"), source: Box::new(e) })?;
        let n = total as f64;
        dst.iter_mut().zip(&counts).for_each(|(d, &c)| *d = c as f64 / n);
    }
    Ok(out)
}
