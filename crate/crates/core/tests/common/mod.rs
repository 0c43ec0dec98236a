//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use ndarray::{Array2, ArrayView2};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// All permutations of `0..n` (Heap's algorithm).
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn heap(k: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(a.clone());
            return;
        }
        heap(k - 1, a, out);
        for i in 0..k - 1 {
            if k % 2 == 0 {
                a.swap(i, k - 1);
            } else {
                a.swap(0, k - 1);
            }
            heap(k - 1, a, out);
        }
    }
    let mut a: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    heap(n, &mut a, &mut out);
    out
}

/// Permanent as the plain sum over permutations.
pub fn naive_permanent(a: ArrayView2<'_, Complex64>) -> Complex64 {
    let n = a.nrows();
    permutations(n)
        .iter()
        .map(|s| (0..n).map(|i| a[[i, s[i]]]).product::<Complex64>())
        .sum()
}

pub fn naive_permanent_real(a: ArrayView2<'_, f64>) -> f64 {
    let n = a.nrows();
    permutations(n)
        .iter()
        .map(|s| (0..n).map(|i| a[[i, s[i]]]).product::<f64>())
        .sum()
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Ordered-tuple coincidence probability written out term by term:
/// α/n! |Σ_σ Π_i E[σ(i), j_i]|² + (1−α)/n! Σ_σ Π_i |E[σ(i), j_i]|².
/// Repeated detectors in `tuple` are allowed.
pub fn ordered_coincidence(e: ArrayView2<'_, Complex64>, tuple: &[usize], alpha: f64) -> f64 {
    let n = e.nrows();
    assert_eq!(tuple.len(), n);
    let mut amplitude = Complex64::new(0.0, 0.0);
    let mut classical = 0.0;
    for s in permutations(n) {
        let term: Complex64 = (0..n).map(|i| e[[s[i], tuple[i]]]).product();
        amplitude += term;
        classical += term.norm_sqr();
    }
    (alpha * amplitude.norm_sqr() + (1.0 - alpha) * classical) / factorial(n)
}

/// Every ordered tuple in `{0..m}^n`.
pub fn all_tuples(m: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|t| {
                (0..m).map(move |j| {
                    let mut t = t.clone();
                    t.push(j);
                    t
                })
            })
            .collect();
    }
    out
}

pub fn test_rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Entries with independent uniform real and imaginary parts in [-1, 1).
pub fn random_complex(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<Complex64> {
    Array2::from_shape_simple_fn((rows, cols), || {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

/// Unitary from Gram-Schmidt on a random complex matrix (independent of
/// the library's QR-based sampler).
pub fn gram_schmidt_unitary(n: usize, rng: &mut impl Rng) -> Array2<Complex64> {
    let a = random_complex(n, n, rng);
    let mut q = Array2::<Complex64>::zeros((n, n));
    for j in 0..n {
        let mut v = a.column(j).to_owned();
        for k in 0..j {
            let qk = q.column(k);
            let proj: Complex64 = qk.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
            v.iter_mut().zip(qk.iter()).for_each(|(x, y)| *x -= proj * y);
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        q.column_mut(j).assign(&v.mapv(|z| z / norm));
    }
    q
}

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn mnist_paths() -> (PathBuf, PathBuf) {
    let d = data_dir();
    (d.join("mnist-5k-images-idx3-ubyte.gz"), d.join("mnist-5k-labels-idx1-ubyte.gz"))
}

pub fn fashion_paths() -> (PathBuf, PathBuf) {
    let d = data_dir();
    (d.join("fashion-mnist-5x1000-images-idx3-ubyte.gz"), d.join("fashion-mnist-5x1000-labels-idx1-ubyte.gz"))
}

