//! Matrix permanents via Ryser's inclusion-exclusion formula.
//!
//! `perm(A) = (-1)^n Σ_{S ⊆ [n]} (-1)^{|S|} Π_i Σ_{j ∈ S} a_ij`
//!
//! Subsets are visited in Gray-code order so each step adds or removes a
//! single column from the running row sums, giving O(2^n · n) work.

use ndarray::ArrayView2;
use num_complex::Complex64;
use num_traits::{One, Zero};
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{QelmError, Result};

/// Largest matrix order accepted by [`permanent`].
pub const MAX_PERMANENT_ORDER: usize = 20;

pub trait PermanentScalar:
    Copy + Zero + One + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self>
{
}

impl PermanentScalar for f64 {}
impl PermanentScalar for Complex64 {}

/// Permanent of a square matrix.
pub fn permanent<T: PermanentScalar>(m: ArrayView2<'_, T>) -> Result<T> {
    let (rows, cols) = m.dim();
    if rows != cols {
        return Err(QelmError::Dimension(format!(
            "permanent needs a square matrix, got {rows}x{cols}"
        )));
    }
    if rows == 0 {
        return Err(QelmError::Dimension("permanent of an empty matrix".into()));
    }
    if rows > MAX_PERMANENT_ORDER {
        return Err(QelmError::Size(format!(
            "permanent order {rows} exceeds the limit of {MAX_PERMANENT_ORDER}"
        )));
    }
    let flat: Vec<T> = m.iter().copied().collect();
    let mut sums = vec![T::zero(); rows];
    Ok(ryser(&flat, rows, &mut sums))
}

/// Ryser's formula on a row-major `n x n` buffer. `sums` is scratch space of length `n`.
pub(crate) fn ryser<T: PermanentScalar>(a: &[T], n: usize, sums: &mut [T]) -> T {
    debug_assert_eq!(a.len(), n * n);
    match n {
        1 => return a[0],
        2 => return a[0] * a[3] + a[1] * a[2],
        _ => {}
    }
    sums.iter_mut().for_each(|s| *s = T::zero());
    let mut total = T::zero();
    let mut in_set = 0u32;
    let mut size = 0usize;
    for k in 1u32..(1u32 << n) {
        let col = k.trailing_zeros() as usize;
        let bit = 1u32 << col;
        let adding = in_set & bit == 0;
        in_set ^= bit;
        if adding {
            size += 1;
            for (i, s) in sums.iter_mut().enumerate() {
                *s = *s + a[i * n + col];
            }
        } else {
            size -= 1;
            for (i, s) in sums.iter_mut().enumerate() {
                *s = *s - a[i * n + col];
            }
        }
        let prod = sums.iter().fold(T::one(), |p, &s| p * s);
        if size % 2 == 0 {
            total = total + prod;
        } else {
            total = total - prod;
        }
    }
    if n % 2 == 0 {
        total
    } else {
        -total
    }
}
