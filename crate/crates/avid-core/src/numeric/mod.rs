//! Dense vector/matrix primitives, similarity kernels, a small MLP with
//! analytic gradients, an adaptive-moment optimizer, and a finite-difference
//! gradient checker.

mod adam;
mod gradcheck;
mod mlp;

pub use adam::{adam_step, AdamParams, AdamState};
pub use gradcheck::finite_diff_check;
pub use mlp::{Activation, ForwardCache, Gradients, Layer, Mlp};

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::fmath;

/// Norms below this are treated as zero.
pub const NORM_FLOOR: f64 = 1e-12;

/// Dot product; panics are avoided by the caller checking lengths.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        acc += x * y;
    }
    acc
}

/// Euclidean norm.
#[inline]
pub fn norm(v: &[f64]) -> f64 {
    fmath::sqrt(dot(v, v))
}

/// Cosine similarity between two vectors of equal length and nonzero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(CoreError::LengthMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let (na, nb) = (norm(a), norm(b));
    if na < NORM_FLOOR || nb < NORM_FLOOR {
        return Err(CoreError::ZeroNorm);
    }
    Ok(dot(a, b) / (na * nb))
}

/// Scales `v` to unit norm, preserving direction.
pub fn l2_normalize(v: &[f64]) -> Result<Vec<f64>> {
    let n = norm(v);
    if n < NORM_FLOOR {
        return Err(CoreError::ZeroNorm);
    }
    Ok(v.iter().map(|x| x / n).collect())
}

/// Temperature softmax with max-subtraction.
///
/// The subtraction keeps exponents bounded; at temperature 0.07 raw scores in
/// `[-1, 1]` already produce exponents near 14 otherwise.
pub fn softmax_temp(scores: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if temperature <= 0.0 || !temperature.is_finite() {
        return Err(CoreError::NonPositiveTemperature { got: temperature });
    }
    if scores.is_empty() {
        return Err(CoreError::EmptyCollection);
    }
    let max = scores.iter().fold(f64::NEG_INFINITY, |m, &s| m.max(s));
    let mut out: Vec<f64> = scores
        .iter()
        .map(|&s| fmath::exp((s - max) / temperature))
        .collect();
    let total: f64 = out.iter().sum();
    for x in &mut out {
        *x /= total;
    }
    Ok(out)
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(CoreError::LengthMismatch {
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Identity-like matrix (ones on the main diagonal), not necessarily square.
    pub fn eye(rows: usize, cols: usize) -> Self {
        let mut m = Matrix::zeros(rows, cols);
        for i in 0..rows.min(cols) {
            m.data[i * cols + i] = 1.0;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// `y = A x`, with `x.len() == cols`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        let mut y = Vec::with_capacity(self.rows);
        for r in 0..self.rows {
            y.push(dot(self.row(r), x));
        }
        y
    }

    /// `y = Aᵀ x`, with `x.len() == rows`.
    pub fn matvec_transposed(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.rows);
        let mut y = vec![0.0; self.cols];
        for r in 0..self.rows {
            let xr = x[r];
            let row = self.row(r);
            for (c, yc) in y.iter_mut().enumerate() {
                *yc += xr * row[c];
            }
        }
        y
    }

    /// `A += scale * u vᵀ` (rank-one update), `u.len() == rows`, `v.len() == cols`.
    pub fn add_outer(&mut self, u: &[f64], v: &[f64], scale: f64) {
        debug_assert_eq!(u.len(), self.rows);
        debug_assert_eq!(v.len(), self.cols);
        for r in 0..self.rows {
            let ur = scale * u[r];
            let row = &mut self.data[r * self.cols..(r + 1) * self.cols];
            for (c, w) in row.iter_mut().enumerate() {
                *w += ur * v[c];
            }
        }
    }

    pub fn same_shape(&self, other: &Matrix) -> bool {
        self.rows == other.rows && self.cols == other.cols
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn cosine_identity_orthogonal_and_diagonal() {
        assert!(close(cosine(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0, 1e-12));
        assert!(close(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0, 1e-12));
        assert!(close(
            cosine(&[1.0, 1.0], &[1.0, 0.0]).unwrap(),
            0.707_106_78,
            1e-8
        ));
    }

    #[test]
    fn cosine_rejects_zero_norm_and_length_mismatch() {
        assert_eq!(
            cosine(&[0.0, 0.0], &[1.0, 0.0]),
            Err(CoreError::ZeroNorm)
        );
        assert_eq!(
            cosine(&[1.0], &[1.0, 0.0]),
            Err(CoreError::LengthMismatch {
                expected: 1,
                got: 2
            })
        );
    }

    #[test]
    fn normalize_three_four() {
        let v = l2_normalize(&[3.0, 4.0]).unwrap();
        assert!(close(v[0], 0.6, 1e-12));
        assert!(close(v[1], 0.8, 1e-12));
    }

    #[test]
    fn normalize_is_idempotent() {
        let mut rng = crate::rng::stream_rng(3, "norm");
        for _ in 0..50 {
            let v = crate::rng::normal_vector(&mut rng, 9);
            let once = l2_normalize(&v).unwrap();
            let twice = l2_normalize(&once).unwrap();
            for (a, b) in once.iter().zip(twice.iter()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn normalize_preserves_direction() {
        let mut rng = crate::rng::stream_rng(4, "dir");
        for _ in 0..50 {
            let v = crate::rng::normal_vector(&mut rng, 7);
            let n = l2_normalize(&v).unwrap();
            assert!(close(cosine(&n, &v).unwrap(), 1.0, 1e-9));
        }
    }

    #[test]
    fn softmax_uniform_on_equal_scores() {
        let p = softmax_temp(&[0.0, 0.0, 0.0], 1.0).unwrap();
        for x in &p {
            assert!(close(*x, 1.0 / 3.0, 1e-12));
        }
    }

    #[test]
    fn softmax_sharpens_at_low_temperature() {
        let p = softmax_temp(&[1.0, 0.0], 0.01).unwrap();
        assert!(p[0] > 0.999);
    }

    #[test]
    fn softmax_matches_scalar_evaluation() {
        // exp(1), exp(2), exp(3) normalized, computed independently.
        let p = softmax_temp(&[1.0, 2.0, 3.0], 1.0).unwrap();
        assert!(close(p[0], 0.090_030_57, 1e-8));
        assert!(close(p[1], 0.244_728_47, 1e-8));
        assert!(close(p[2], 0.665_240_96, 1e-8));
    }

    #[test]
    fn softmax_rejects_bad_temperature() {
        assert!(matches!(
            softmax_temp(&[1.0], 0.0),
            Err(CoreError::NonPositiveTemperature { .. })
        ));
        assert!(matches!(
            softmax_temp(&[1.0], -0.5),
            Err(CoreError::NonPositiveTemperature { .. })
        ));
    }

    #[test]
    fn softmax_is_shift_invariant_and_sums_to_one() {
        let mut rng = crate::rng::stream_rng(5, "softmax");
        for _ in 0..100 {
            let scores = crate::rng::normal_vector(&mut rng, 11);
            let shifted: alloc::vec::Vec<f64> = scores.iter().map(|s| s + 123.456).collect();
            let p = softmax_temp(&scores, 0.07).unwrap();
            let q = softmax_temp(&shifted, 0.07).unwrap();
            assert!(close(p.iter().sum::<f64>(), 1.0, 1e-9));
            for (a, b) in p.iter().zip(q.iter()) {
                assert!((a - b).abs() < 1e-9);
                assert!(*a > 0.0);
            }
        }
    }

    #[test]
    fn matvec_against_hand_computed_values() {
        let m = Matrix::from_vec(2, 3, alloc::vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(m.matvec(&[1.0, 0.0, -1.0]), alloc::vec![-2.0, -2.0]);
        assert_eq!(m.matvec_transposed(&[1.0, 1.0]), alloc::vec![5.0, 7.0, 9.0]);
    }

    #[test]
    fn outer_update_accumulates() {
        let mut m = Matrix::zeros(2, 2);
        m.add_outer(&[1.0, 2.0], &[3.0, 4.0], 0.5);
        assert_eq!(m.as_slice(), &[1.5, 2.0, 3.0, 4.0]);
    }
}
