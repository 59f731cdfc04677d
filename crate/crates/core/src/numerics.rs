//! Dense linear algebra and probability primitives.
//!
//! Everything here is a pure function of its inputs with a fixed reduction
//! order, so results are bitwise reproducible for a given input.

use crate::error::{Error, Result};

/// Loss reported when the target class has zero probability.
pub const CROSS_ENTROPY_CAP: f64 = 1e4;

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
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

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Wraps row-major `data`, rejecting a length mismatch or non-finite entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape {
                op: "from_vec",
                lhs: (rows, cols),
                rhs: (data.len(), 1),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite entry {} at ({}, {})",
                data[pos],
                pos / cols.max(1),
                pos % cols.max(1)
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::Shape {
                op: "from_rows",
                lhs: (rows.len(), cols),
                rhs: (1, bad.len()),
            });
        }
        Matrix::from_vec(rows.len(), cols, rows.concat())
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
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn fill(&mut self, v: f64) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    /// `y = self · x`.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::Shape {
                op: "matvec",
                lhs: self.shape(),
                rhs: (x.len(), 1),
            });
        }
        let mut y = vec![0.0; self.rows];
        self.matvec_acc(x, &mut y);
        Ok(y)
    }

    /// `y += self · x` without shape checks; callers guarantee dimensions.
    #[inline]
    pub(crate) fn matvec_acc(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for (yr, row) in y.iter_mut().zip(self.data.chunks_exact(self.cols)) {
            *yr += dot(row, x);
        }
    }

    /// `y += selfᵀ · x` without shape checks.
    #[inline]
    pub(crate) fn matvec_t_acc(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(y.len(), self.cols);
        for (&xr, row) in x.iter().zip(self.data.chunks_exact(self.cols)) {
            if xr != 0.0 {
                axpy(xr, row, y);
            }
        }
    }

    /// `self += a ⊗ b` (rank-one update).
    #[inline]
    pub(crate) fn add_outer(&mut self, a: &[f64], b: &[f64]) {
        debug_assert_eq!(a.len(), self.rows);
        debug_assert_eq!(b.len(), self.cols);
        for (&ar, row) in a.iter().zip(self.data.chunks_exact_mut(self.cols)) {
            if ar != 0.0 {
                axpy(ar, b, row);
            }
        }
    }
}

/// Standard matrix product.
pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols != b.rows {
        return Err(Error::Shape {
            op: "matmul",
            lhs: a.shape(),
            rhs: b.shape(),
        });
    }
    let mut out = Matrix::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        let out_row = &mut out.data[i * b.cols..(i + 1) * b.cols];
        for k in 0..a.cols {
            let aik = a.data[i * a.cols + k];
            axpy(aik, &b.data[k * b.cols..(k + 1) * b.cols], out_row);
        }
    }
    Ok(out)
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    // Four independent accumulators, combined in a fixed order.
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for i in 0..chunks {
        let j = i * 4;
        acc[0] += a[j] * b[j];
        acc[1] += a[j + 1] * b[j + 1];
        acc[2] += a[j + 2] * b[j + 2];
        acc[3] += a[j + 3] * b[j + 3];
    }
    let mut tail = 0.0;
    for j in chunks * 4..a.len() {
        tail += a[j] * b[j];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y += alpha · x`.
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Logistic function with the argument clamped to ±500.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    let x = x.clamp(-500.0, 500.0);
    1.0 / (1.0 + (-x).exp())
}

/// Max-subtracted softmax.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::contract("softmax of an empty vector"));
    }
    if let Some(i) = logits.iter().position(|v| !v.is_finite()) {
        return Err(Error::contract(format!("non-finite logit at index {i}")));
    }
    let mut out = logits.to_vec();
    softmax_in_place(&mut out);
    Ok(out)
}

/// In-place softmax over finite, non-empty input.
#[inline]
pub(crate) fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    let inv = 1.0 / sum;
    for x in v.iter_mut() {
        *x *= inv;
    }
}

/// `log Σ exp(v)` computed with max subtraction.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = v.iter().map(|x| (x - max).exp()).sum();
    max + sum.ln()
}

/// `−ln p[target]`, capped at [`CROSS_ENTROPY_CAP`] when `p[target]` is zero.
pub fn cross_entropy(p: &[f64], target: usize) -> Result<f64> {
    let pt = *p.get(target).ok_or_else(|| {
        Error::contract(format!(
            "target index {target} out of range for {} classes",
            p.len()
        ))
    })?;
    Ok(capped_neg_log(pt))
}

#[inline]
pub(crate) fn capped_neg_log(p: f64) -> f64 {
    if p <= 0.0 {
        return CROSS_ENTROPY_CAP;
    }
    (-p.ln()).min(CROSS_ENTROPY_CAP).max(0.0)
}

/// Cross-entropy of `softmax(logits)` against `target` through log-sum-exp.
pub fn softmax_cross_entropy(logits: &[f64], target: usize) -> Result<f64> {
    if target >= logits.len() {
        return Err(Error::contract(format!(
            "target index {target} out of range for {} classes",
            logits.len()
        )));
    }
    Ok((log_sum_exp(logits) - logits[target]).min(CROSS_ENTROPY_CAP))
}

/// Index of the largest entry; the first one wins ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Largest relative disagreement between `analytic` and a central finite
/// difference of `f` around `theta`.
///
/// Each coordinate contributes
/// `|a − n| / max(1, |a| + |n|)` with `n = (f(θ+h·eᵢ) − f(θ−h·eᵢ)) / 2h`.
pub fn grad_check<F>(mut f: F, theta: &[f64], analytic: &[f64], h: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    if theta.len() != analytic.len() {
        return Err(Error::Shape {
            op: "grad_check",
            lhs: (theta.len(), 1),
            rhs: (analytic.len(), 1),
        });
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::contract(format!("finite-difference step must be positive, got {h}")));
    }
    let mut point = theta.to_vec();
    let mut worst = 0.0f64;
    for i in 0..theta.len() {
        let orig = point[i];
        point[i] = orig + h;
        let plus = f(&point);
        point[i] = orig - h;
        let minus = f(&point);
        point[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::Numeric(format!(
                "objective is not finite around coordinate {i} (f+ = {plus}, f- = {minus})"
            )));
        }
        let numeric = (plus - minus) / (2.0 * h);
        let a = analytic[i];
        let err = (a - numeric).abs() / 1f64.max(a.abs() + numeric.abs());
        worst = worst.max(err);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matmul_identity_and_zero() {
        let a = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        assert_eq!(matmul(&Matrix::identity(2), &a).unwrap(), a);
        let z = matmul(&Matrix::zeros(2, 2), &Matrix::from_rows(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]).unwrap()).unwrap();
        assert_eq!(z, Matrix::zeros(2, 3));
    }

    #[test]
    fn matmul_hand_computed() {
        let a = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[&[5.0], &[6.0]]).unwrap();
        let c = matmul(&a, &b).unwrap();
        assert_eq!(c.shape(), (2, 1));
        assert_eq!(c.as_slice(), &[17.0, 39.0]);
    }

    #[test]
    fn matmul_shape_error_names_dims() {
        let err = matmul(&Matrix::zeros(2, 3), &Matrix::zeros(2, 3)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("(2, 3)"), "{msg}");
    }

    #[test]
    fn from_vec_rejects_non_finite() {
        assert!(Matrix::from_vec(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(Matrix::from_vec(1, 2, vec![1.0]).is_err());
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax(&[0.0, 0.0]).unwrap(), vec![0.5, 0.5]);
        let p = softmax(&[1f64.ln(), 3f64.ln()]).unwrap();
        assert!((p[0] - 0.25).abs() < 1e-15 && (p[1] - 0.75).abs() < 1e-15);
        assert!(softmax(&[]).is_err());
    }

    #[test]
    fn cross_entropy_examples() {
        assert_eq!(cross_entropy(&[1.0, 0.0, 0.0], 0).unwrap(), 0.0);
        let u = cross_entropy(&[0.25; 4], 2).unwrap();
        assert!((u - 1.386294).abs() < 1e-6);
        let l = cross_entropy(&[0.25, 0.75], 0).unwrap();
        assert!((l - 1.386294).abs() < 1e-6);
        assert_eq!(cross_entropy(&[1.0, 0.0], 1).unwrap(), CROSS_ENTROPY_CAP);
        assert!(cross_entropy(&[1.0], 1).is_err());
    }

    #[test]
    fn grad_check_examples() {
        let err = grad_check(|t| t[0] * t[0], &[3.0], &[6.0], 1e-5).unwrap();
        assert!(err < 1e-9, "{err}");
        let err = grad_check(|_| 7.0, &[1.0, 2.0], &[0.0, 0.0], 1e-5).unwrap();
        assert_eq!(err, 0.0);
        let e = grad_check(|t| if t[1] > 2.0 { f64::NAN } else { 0.0 }, &[0.0, 2.0], &[0.0, 0.0], 1e-5)
            .unwrap_err();
        assert!(e.to_string().contains("coordinate 1"));
    }

    #[test]
    fn softmax_sums_to_one_on_long_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.gen_range(1..=2000);
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-50.0..=50.0)).collect();
            let p = softmax(&v).unwrap();
            let s: f64 = p.iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "sum {s} for n={n}");
        }
    }

    #[test]
    fn matmul_associative_on_random_chains() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut rand5 = || {
            Matrix::from_vec(5, 5, (0..25).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
        };
        for _ in 0..50 {
            let (a, b, c) = (rand5(), rand5(), rand5());
            let l = matmul(&matmul(&a, &b).unwrap(), &c).unwrap();
            let r = matmul(&a, &matmul(&b, &c).unwrap()).unwrap();
            for (x, y) in l.as_slice().iter().zip(r.as_slice()) {
                assert!((x - y).abs() <= 1e-9 * x.abs().max(y.abs()).max(1.0));
            }
        }
    }

    proptest! {
        #[test]
        fn softmax_shift_invariant(v in prop::collection::vec(-50.0f64..50.0, 1..64), c in -100.0f64..100.0) {
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            // max-subtraction makes the result depend only on differences
            let a = softmax(&v).unwrap();
            let b = softmax(&shifted).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn softmax_shift_by_integer_power_of_two_is_bitwise(v in prop::collection::vec(-50i32..50, 1..64), k in -4i32..4) {
            // shifts representable without rounding leave differences exact
            let v: Vec<f64> = v.into_iter().map(f64::from).collect();
            let c = f64::from(k) * 64.0;
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            prop_assert_eq!(softmax(&v).unwrap(), softmax(&shifted).unwrap());
        }

        #[test]
        fn fused_cross_entropy_matches_naive(v in prop::collection::vec(-20.0f64..20.0, 2..40), t in 0usize..40) {
            let t = t % v.len();
            let naive = cross_entropy(&softmax(&v).unwrap(), t).unwrap();
            let fused = softmax_cross_entropy(&v, t).unwrap();
            prop_assert!((naive - fused).abs() < 1e-10, "{} vs {}", naive, fused);
        }

        #[test]
        fn softmax_entries_in_open_unit_interval(v in prop::collection::vec(-15.0f64..15.0, 2..50)) {
            for p in softmax(&v).unwrap() {
                prop_assert!(p > 0.0 && p < 1.0);
            }
        }
    }
}
