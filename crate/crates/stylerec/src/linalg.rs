//! Small dense matrix/vector helpers used by the models.
//!
//! Everything here is row-major `f64`. Model dimensions are tiny (d around
//! 10), so plain loops are both fast enough and easy to verify against the
//! scalar oracles in the tests.

use rand::Rng;

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// Entries i.i.d. uniform in [-scale, scale].
    pub fn uniform<R: Rng>(rows: usize, cols: usize, scale: f64, rng: &mut R) -> Self {
        let data = (0..rows * cols).map(|_| rng.gen_range(-scale..=scale)).collect();
        Mat { rows, cols, data }
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// y = A x
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        let mut y = vec![0.0; self.rows];
        for r in 0..self.rows {
            let row = self.row(r);
            let mut acc = 0.0;
            for c in 0..self.cols {
                acc += row[c] * x[c];
            }
            y[r] = acc;
        }
        y
    }

    /// y = A^T x
    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        let mut y = vec![0.0; self.cols];
        for r in 0..self.rows {
            let row = self.row(r);
            for c in 0..self.cols {
                y[c] += row[c] * x[r];
            }
        }
        y
    }

    /// A += s * x y^T
    pub fn add_outer(&mut self, s: f64, x: &[f64], y: &[f64]) {
        assert_eq!(x.len(), self.rows);
        assert_eq!(y.len(), self.cols);
        for r in 0..self.rows {
            let sx = s * x[r];
            for (v, yc) in self.row_mut(r).iter_mut().zip(y) {
                *v += sx * yc;
            }
        }
    }

    pub fn sq_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn sq_norm(a: &[f64]) -> f64 {
    dot(a, a)
}

/// a += s * b
pub fn axpy(a: &mut [f64], s: f64, b: &[f64]) {
    debug_assert_eq!(a.len(), b.len());
    for (x, y) in a.iter_mut().zip(b) {
        *x += s * y;
    }
}

/// Elementwise product.
pub fn hadamard(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

/// Numerically stable logistic function.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^{-x}) without overflow for large |x|.
#[inline]
pub fn log1p_exp_neg(x: f64) -> f64 {
    if x >= 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matvec_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = Mat::uniform(4, 6, 1.0, &mut rng);
        let x: Vec<f64> = (0..6).map(|i| i as f64 * 0.3 - 1.0).collect();
        let y = a.matvec(&x);
        for r in 0..4 {
            let mut acc = 0.0;
            for c in 0..6 {
                acc += a.data[r * 6 + c] * x[c];
            }
            assert!((y[r] - acc).abs() < 1e-15);
        }
    }

    #[test]
    fn matvec_t_is_transpose() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = Mat::uniform(3, 5, 1.0, &mut rng);
        let x = vec![0.5, -1.0, 2.0];
        let y = a.matvec_t(&x);
        let mut at = Mat::zeros(5, 3);
        for r in 0..3 {
            for c in 0..5 {
                at.data[c * 3 + r] = a.data[r * 5 + c];
            }
        }
        let y2 = at.matvec(&x);
        for (u, v) in y.iter().zip(&y2) {
            assert!((u - v).abs() < 1e-15);
        }
    }

    #[test]
    fn sigmoid_extremes_stay_finite() {
        assert!(sigmoid(-800.0) >= 0.0);
        assert!(sigmoid(800.0) <= 1.0);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
        assert!(log1p_exp_neg(-750.0).is_finite());
        assert!((log1p_exp_neg(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
    }
}
