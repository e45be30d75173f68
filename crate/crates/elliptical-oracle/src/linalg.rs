//! Minimal dense linear algebra: LU with partial pivoting.
//!
//! Used as the determinant/solve oracle against the production Cholesky
//! path, and as the engine of the reference GP. Row-major `Vec<f64>`
//! throughout; nothing here is tuned for speed.

#[derive(Debug, Clone)]
pub struct LuDecomposition {
    lu: Vec<f64>,
    piv: Vec<usize>,
    n: usize,
    sign: f64,
}

impl LuDecomposition {
    /// Factor the n x n row-major matrix `a`. Returns `None` if singular.
    pub fn new(a: &[f64], n: usize) -> Option<Self> {
        assert_eq!(a.len(), n * n);
        let mut lu = a.to_vec();
        let mut piv: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;

        for col in 0..n {
            // partial pivot
            let mut pivot_row = col;
            let mut max = lu[col * n + col].abs();
            for row in (col + 1)..n {
                let v = lu[row * n + col].abs();
                if v > max {
                    max = v;
                    pivot_row = row;
                }
            }
            if max == 0.0 || !max.is_finite() {
                return None;
            }
            if pivot_row != col {
                for j in 0..n {
                    lu.swap(col * n + j, pivot_row * n + j);
                }
                piv.swap(col, pivot_row);
                sign = -sign;
            }
            let pivot = lu[col * n + col];
            for row in (col + 1)..n {
                let factor = lu[row * n + col] / pivot;
                lu[row * n + col] = factor;
                for j in (col + 1)..n {
                    lu[row * n + j] -= factor * lu[col * n + j];
                }
            }
        }
        Some(Self { lu, piv, n, sign })
    }

    pub fn determinant(&self) -> f64 {
        let mut det = self.sign;
        for i in 0..self.n {
            det *= self.lu[i * self.n + i];
        }
        det
    }

    /// ln |det| for positive-definite inputs (panics if det <= 0).
    pub fn log_det(&self) -> f64 {
        let det = self.determinant();
        assert!(det > 0.0, "log_det requires a positive determinant, got {det}");
        let mut acc = 0.0;
        for i in 0..self.n {
            acc += self.lu[i * self.n + i].abs().ln();
        }
        acc
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let mut x: Vec<f64> = self.piv.iter().map(|&p| b[p]).collect();
        // forward substitution (unit lower triangle)
        for i in 1..n {
            let mut sum = x[i];
            for j in 0..i {
                sum -= self.lu[i * n + j] * x[j];
            }
            x[i] = sum;
        }
        // back substitution
        for i in (0..n).rev() {
            let mut sum = x[i];
            for j in (i + 1)..n {
                sum -= self.lu[i * n + j] * x[j];
            }
            x[i] = sum / self.lu[i * n + i];
        }
        x
    }
}

/// Quadratic form r^T A^{-1} r via LU solve.
pub fn quad_form_inv(a: &[f64], n: usize, r: &[f64]) -> f64 {
    let lu = LuDecomposition::new(a, n).expect("singular matrix in quad_form_inv");
    let x = lu.solve(r);
    r.iter().zip(&x).map(|(ri, xi)| ri * xi).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_and_dets_small_system() {
        let a = [4.0, 1.0, 2.0, 1.0, 3.0, 0.5, 2.0, 0.5, 5.0];
        let lu = LuDecomposition::new(&a, 3).unwrap();
        let b = [1.0, 2.0, 3.0];
        let x = lu.solve(&b);
        // check A x = b
        for i in 0..3 {
            let got: f64 = (0..3).map(|j| a[i * 3 + j] * x[j]).sum();
            assert!((got - b[i]).abs() < 1e-12);
        }
        // det by cofactor expansion
        let det = 4.0 * (3.0 * 5.0 - 0.25) - 1.0 * (5.0 - 1.0) + 2.0 * (0.5 - 6.0);
        assert!((lu.determinant() - det).abs() < 1e-12);
    }

    #[test]
    fn singular_matrix_rejected() {
        let a = [1.0, 2.0, 2.0, 4.0];
        assert!(LuDecomposition::new(&a, 2).is_none());
    }
}
