//! Minimal 2×2 matrix arithmetic for the per-coordinate kernel blocks.
//!
//! Every matrix appearing in the underdamped discretization is block-scalar
//! across coordinates, so the full 2d×2d operators are never materialized;
//! all kernel algebra happens on these little blocks.

use std::ops::{Add, Mul, Sub};

/// Row-major 2×2 matrix of `f64`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2(pub [[f64; 2]; 2]);

impl Mat2 {
    pub const ZERO: Mat2 = Mat2([[0.0, 0.0], [0.0, 0.0]]);
    pub const IDENTITY: Mat2 = Mat2([[1.0, 0.0], [0.0, 1.0]]);

    pub fn diag(a: f64, b: f64) -> Mat2 {
        Mat2([[a, 0.0], [0.0, b]])
    }

    pub fn transpose(&self) -> Mat2 {
        Mat2([[self.0[0][0], self.0[1][0]], [self.0[0][1], self.0[1][1]]])
    }

    pub fn det(&self) -> f64 {
        self.0[0][0] * self.0[1][1] - self.0[0][1] * self.0[1][0]
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    /// Inverse via the adjugate. Caller is responsible for conditioning.
    pub fn inverse(&self) -> Mat2 {
        let d = self.det();
        Mat2([
            [self.0[1][1] / d, -self.0[0][1] / d],
            [-self.0[1][0] / d, self.0[0][0] / d],
        ])
    }

    /// Matrix–vector product.
    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.0[0][0] * v[0] + self.0[0][1] * v[1],
            self.0[1][0] * v[0] + self.0[1][1] * v[1],
        ]
    }

    pub fn scale(&self, s: f64) -> Mat2 {
        Mat2([
            [self.0[0][0] * s, self.0[0][1] * s],
            [self.0[1][0] * s, self.0[1][1] * s],
        ])
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.0.iter().flatten().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    /// Eigenvalues of a symmetric 2×2 block, ascending.
    pub fn sym_eigenvalues(&self) -> [f64; 2] {
        let half_tr = 0.5 * self.trace();
        let half_diff = 0.5 * (self.0[0][0] - self.0[1][1]);
        let rad = (half_diff * half_diff + self.0[0][1] * self.0[1][0])
            .max(0.0)
            .sqrt();
        [half_tr - rad, half_tr + rad]
    }

    /// Largest singular value (operator norm) of a general 2×2 block.
    pub fn operator_norm(&self) -> f64 {
        // Largest eigenvalue of AᵀA via the symmetric closed form.
        let ata = self.transpose() * *self;
        ata.sym_eigenvalues()[1].max(0.0).sqrt()
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, rhs: Mat2) -> Mat2 {
        Mat2([
            [self.0[0][0] + rhs.0[0][0], self.0[0][1] + rhs.0[0][1]],
            [self.0[1][0] + rhs.0[1][0], self.0[1][1] + rhs.0[1][1]],
        ])
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, rhs: Mat2) -> Mat2 {
        Mat2([
            [self.0[0][0] - rhs.0[0][0], self.0[0][1] - rhs.0[0][1]],
            [self.0[1][0] - rhs.0[1][0], self.0[1][1] - rhs.0[1][1]],
        ])
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, rhs: Mat2) -> Mat2 {
        let mut out = [[0.0; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = self.0[i][0] * rhs.0[0][j] + self.0[i][1] * rhs.0[1][j];
            }
        }
        Mat2(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_roundtrip() {
        let m = Mat2([[2.0, 1.0], [0.5, 3.0]]);
        let p = m * m.inverse();
        assert!((p - Mat2::IDENTITY).frobenius_norm() < 1e-14);
    }

    #[test]
    fn sym_eigenvalues_diag() {
        let m = Mat2::diag(4.0, 9.0);
        assert_eq!(m.sym_eigenvalues(), [4.0, 9.0]);
    }

    #[test]
    fn operator_norm_matches_eigen_for_symmetric() {
        let m = Mat2([[2.0, 0.5], [0.5, 1.0]]);
        let ev = m.sym_eigenvalues();
        assert!((m.operator_norm() - ev[1].abs().max(ev[0].abs())).abs() < 1e-12);
    }
}
