//! Small dense complex matrices.
//!
//! These back the per-block unitaries of local steps and the dense checkers in
//! [`crate::locality`]. Dimensions stay small (a handful for step blocks, a
//! soft cap of 4096 for dense locality checks), so a plain row-major `Vec` is
//! the right representation.

use num_complex::Complex64;

pub const C_ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const C_ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    dim: usize,
    data: Vec<Complex64>,
}

impl CMat {
    pub fn zeros(dim: usize) -> Self {
        CMat {
            dim,
            data: vec![C_ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = CMat::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = C_ONE;
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Self {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            assert_eq!(row.len(), dim, "matrix rows must be square");
            data.extend(row);
        }
        CMat { dim, data }
    }

    /// Real 2x2 rotation: [[cos, -sin], [sin, cos]].
    pub fn rotation2(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        CMat::from_rows(vec![
            vec![Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
            vec![Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
        ])
    }

    /// 2x2 swap of two basis states.
    pub fn swap2() -> Self {
        CMat::from_rows(vec![vec![C_ZERO, C_ONE], vec![C_ONE, C_ZERO]])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mul(&self, rhs: &CMat) -> CMat {
        assert_eq!(self.dim, rhs.dim);
        let n = self.dim;
        let mut out = CMat::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == C_ZERO {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += a * rhs[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.dim);
        let n = self.dim;
        let mut out = vec![C_ZERO; n];
        for i in 0..n {
            let mut acc = C_ZERO;
            for j in 0..n {
                acc += self[(i, j)] * v[j];
            }
            out[i] = acc;
        }
        out
    }

    /// Conjugate transpose.
    pub fn dagger(&self) -> CMat {
        let n = self.dim;
        let mut out = CMat::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = self[(j, i)].conj();
            }
        }
        out
    }

    /// Largest entry magnitude of (U†U - I); zero for an exact unitary.
    pub fn unitarity_residual(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                // (U†U)[i][j] = sum_k conj(U[k][i]) U[k][j]
                let mut acc = C_ZERO;
                for k in 0..n {
                    acc += self[(k, i)].conj() * self[(k, j)];
                }
                if i == j {
                    acc -= C_ONE;
                }
                worst = worst.max(acc.norm());
            }
        }
        worst
    }

    /// Largest entry magnitude of (self - other).
    pub fn max_abs_diff(&self, other: &CMat) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_hermitian_residual(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }
}

impl std::ops::Index<(usize, usize)> for CMat {
    type Output = Complex64;
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.dim + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        let d = self.dim;
        &mut self.data[r * d + c]
    }
}
