use std::ops::{Add, Mul, Sub};

use nalgebra::{Matrix2, Matrix3};

/// Real symmetric `d x d` tensor, `d` in {2, 3}.
///
/// Storage is a fixed 3x3 block; entries outside the leading `d x d` corner
/// are always zero. Constructors only accept the upper triangle, so the
/// tensor equals its transpose exactly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymTensor {
    dim: usize,
    m: [[f64; 3]; 3],
}

/// Number of independent entries of a symmetric tensor in dimension `d`.
pub const fn upper_len(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

/// Index pairs `(i, j)`, `i <= j`, in row-major upper-triangle order.
pub fn upper_pairs(dim: usize) -> &'static [(usize, usize)] {
    match dim {
        2 => &[(0, 0), (0, 1), (1, 1)],
        3 => &[(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)],
        _ => panic!("unsupported dimension {dim}"),
    }
}

impl SymTensor {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim == 2 || dim == 3, "unsupported dimension {dim}");
        Self {
            dim,
            m: [[0.0; 3]; 3],
        }
    }

    /// Builds the tensor from its upper triangle in row-major order
    /// (`m11, m12, m22` in 2-D; `m11, m12, m13, m22, m23, m33` in 3-D).
    pub fn from_upper(dim: usize, upper: &[f64]) -> Self {
        let pairs = upper_pairs(dim);
        assert_eq!(upper.len(), pairs.len(), "upper triangle length");
        let mut t = Self::zeros(dim);
        for (&(i, j), &v) in pairs.iter().zip(upper) {
            t.m[i][j] = v;
            t.m[j][i] = v;
        }
        t
    }

    /// Symmetric part of an arbitrary row-major `d x d` matrix.
    pub fn sym_of(dim: usize, full: &[f64]) -> Self {
        assert_eq!(full.len(), dim * dim);
        let mut t = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                let v = 0.5 * (full[i * dim + j] + full[j * dim + i]);
                t.m[i][j] = v;
                t.m[j][i] = v;
            }
        }
        t
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut t = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            t.m[i][i] = v;
        }
        t
    }

    pub fn identity(dim: usize) -> Self {
        Self::diag(&vec![1.0; dim])
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[i][j]
    }

    pub fn upper(&self) -> Vec<f64> {
        upper_pairs(self.dim)
            .iter()
            .map(|&(i, j)| self.m[i][j])
            .collect()
    }

    /// Row-major `d*d` vectorization.
    pub fn to_vec_full(&self) -> Vec<f64> {
        let d = self.dim;
        let mut out = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                out.push(self.m[i][j]);
            }
        }
        out
    }

    /// Double contraction `self : other`.
    #[inline]
    pub fn contract(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        let mut acc = 0.0;
        for i in 0..self.dim {
            for j in 0..self.dim {
                acc += self.m[i][j] * other.m[i][j];
            }
        }
        acc
    }

    /// Frobenius norm.
    #[inline]
    pub fn norm(&self) -> f64 {
        self.contract(self).sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.m[i][i]).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.m.iter().flatten().all(|v| v.is_finite())
    }

    pub fn scale(&self, a: f64) -> Self {
        let mut t = *self;
        t.m.iter_mut().flatten().for_each(|v| *v *= a);
        t
    }

    /// `Q self Q^T` for a row-major orthogonal `d x d` matrix `q`.
    pub fn conjugate_by(&self, q: &[f64]) -> Self {
        let d = self.dim;
        let mut full = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let mut acc = 0.0;
                for a in 0..d {
                    for b in 0..d {
                        acc += q[i * d + a] * self.m[a][b] * q[j * d + b];
                    }
                }
                full[i * d + j] = acc;
            }
        }
        Self::sym_of(d, &full)
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = match self.dim {
            2 => {
                let m = Matrix2::new(self.m[0][0], self.m[0][1], self.m[1][0], self.m[1][1]);
                m.symmetric_eigenvalues().iter().copied().collect()
            }
            _ => {
                let m = Matrix3::from_fn(|i, j| self.m[i][j]);
                m.symmetric_eigenvalues().iter().copied().collect()
            }
        };
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }
}

impl Add for SymTensor {
    type Output = SymTensor;
    fn add(mut self, rhs: SymTensor) -> SymTensor {
        debug_assert_eq!(self.dim, rhs.dim);
        for i in 0..3 {
            for j in 0..3 {
                self.m[i][j] += rhs.m[i][j];
            }
        }
        self
    }
}

impl Sub for SymTensor {
    type Output = SymTensor;
    fn sub(mut self, rhs: SymTensor) -> SymTensor {
        debug_assert_eq!(self.dim, rhs.dim);
        for i in 0..3 {
            for j in 0..3 {
                self.m[i][j] -= rhs.m[i][j];
            }
        }
        self
    }
}

impl Mul<SymTensor> for f64 {
    type Output = SymTensor;
    fn mul(self, rhs: SymTensor) -> SymTensor {
        rhs.scale(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upper_roundtrip_and_symmetry() {
        let t = SymTensor::from_upper(3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(t.get(i, j), t.get(j, i));
            }
        }
        assert_eq!(t.upper(), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn norm_and_contraction() {
        let a = SymTensor::diag(&[1.0, -1.0]);
        assert_eq!(a.norm(), 2f64.sqrt());
        let b = SymTensor::from_upper(2, &[0.0, 1.0, 0.0]);
        assert_eq!(a.contract(&b), 0.0);
        assert_eq!(b.contract(&b), 2.0);
    }

    #[test]
    fn eigenvalues_sorted() {
        let t = SymTensor::from_upper(2, &[2.0, 1.0, 2.0]);
        let ev = t.eigenvalues();
        assert!((ev[0] - 1.0).abs() < 1e-14 && (ev[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn rotation_preserves_norm() {
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let q = [c, -s, s, c];
        let t = SymTensor::from_upper(2, &[1.0, 0.5, -2.0]);
        let r = t.conjugate_by(&q);
        assert!((r.norm() - t.norm()).abs() < 1e-14);
        assert!((r.trace() - t.trace()).abs() < 1e-14);
    }
}
