use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Uniform collocation grid on the period-2 torus `[-1, 1)^d` with its
/// Fourier dual. Physical wavenumbers are `pi * k` for integer `k`.
///
/// Spectral arrays use FFT-native order along every axis (index `j` holds
/// `k = j` for `j < N/2`, otherwise `k = j - N`), row-major with axis 0
/// slowest. Physical arrays use node `x_j = -1 + 2 j / N` in the same layout.
#[derive(Clone)]
pub struct TorusGrid {
    dim: usize,
    n: usize,
    dealias_fraction: f64,
    kmax: i64,
    plans: Arc<Plans>,
}

struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// `(-1)^(k_1 + ... + k_d)` per spectral index; shifts the DFT from
    /// `[0, 2)` to the nodes on `[-1, 1)`.
    phase: Vec<f64>,
}

impl fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGrid")
            .field("dim", &self.dim)
            .field("n", &self.n)
            .field("dealias_fraction", &self.dealias_fraction)
            .finish()
    }
}

impl PartialEq for TorusGrid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.n == other.n && self.dealias_fraction == other.dealias_fraction
    }
}

pub const DEFAULT_DEALIAS_FRACTION: f64 = 2.0 / 3.0;

impl TorusGrid {
    pub fn new(dim: usize, n: usize, dealias_fraction: f64) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::Configuration(format!("grid.d must be 2 or 3, got {dim}")));
        }
        if n < 8 || !n.is_multiple_of(2) {
            return Err(Error::Configuration(format!("grid.N must be even and >= 8, got {n}")));
        }
        if !(dealias_fraction > 0.0 && dealias_fraction <= 1.0) {
            return Err(Error::Configuration(format!(
                "grid.dealias_fraction must lie in (0, 1], got {dealias_fraction}"
            )));
        }
        let kmax = ((dealias_fraction * n as f64 / 2.0) + 1e-9).floor() as i64;
        // the Nyquist index has no conjugate partner and is never retained
        let kmax = kmax.min(n as i64 / 2 - 1);
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let total = n.pow(dim as u32);
        let mut phase = Vec::with_capacity(total);
        for idx in 0..total {
            let mut s = 0i64;
            let mut rest = idx;
            for _ in 0..dim {
                s += Self::signed(rest % n, n);
                rest /= n;
            }
            phase.push(if s.rem_euclid(2) == 0 { 1.0 } else { -1.0 });
        }
        Ok(Self {
            dim,
            n,
            dealias_fraction,
            kmax,
            plans: Arc::new(Plans {
                forward,
                inverse,
                phase,
            }),
        })
    }

    #[inline]
    fn signed(j: usize, n: usize) -> i64 {
        if j < n / 2 {
            j as i64
        } else {
            j as i64 - n as i64
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dealias_fraction(&self) -> f64 {
        self.dealias_fraction
    }

    /// Largest retained integer wavenumber per axis.
    pub fn kmax(&self) -> i64 {
        self.kmax
    }

    /// Number of collocation points (= number of spectral slots).
    #[inline]
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Mesh width `h = 2 / N`.
    pub fn h(&self) -> f64 {
        2.0 / self.n as f64
    }

    /// Quadrature weight of one node, `(2/N)^d`.
    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.dim as i32)
    }

    /// Torus volume `2^d`.
    pub fn volume(&self) -> f64 {
        2f64.powi(self.dim as i32)
    }

    /// Integer wavenumber of a spectral index (unused axes are 0).
    #[inline]
    pub fn wavenumber(&self, idx: usize) -> [i64; 3] {
        let mut k = [0i64; 3];
        let mut rest = idx;
        for a in (0..self.dim).rev() {
            k[a] = Self::signed(rest % self.n, self.n);
            rest /= self.n;
        }
        k
    }

    /// Spectral index of an integer wavenumber, if representable.
    pub fn index_of(&self, k: [i64; 3]) -> Option<usize> {
        let half = self.n as i64 / 2;
        let mut idx = 0usize;
        for a in 0..self.dim {
            if k[a] < -half || k[a] >= half {
                return None;
            }
            idx = idx * self.n + k[a].rem_euclid(self.n as i64) as usize;
        }
        if (self.dim..3).any(|a| k[a] != 0) {
            return None;
        }
        Some(idx)
    }

    /// Index of `-k`; `None` when `k` touches the Nyquist plane.
    pub fn negated(&self, idx: usize) -> Option<usize> {
        let k = self.wavenumber(idx);
        self.index_of([-k[0], -k[1], -k[2]])
    }

    /// Physical wavevector `pi k`.
    #[inline]
    pub fn wavevector(&self, idx: usize) -> [f64; 3] {
        let k = self.wavenumber(idx);
        let pi = std::f64::consts::PI;
        [pi * k[0] as f64, pi * k[1] as f64, pi * k[2] as f64]
    }

    /// Inside the dealiased band (and never Nyquist).
    #[inline]
    pub fn retained(&self, idx: usize) -> bool {
        let k = self.wavenumber(idx);
        (0..self.dim).all(|a| k[a].abs() <= self.kmax)
    }

    /// Coordinates of collocation node `idx`.
    pub fn node(&self, idx: usize) -> [f64; 3] {
        let mut x = [0.0; 3];
        let mut rest = idx;
        for a in (0..self.dim).rev() {
            x[a] = -1.0 + 2.0 * (rest % self.n) as f64 / self.n as f64;
            rest /= self.n;
        }
        x
    }

    /// Same grid at a different resolution.
    pub fn with_n(&self, n: usize) -> Result<Self> {
        Self::new(self.dim, n, self.dealias_fraction)
    }

    fn fft_all_axes(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        for a in 0..self.dim {
            let stride = n.pow((self.dim - 1 - a) as u32);
            if stride == 1 {
                for chunk in data.chunks_exact_mut(n) {
                    fft.process_with_scratch(chunk, &mut scratch);
                }
                continue;
            }
            let block = stride * n;
            for outer in (0..data.len()).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    for (j, c) in line.iter_mut().enumerate() {
                        *c = data[base + j * stride];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for (j, c) in line.iter().enumerate() {
                        data[base + j * stride] = *c;
                    }
                }
            }
        }
    }

    /// Nodal values of the real field `sum_k c_k exp(i pi k.x)`.
    pub fn to_physical(&self, spec: &[Complex64]) -> Vec<f64> {
        debug_assert_eq!(spec.len(), self.len());
        let mut buf: Vec<Complex64> = spec
            .iter()
            .zip(&self.plans.phase)
            .map(|(c, s)| c * *s)
            .collect();
        self.fft_all_axes(&mut buf, &self.plans.inverse);
        buf.into_iter().map(|c| c.re).collect()
    }

    /// Fourier coefficients of a real nodal field (inverse of [`Self::to_physical`]).
    pub fn to_spectral(&self, phys: &[f64]) -> Vec<Complex64> {
        debug_assert_eq!(phys.len(), self.len());
        let mut buf: Vec<Complex64> = phys.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.fft_all_axes(&mut buf, &self.plans.forward);
        let norm = 1.0 / self.len() as f64;
        buf.iter_mut()
            .zip(&self.plans.phase)
            .for_each(|(c, s)| *c *= norm * s);
        buf
    }
}
