use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;

use super::grid::TorusGrid;
use super::ops::leray_in_place;
use crate::error::{Error, Result};
use crate::rheology::{upper_len, upper_pairs, SymTensor};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Velocity in Fourier space. `coeffs[c][idx]` is component `c` at spectral
/// index `idx`; modes outside the dealiased band are kept at zero.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralVelocity {
    pub grid: TorusGrid,
    pub coeffs: Vec<Vec<Complex64>>,
    pub time: f64,
}

impl SpectralVelocity {
    pub fn zeros(grid: &TorusGrid) -> Self {
        Self {
            grid: grid.clone(),
            coeffs: vec![vec![ZERO; grid.len()]; grid.dim()],
            time: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    /// Builds a state from nodal values `phys[c][node]`, then projects.
    pub fn from_physical(grid: &TorusGrid, phys: &[Vec<f64>]) -> Result<Self> {
        if phys.len() != grid.dim() || phys.iter().any(|p| p.len() != grid.len()) {
            return Err(Error::Input("physical field has the wrong shape".into()));
        }
        let mut v = Self {
            grid: grid.clone(),
            coeffs: phys.iter().map(|p| grid.to_spectral(p)).collect(),
            time: 0.0,
        };
        leray_in_place(&mut v.coeffs, grid, None, true);
        Ok(v)
    }

    /// Nodal values, one vector per component.
    pub fn to_physical(&self) -> Vec<Vec<f64>> {
        self.coeffs.iter().map(|c| self.grid.to_physical(c)).collect()
    }

    /// `1/2 int |v|^2` by Parseval.
    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.grid.volume() * self.sum_sq()
    }

    /// `int |v|^2 = 2^d sum_k |c_k|^2`.
    pub fn l2_norm_sq(&self) -> f64 {
        self.grid.volume() * self.sum_sq()
    }

    fn sum_sq(&self) -> f64 {
        self.coeffs
            .iter()
            .flat_map(|c| c.iter())
            .map(|z| z.norm_sqr())
            .sum()
    }

    /// `int v . w` for states on the same grid.
    pub fn inner(&self, other: &Self) -> f64 {
        let mut acc = 0.0;
        for (a, b) in self.coeffs.iter().zip(&other.coeffs) {
            for (x, y) in a.iter().zip(b) {
                acc += (x * y.conj()).re;
            }
        }
        self.grid.volume() * acc
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs
            .iter()
            .flat_map(|c| c.iter())
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Largest `|k . c_k| / |k|` relative to the largest coefficient norm.
    pub fn max_divergence(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for idx in 0..self.grid.len() {
            let k = self.grid.wavevector(idx);
            let kn = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
            let mut dot = ZERO;
            let mut cn = 0.0;
            for c in 0..self.dim() {
                dot += self.coeffs[c][idx] * k[c];
                cn += self.coeffs[c][idx].norm_sqr();
            }
            scale = scale.max(cn.sqrt());
            if kn > 0.0 {
                worst = worst.max(dot.norm() / kn);
            }
        }
        if scale > 0.0 {
            worst / scale
        } else {
            0.0
        }
    }

    /// Largest coefficient difference to another state on the same grid.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.coeffs
            .iter()
            .flatten()
            .zip(other.coeffs.iter().flatten())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Largest `|c(-k) - conj(c(k))|`.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for idx in 0..self.grid.len() {
            let partner = match self.grid.negated(idx) {
                Some(m) => m,
                None => {
                    for c in &self.coeffs {
                        worst = worst.max(c[idx].norm());
                    }
                    continue;
                }
            };
            for c in &self.coeffs {
                worst = worst.max((c[partner] - c[idx].conj()).norm());
            }
        }
        worst
    }

    /// Mean velocity `c_0`.
    pub fn mean(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c[0].re).collect()
    }

    /// Coefficient vector at an integer wavenumber (zero if not stored).
    pub fn mode(&self, k: [i64; 3]) -> Vec<Complex64> {
        match self.grid.index_of(k) {
            Some(i) => self.coeffs.iter().map(|c| c[i]).collect(),
            None => vec![ZERO; self.dim()],
        }
    }

    /// Spectral resampling to another resolution: truncation to the target
    /// band when coarsening, zero padding when refining.
    pub fn resample(&self, n: usize) -> Result<Self> {
        self.resample_to(&self.grid.with_n(n)?)
    }

    /// Truncates or zero-pads onto `target`, which must share the dimension.
    pub fn resample_to(&self, target: &TorusGrid) -> Result<Self> {
        if target.dim() != self.dim() {
            return Err(Error::Input(format!(
                "cannot resample a {}-d field onto a {}-d grid",
                self.dim(),
                target.dim()
            )));
        }
        let mut out = SpectralVelocity::zeros(target);
        out.time = self.time;
        for idx in 0..self.grid.len() {
            if !self.grid.retained(idx) {
                continue;
            }
            let k = self.grid.wavenumber(idx);
            if let Some(j) = target.index_of(k) {
                if target.retained(j) {
                    for c in 0..self.dim() {
                        out.coeffs[c][j] = self.coeffs[c][idx];
                    }
                }
            }
        }
        Ok(out)
    }

    /// Evaluates the trigonometric polynomial at an arbitrary point.
    pub fn eval_at(&self, x: [f64; 3]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for idx in 0..self.grid.len() {
            if !self.grid.retained(idx) {
                continue;
            }
            let k = self.grid.wavevector(idx);
            let ph = k[0] * x[0] + k[1] * x[1] + k[2] * x[2];
            let e = Complex64::new(ph.cos(), ph.sin());
            for (c, o) in out.iter_mut().enumerate() {
                *o += (self.coeffs[c][idx] * e).re;
            }
        }
        out
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &Self) -> Self {
        let mut out = self.clone();
        for (x, y) in out.coeffs.iter_mut().zip(&other.coeffs) {
            for (p, q) in x.iter_mut().zip(y) {
                *p += a * q;
            }
        }
        out
    }

    /// Max-norm over collocation nodes of `|v|`.
    pub fn max_speed(&self) -> f64 {
        let phys = self.to_physical();
        (0..self.grid.len())
            .map(|i| phys.iter().map(|p| p[i] * p[i]).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

/// Symmetric-tensor field at the collocation nodes, stored as upper-triangle
/// components (`comps[m][node]`, `m` in [`upper_pairs`] order).
#[derive(Clone, Debug, PartialEq)]
pub struct SymTensorField {
    pub grid: TorusGrid,
    pub comps: Vec<Vec<f64>>,
}

impl SymTensorField {
    pub fn zeros(grid: &TorusGrid) -> Self {
        Self {
            grid: grid.clone(),
            comps: vec![vec![0.0; grid.len()]; upper_len(grid.dim())],
        }
    }

    #[inline]
    pub fn at(&self, node: usize) -> SymTensor {
        let d = self.grid.dim();
        let mut up = [0.0; 6];
        for (m, c) in self.comps.iter().enumerate() {
            up[m] = c[node];
        }
        SymTensor::from_upper(d, &up[..upper_len(d)])
    }

    pub fn set(&mut self, node: usize, t: &SymTensor) {
        for (m, &(i, j)) in upper_pairs(self.grid.dim()).iter().enumerate() {
            self.comps[m][node] = t.get(i, j);
        }
    }

    pub fn from_tensors(grid: &TorusGrid, values: &[SymTensor]) -> Self {
        let mut f = Self::zeros(grid);
        for (i, t) in values.iter().enumerate() {
            f.set(i, t);
        }
        f
    }

    /// Trapezoidal quadrature of `f(T(x))` over the torus.
    pub fn integrate<F: Fn(&SymTensor) -> f64>(&self, f: F) -> f64 {
        let sum: f64 = (0..self.grid.len()).map(|i| f(&self.at(i))).sum();
        sum * self.grid.cell_volume()
    }

    /// `int A : B` over the torus.
    pub fn contract_integral(&self, other: &Self) -> f64 {
        let d = self.grid.dim();
        let mut acc = 0.0;
        for (m, &(i, j)) in upper_pairs(d).iter().enumerate() {
            let w = if i == j { 1.0 } else { 2.0 };
            let s: f64 = self.comps[m].iter().zip(&other.comps[m]).map(|(a, b)| a * b).sum();
            acc += w * s;
        }
        acc * self.grid.cell_volume()
    }
}

/// Stress values at the nodes together with the Leray-projected spectral
/// divergence of the stress.
#[derive(Clone, Debug)]
pub struct StressField {
    pub values: SymTensorField,
    pub divergence: Vec<Vec<Complex64>>,
}

/// Zero-mean pressure in Fourier space.
#[derive(Clone, Debug)]
pub struct PressureField {
    pub grid: TorusGrid,
    pub coeffs: Vec<Complex64>,
}

impl PressureField {
    pub fn to_physical(&self) -> Vec<f64> {
        self.grid.to_physical(&self.coeffs)
    }

    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }
}

/// Taylor-Green vortex `A (sin pi x cos pi y, -cos pi x sin pi y)` (times
/// `cos pi z` in 3-D, third component zero).
pub fn taylor_green(grid: &TorusGrid, amplitude: f64) -> Result<SpectralVelocity> {
    if grid.kmax() < 1 {
        return Err(Error::Configuration("grid too coarse for the Taylor-Green mode".into()));
    }
    let mut phys = vec![vec![0.0; grid.len()]; grid.dim()];
    for i in 0..grid.len() {
        let x = grid.node(i);
        let z = if grid.dim() == 3 { (PI * x[2]).cos() } else { 1.0 };
        phys[0][i] = amplitude * (PI * x[0]).sin() * (PI * x[1]).cos() * z;
        phys[1][i] = -amplitude * (PI * x[0]).cos() * (PI * x[1]).sin() * z;
    }
    SpectralVelocity::from_physical(grid, &phys)
}

/// Seeded smooth divergence-free data: Gaussian coefficients with amplitude
/// `|k|^(-decay)` on the box `|k_j| <= max_mode`, rescaled to kinetic energy
/// `energy`, then truncated to the grid's band. The coefficients are drawn in
/// a fixed order over the box, so every resolution sees the same field.
pub fn seeded_random_smooth(
    grid: &TorusGrid,
    seed: u64,
    decay: f64,
    max_mode: i64,
    energy: f64,
) -> Result<SpectralVelocity> {
    if max_mode < 1 {
        return Err(Error::Configuration("initial.max_mode must be >= 1".into()));
    }
    if !(decay.is_finite() && energy.is_finite() && energy >= 0.0) {
        return Err(Error::Configuration("initial data parameters must be finite".into()));
    }
    let d = grid.dim();
    let box_grid = TorusGrid::new(d, 2 * (max_mode as usize + 1), 1.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coeffs = vec![vec![ZERO; box_grid.len()]; d];
    let range = -max_mode..=max_mode;
    let ks: Vec<[i64; 3]> = match d {
        2 => range
            .clone()
            .flat_map(|a| range.clone().map(move |b| [a, b, 0]))
            .collect(),
        _ => range
            .clone()
            .flat_map(|a| {
                let r = range.clone();
                r.clone().flat_map(move |b| r.clone().map(move |c| [a, b, c]))
            })
            .collect(),
    };
    for k in ks {
        // draw on one half space and mirror to keep the field real
        let positive = k.iter().find(|&&x| x != 0).is_some_and(|&x| x > 0);
        if !positive {
            continue;
        }
        let kn = ((k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64).sqrt();
        let amp = kn.powf(-decay);
        let idx = box_grid.index_of(k).expect("box holds max_mode");
        let neg = box_grid.index_of([-k[0], -k[1], -k[2]]).expect("box holds max_mode");
        for c in coeffs.iter_mut() {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            let z = Complex64::new(re, im) * amp;
            c[idx] = z;
            c[neg] = z.conj();
        }
    }
    leray_in_place(&mut coeffs, &box_grid, None, false);
    let mut full = SpectralVelocity {
        grid: box_grid,
        coeffs,
        time: 0.0,
    };
    let ke = full.kinetic_energy();
    if ke > 0.0 {
        let scale = (energy / ke).sqrt();
        full.coeffs.iter_mut().flatten().for_each(|z| *z *= scale);
    }
    let mut out = SpectralVelocity::zeros(grid);
    for idx in 0..full.grid.len() {
        let k = full.grid.wavenumber(idx);
        if let Some(j) = grid.index_of(k) {
            if grid.retained(j) {
                for c in 0..d {
                    out.coeffs[c][j] = full.coeffs[c][idx];
                }
            }
        }
    }
    Ok(out)
}
