use rayon::prelude::*;
use rustfft::num_complex::Complex64;

use super::field::{PressureField, SpectralVelocity, StressField, SymTensorField};
use super::grid::TorusGrid;
use super::step::Forcing;
use crate::error::{Error, Result};
use crate::rheology::{upper_pairs, RheologyModel, SymTensor};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Dealias (and optional radial cutoff), Leray-project and symmetrize a
/// spectral vector field in place. `keep_mean = false` also clears `k = 0`.
pub(crate) fn leray_in_place(
    coeffs: &mut [Vec<Complex64>],
    grid: &TorusGrid,
    cutoff: Option<f64>,
    keep_mean: bool,
) {
    let d = grid.dim();
    for idx in 0..grid.len() {
        let partner = grid.negated(idx);
        let keep = grid.retained(idx)
            && partner.is_some()
            && match cutoff {
                Some(r) => {
                    let k = grid.wavevector(idx);
                    (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt() <= r * (1.0 + 1e-12)
                }
                None => true,
            };
        if !keep {
            for c in coeffs.iter_mut() {
                c[idx] = ZERO;
            }
            continue;
        }
        let partner = partner.expect("checked above");
        if partner < idx {
            continue;
        }
        if idx == 0 {
            for c in coeffs.iter_mut() {
                c[0] = if keep_mean { Complex64::new(c[0].re, 0.0) } else { ZERO };
            }
            continue;
        }
        let k = grid.wavevector(idx);
        let k2: f64 = k[..d].iter().map(|x| x * x).sum();
        // symmetrize the pair, then remove the longitudinal part
        let mut w = [ZERO; 3];
        for c in 0..d {
            w[c] = 0.5 * (coeffs[c][idx] + coeffs[c][partner].conj());
        }
        let dot: Complex64 = (0..d).map(|c| w[c] * k[c]).sum();
        for c in 0..d {
            let val = w[c] - dot * (k[c] / k2);
            coeffs[c][idx] = val;
            coeffs[c][partner] = val.conj();
        }
    }
}

/// Dealias and symmetrize a scalar spectral array in place.
fn dealias_scalar(coeffs: &mut [Complex64], grid: &TorusGrid) {
    for idx in 0..grid.len() {
        match grid.negated(idx) {
            Some(p) if grid.retained(idx) => {
                if p > idx {
                    let w = 0.5 * (coeffs[idx] + coeffs[p].conj());
                    coeffs[idx] = w;
                    coeffs[p] = w.conj();
                } else if p == idx {
                    coeffs[idx] = Complex64::new(coeffs[idx].re, 0.0);
                }
            }
            _ => coeffs[idx] = ZERO,
        }
    }
}

/// Galerkin projection onto divergence-free modes with `|pi k| <= cutoff`
/// inside the dealiased band.
#[derive(Clone, Debug)]
pub struct Projection {
    pub grid: TorusGrid,
    pub cutoff: f64,
}

pub fn make_basis_projection(grid: &TorusGrid, n_cutoff: f64) -> Result<Projection> {
    let band = std::f64::consts::PI * grid.n() as f64 * grid.dealias_fraction() / 2.0;
    if !(n_cutoff >= 0.0) || n_cutoff > band * (1.0 + 1e-12) {
        return Err(Error::Configuration(format!(
            "projection cutoff {n_cutoff} exceeds the dealiased band {band}"
        )));
    }
    Ok(Projection {
        grid: grid.clone(),
        cutoff: n_cutoff,
    })
}

impl Projection {
    pub fn apply(&self, v: &SpectralVelocity) -> Result<SpectralVelocity> {
        if v.grid != self.grid {
            return Err(Error::Input("projection grid does not match the field".into()));
        }
        let mut out = v.clone();
        leray_in_place(&mut out.coeffs, &self.grid, Some(self.cutoff), true);
        Ok(out)
    }
}

/// Leray projection onto the full dealiased band, keeping the mean.
pub fn project(v: &SpectralVelocity) -> SpectralVelocity {
    let mut out = v.clone();
    leray_in_place(&mut out.coeffs, &v.grid, None, true);
    out
}

/// Collocation values of `Dv = (grad v + grad v^T) / 2`.
pub fn sym_gradient(v: &SpectralVelocity) -> SymTensorField {
    let grid = &v.grid;
    let pairs = upper_pairs(grid.dim());
    let comps = pairs
        .iter()
        .map(|&(i, j)| {
            let spec: Vec<Complex64> = (0..grid.len())
                .map(|idx| {
                    let k = grid.wavevector(idx);
                    0.5 * I * (k[i] * v.coeffs[j][idx] + k[j] * v.coeffs[i][idx])
                })
                .collect();
            grid.to_physical(&spec)
        })
        .collect();
    SymTensorField {
        grid: grid.clone(),
        comps,
    }
}

/// Collocation values of the full gradient; entry `i * d + j` holds `d_j v_i`.
pub fn velocity_gradient(v: &SpectralVelocity) -> Vec<Vec<f64>> {
    let grid = &v.grid;
    let d = grid.dim();
    (0..d * d)
        .map(|m| {
            let (i, j) = (m / d, m % d);
            let spec: Vec<Complex64> = (0..grid.len())
                .map(|idx| I * grid.wavevector(idx)[j] * v.coeffs[i][idx])
                .collect();
            grid.to_physical(&spec)
        })
        .collect()
}

/// Spectral divergence `i k_j T_ij` of a nodal symmetric tensor field (dealiased, unprojected).
pub(crate) fn tensor_divergence(t: &SymTensorField) -> Vec<Vec<Complex64>> {
    let grid = &t.grid;
    let d = grid.dim();
    let hats: Vec<Vec<Complex64>> = t.comps.iter().map(|c| grid.to_spectral(c)).collect();
    let pairs = upper_pairs(d);
    let slot = |i: usize, j: usize| {
        pairs
            .iter()
            .position(|&(a, b)| (a, b) == (i.min(j), i.max(j)))
            .expect("pair exists")
    };
    let mut out = vec![vec![ZERO; grid.len()]; d];
    for idx in 0..grid.len() {
        if !grid.retained(idx) {
            continue;
        }
        let k = grid.wavevector(idx);
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = ZERO;
            for j in 0..d {
                acc += hats[slot(i, j)][idx] * k[j];
            }
            o[idx] = I * acc;
        }
    }
    out
}

/// Nodal `v (x) v`.
pub(crate) fn outer_product(v_phys: &[Vec<f64>], grid: &TorusGrid) -> SymTensorField {
    let comps = upper_pairs(grid.dim())
        .iter()
        .map(|&(i, j)| v_phys[i].iter().zip(&v_phys[j]).map(|(a, b)| a * b).collect())
        .collect();
    SymTensorField {
        grid: grid.clone(),
        comps,
    }
}

/// `-P div(v (x) v)` from nodal velocity values.
pub(crate) fn convective_from_physical(v_phys: &[Vec<f64>], grid: &TorusGrid) -> Vec<Vec<Complex64>> {
    let mut out = tensor_divergence(&outer_product(v_phys, grid));
    out.iter_mut().flatten().for_each(|z| *z = -*z);
    leray_in_place(&mut out, grid, None, false);
    out
}

/// Projected, dealiased convective tendency `-P div(v (x) v)`.
pub fn convective_rhs(v: &SpectralVelocity) -> SpectralVelocity {
    let coeffs = convective_from_physical(&v.to_physical(), &v.grid);
    SpectralVelocity {
        grid: v.grid.clone(),
        coeffs,
        time: v.time,
    }
}

/// Nodal stress `S = stress_from_D(Dv)`.
pub(crate) fn stress_field(model: &RheologyModel, d: &SymTensorField) -> SymTensorField {
    let values: Vec<SymTensor> = (0..d.grid.len())
        .into_par_iter()
        .map(|i| model.stress_unchecked(&d.at(i)))
        .collect();
    SymTensorField::from_tensors(&d.grid, &values)
}

pub(crate) fn check_model_dim(model: &RheologyModel, grid: &TorusGrid) -> Result<()> {
    match model.required_dim() {
        Some(d) if d != grid.dim() => Err(Error::Configuration(format!(
            "rheology acts in dimension {d}, grid has dimension {}",
            grid.dim()
        ))),
        _ => Ok(()),
    }
}

/// Projected viscous tendency `P div S` with the nodal stress it came from.
pub fn viscous_rhs(model: &RheologyModel, v: &SpectralVelocity) -> Result<(SpectralVelocity, StressField)> {
    check_model_dim(model, &v.grid)?;
    let s = stress_field(model, &sym_gradient(v));
    let mut div = tensor_divergence(&s);
    leray_in_place(&mut div, &v.grid, None, false);
    let rhs = SpectralVelocity {
        grid: v.grid.clone(),
        coeffs: div.clone(),
        time: v.time,
    };
    Ok((
        rhs,
        StressField {
            values: s,
            divergence: div,
        },
    ))
}

/// Dealiased, unprojected momentum tendency `-div(v (x) v) + div S + f`.
pub fn unprojected_rhs(
    model: &RheologyModel,
    v: &SpectralVelocity,
    force: Option<&dyn Forcing>,
) -> Result<Vec<Vec<Complex64>>> {
    check_model_dim(model, &v.grid)?;
    let grid = &v.grid;
    let conv = tensor_divergence(&outer_product(&v.to_physical(), grid));
    let visc = tensor_divergence(&stress_field(model, &sym_gradient(v)));
    let f = match force {
        Some(f) => f.spectral(grid, v.time)?,
        None => None,
    };
    let mut out = vec![vec![ZERO; grid.len()]; grid.dim()];
    for (c, o) in out.iter_mut().enumerate() {
        for idx in 0..grid.len() {
            let mut val = visc[c][idx] - conv[c][idx];
            if let Some(f) = &f {
                val += f[c][idx];
            }
            o[idx] = val;
        }
        dealias_scalar(o, grid);
    }
    Ok(out)
}

/// Zero-mean pressure with `grad Pi = (I - P)(-div(v (x) v) + div S + f)`.
pub fn recover_pressure(
    model: &RheologyModel,
    v: &SpectralVelocity,
    force: Option<&dyn Forcing>,
) -> Result<PressureField> {
    let r = unprojected_rhs(model, v, force)?;
    let grid = &v.grid;
    let mut coeffs = vec![ZERO; grid.len()];
    for (idx, p) in coeffs.iter_mut().enumerate().skip(1) {
        if !grid.retained(idx) {
            continue;
        }
        let k = grid.wavevector(idx);
        let k2: f64 = k.iter().map(|x| x * x).sum();
        let dot: Complex64 = (0..grid.dim()).map(|c| r[c][idx] * k[c]).sum();
        // -|k|^2 Pi = i k . R
        *p = -I * dot / k2;
    }
    Ok(PressureField {
        grid: grid.clone(),
        coeffs,
    })
}

/// Spectral gradient of a scalar field.
pub fn gradient(p: &PressureField) -> Vec<Vec<Complex64>> {
    let grid = &p.grid;
    (0..grid.dim())
        .map(|c| {
            (0..grid.len())
                .map(|idx| I * grid.wavevector(idx)[c] * p.coeffs[idx])
                .collect()
        })
        .collect()
}

pub const CFL_ADVECTIVE: f64 = 0.5;
pub const CFL_VISCOUS: f64 = 0.25;

/// CFL bound from the maximal speed and the largest effective viscosity
/// above the integrating-factor floor `mu0`; `f64::INFINITY` when neither constrains.
pub(crate) fn cfl_from(grid: &TorusGrid, vmax: f64, nu_max: f64) -> f64 {
    let h = grid.h();
    let adv = if vmax > 0.0 { CFL_ADVECTIVE * h / vmax } else { f64::INFINITY };
    let visc = if nu_max > 0.0 {
        CFL_VISCOUS * h * h / nu_max
    } else {
        f64::INFINITY
    };
    adv.min(visc)
}

/// Largest effective viscosity `mu(|D|) - mu0` over the nodes.
pub(crate) fn max_effective_viscosity(model: &RheologyModel, d: &SymTensorField, mu0: f64) -> f64 {
    (0..d.grid.len())
        .into_par_iter()
        .map(|i| model.secant_viscosity(&d.at(i)))
        .reduce(|| 0.0, f64::max)
        .max(0.0)
        - mu0
}

pub fn cfl_limit(model: &RheologyModel, v: &SpectralVelocity, mu0: f64) -> Result<f64> {
    check_model_dim(model, &v.grid)?;
    let nu = max_effective_viscosity(model, &sym_gradient(v), mu0).max(0.0);
    Ok(cfl_from(&v.grid, v.max_speed(), nu))
}
