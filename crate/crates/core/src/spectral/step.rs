use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::field::{SpectralVelocity, SymTensorField};
use super::grid::TorusGrid;
use super::ops::{
    cfl_from, check_model_dim, convective_from_physical, leray_in_place, max_effective_viscosity,
    stress_field, sym_gradient, tensor_divergence,
};
use crate::error::{Error, Result};
use crate::rheology::RheologyModel;

/// Body force in Fourier space.
pub trait Forcing: Send + Sync {
    /// Coefficients at time `t` on `grid`, or `None` for a vanishing force.
    fn spectral(&self, grid: &TorusGrid, t: f64) -> Result<Option<Vec<Vec<Complex64>>>>;
}

/// Space integrals entering the energy budget, evaluated at one state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BudgetRates {
    /// `int F(Dv)`
    pub diss_f: f64,
    /// `int F*(S)`
    pub diss_fstar: f64,
    /// `int S : Dv`
    pub diss_sd: f64,
    /// `int f . v`
    pub work: f64,
}

impl BudgetRates {
    fn axpy(&mut self, a: f64, o: &Self) {
        self.diss_f += a * o.diss_f;
        self.diss_fstar += a * o.diss_fstar;
        self.diss_sd += a * o.diss_sd;
        self.work += a * o.work;
    }

    pub fn gap(&self) -> f64 {
        self.diss_f + self.diss_fstar - self.diss_sd
    }
}

/// Diagnostics of one evaluated state.
#[derive(Clone, Debug)]
pub struct StateDiagnostics {
    pub rates: BudgetRates,
    /// Explicit stability bound at this state.
    pub cfl: f64,
    pub stress: SymTensorField,
    pub strain: SymTensorField,
}

struct Evaluation {
    rhs: Vec<Vec<Complex64>>,
    diag: StateDiagnostics,
}

#[derive(Clone, Debug)]
pub struct StepReport {
    pub state: SpectralVelocity,
    /// Diagnostics of the state the step started from.
    pub start: StateDiagnostics,
    /// RK4-weighted time integrals of the budget rates over the step.
    pub increments: BudgetRates,
}

/// Explicit RK4 for the projected Galerkin system. With a Newtonian floor
/// `mu0 > 0` the linear part `(mu0/2) Laplacian` is integrated exactly
/// (Lawson integrating factor) and only the remainder is explicit.
pub struct Stepper<'a> {
    model: &'a RheologyModel,
    force: Option<&'a dyn Forcing>,
    mu0: f64,
}

impl<'a> Stepper<'a> {
    pub fn new(model: &'a RheologyModel, force: Option<&'a dyn Forcing>, mu0: f64) -> Result<Self> {
        if !(mu0 >= 0.0 && mu0.is_finite()) {
            return Err(Error::Configuration(format!("newtonian floor must be >= 0, got {mu0}")));
        }
        Ok(Self { model, force, mu0 })
    }

    pub fn newtonian_floor(&self) -> f64 {
        self.mu0
    }

    /// `-(mu0/2) |pi k|^2` for the integrating factor.
    fn linear_symbol(&self, grid: &TorusGrid, idx: usize) -> f64 {
        let k = grid.wavevector(idx);
        -0.5 * self.mu0 * (k[0] * k[0] + k[1] * k[1] + k[2] * k[2])
    }

    fn evaluate(&self, v: &SpectralVelocity, t: f64) -> Result<Evaluation> {
        let grid = &v.grid;
        let phys = v.to_physical();
        let mut rhs = convective_from_physical(&phys, grid);
        let strain = sym_gradient(v);
        let stress = stress_field(self.model, &strain);
        let mut visc = tensor_divergence(&stress);
        leray_in_place(&mut visc, grid, None, false);
        let force = match self.force {
            Some(f) => f.spectral(grid, t)?.map(|mut c| {
                leray_in_place(&mut c, grid, None, false);
                c
            }),
            None => None,
        };
        let mut work = 0.0;
        if let Some(f) = &force {
            for (fc, vc) in f.iter().zip(&v.coeffs) {
                for (a, b) in fc.iter().zip(vc) {
                    work += (a * b.conj()).re;
                }
            }
            work *= grid.volume();
        }
        for c in 0..grid.dim() {
            for idx in 0..grid.len() {
                let mut val = rhs[c][idx] + visc[c][idx];
                if let Some(f) = &force {
                    val += f[c][idx];
                }
                if self.mu0 > 0.0 {
                    val -= self.linear_symbol(grid, idx) * v.coeffs[c][idx];
                }
                rhs[c][idx] = val;
            }
        }
        let model = self.model;
        let (sum_f, sum_fs) = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                (
                    model.f_unchecked(&strain.at(i)),
                    model.f_star_unchecked(&stress.at(i)),
                )
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
        let w = grid.cell_volume();
        let rates = BudgetRates {
            diss_f: sum_f * w,
            diss_fstar: sum_fs * w,
            diss_sd: stress.contract_integral(&strain),
            work,
        };
        let vmax = (0..grid.len())
            .map(|i| phys.iter().map(|p| p[i] * p[i]).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        let nu = max_effective_viscosity(model, &strain, self.mu0).max(0.0);
        Ok(Evaluation {
            rhs,
            diag: StateDiagnostics {
                rates,
                cfl: cfl_from(grid, vmax, nu),
                stress,
                strain,
            },
        })
    }

    /// Budget rates and stability bound at `v` without stepping.
    pub fn diagnose(&self, v: &SpectralVelocity) -> Result<StateDiagnostics> {
        check_model_dim(self.model, &v.grid)?;
        Ok(self.evaluate(v, v.time)?.diag)
    }

    /// `E(h) x`, with `E = exp(L h)` diagonal.
    fn propagate(&self, grid: &TorusGrid, coeffs: &[Vec<Complex64>], h: f64) -> Vec<Vec<Complex64>> {
        if self.mu0 == 0.0 {
            return coeffs.to_vec();
        }
        let factors: Vec<f64> = (0..grid.len())
            .map(|idx| (self.linear_symbol(grid, idx) * h).exp())
            .collect();
        coeffs
            .iter()
            .map(|c| c.iter().zip(&factors).map(|(z, f)| z * f).collect())
            .collect()
    }

    fn combine(
        base: &[Vec<Complex64>],
        terms: &[(f64, &[Vec<Complex64>])],
    ) -> Vec<Vec<Complex64>> {
        let mut out = base.to_vec();
        for (a, t) in terms {
            for (o, x) in out.iter_mut().zip(t.iter()) {
                for (p, q) in o.iter_mut().zip(x) {
                    *p += *a * q;
                }
            }
        }
        out
    }

    fn state(v: &SpectralVelocity, coeffs: Vec<Vec<Complex64>>, t: f64) -> SpectralVelocity {
        let mut coeffs = coeffs;
        leray_in_place(&mut coeffs, &v.grid, None, true);
        SpectralVelocity {
            grid: v.grid.clone(),
            coeffs,
            time: t,
        }
    }

    /// One step of size `dt` from `v`.
    pub fn step(&self, v: &SpectralVelocity, dt: f64) -> Result<StepReport> {
        check_model_dim(self.model, &v.grid)?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Domain(format!("time step must be positive, got {dt}")));
        }
        let grid = &v.grid;
        let t = v.time;
        let h = dt;
        let e1 = self.evaluate(v, t)?;
        if dt > e1.diag.cfl * (1.0 + 1e-12) {
            return Err(Error::Stability {
                dt,
                suggested: e1.diag.cfl,
            });
        }
        let v_half = self.propagate(grid, &v.coeffs, 0.5 * h);

        let s2 = Self::combine(&v.coeffs, &[(0.5 * h, &e1.rhs)]);
        let s2 = Self::state(v, self.propagate(grid, &s2, 0.5 * h), t + 0.5 * h);
        let e2 = self.evaluate(&s2, t + 0.5 * h)?;

        let s3 = Self::state(v, Self::combine(&v_half, &[(0.5 * h, &e2.rhs)]), t + 0.5 * h);
        let e3 = self.evaluate(&s3, t + 0.5 * h)?;

        let k3_half = self.propagate(grid, &e3.rhs, 0.5 * h);
        let v_full = self.propagate(grid, &v.coeffs, h);
        let s4 = Self::state(v, Self::combine(&v_full, &[(h, &k3_half)]), t + h);
        let e4 = self.evaluate(&s4, t + h)?;

        let k1_full = self.propagate(grid, &e1.rhs, h);
        let k23 = Self::combine(&e2.rhs, &[(1.0, &e3.rhs)]);
        let k23_half = self.propagate(grid, &k23, 0.5 * h);
        let next = Self::combine(
            &v_full,
            &[(h / 6.0, &k1_full), (h / 3.0, &k23_half), (h / 6.0, &e4.rhs)],
        );
        let state = Self::state(v, next, t + h);
        if !state.is_finite() {
            return Err(Error::NonFinite { time: t + h });
        }

        let mut increments = BudgetRates::default();
        increments.axpy(h / 6.0, &e1.diag.rates);
        increments.axpy(h / 3.0, &e2.diag.rates);
        increments.axpy(h / 3.0, &e3.diag.rates);
        increments.axpy(h / 6.0, &e4.diag.rates);
        Ok(StepReport {
            state,
            start: e1.diag,
            increments,
        })
    }
}

/// One plain RK4 step without integrating factor.
pub fn step(
    model: &RheologyModel,
    v: &SpectralVelocity,
    dt: f64,
    force: Option<&dyn Forcing>,
) -> Result<SpectralVelocity> {
    Ok(Stepper::new(model, force, 0.0)?.step(v, dt)?.state)
}

/// Galerkin residual `dv/dt - P(-div(v (x) v) + div S + f)` on the retained modes.
pub fn galerkin_residual(
    model: &RheologyModel,
    v: &SpectralVelocity,
    dvdt: &SpectralVelocity,
    force: Option<&dyn Forcing>,
) -> Result<SpectralVelocity> {
    let stepper = Stepper::new(model, force, 0.0)?;
    check_model_dim(model, &v.grid)?;
    let e = stepper.evaluate(v, v.time)?;
    let mut out = dvdt.clone();
    for (o, r) in out.coeffs.iter_mut().zip(&e.rhs) {
        for (p, q) in o.iter_mut().zip(r) {
            *p -= q;
        }
    }
    leray_in_place(&mut out.coeffs, &v.grid, None, true);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::field::{seeded_random_smooth, taylor_green};
    use crate::spectral::ops::project;
    use std::f64::consts::PI;

    #[test]
    fn taylor_green_amplitude_factor() {
        let g = TorusGrid::new(2, 32, 2.0 / 3.0).unwrap();
        let mu = 0.1;
        let model = RheologyModel::newtonian(mu).unwrap();
        let v = taylor_green(&g, 1.0).unwrap();
        let dt = 1e-3;
        let out = step(&model, &v, dt, None).unwrap();
        // amplitude of (sin pi x cos pi y, ...) decays like exp(-mu pi^2 t)
        let ratio = (out.kinetic_energy() / v.kinetic_energy()).sqrt();
        let exact = (-mu * PI * PI * dt).exp();
        assert!((ratio / exact - 1.0).abs() < 1e-10, "{ratio} vs {exact}");
    }

    #[test]
    fn integrating_factor_is_exact_for_newtonian_vortex() {
        let g = TorusGrid::new(2, 16, 2.0 / 3.0).unwrap();
        let mu = 1.0;
        let model = RheologyModel::newtonian(mu).unwrap();
        let stepper = Stepper::new(&model, None, mu).unwrap();
        let v = taylor_green(&g, 1.0).unwrap();
        let dt = 0.01;
        let r = stepper.step(&v, dt).unwrap();
        let ratio = (r.state.kinetic_energy() / v.kinetic_energy()).sqrt();
        assert!((ratio / (-mu * PI * PI * dt).exp() - 1.0).abs() < 1e-13);
    }

    #[test]
    fn euler_single_mode_is_stationary() {
        let g = TorusGrid::new(2, 16, 2.0 / 3.0).unwrap();
        let model = RheologyModel::euler(2).unwrap();
        let v = taylor_green(&g, 0.5).unwrap();
        let out = step(&model, &v, 1e-3, None).unwrap();
        assert!((out.axpy(-1.0, &v)).l2_norm_sq().sqrt() < 1e-14);
    }

    #[test]
    fn step_output_is_projected() {
        let g = TorusGrid::new(2, 16, 2.0 / 3.0).unwrap();
        let model = RheologyModel::power_law(0.0, 0.01, 2.5).unwrap();
        let v = seeded_random_smooth(&g, 2, 3.0, 5, 0.1).unwrap();
        let out = step(&model, &v, 1e-3, None).unwrap();
        assert!(project(&out).max_abs_diff(&out) < 1e-17);
        assert!(out.max_divergence() < 1e-13);
        assert_eq!(out.hermitian_defect(), 0.0);
    }

    #[test]
    fn stability_error_suggests_bound() {
        let g = TorusGrid::new(2, 16, 2.0 / 3.0).unwrap();
        let model = RheologyModel::newtonian(1.0).unwrap();
        let v = taylor_green(&g, 1.0).unwrap();
        match step(&model, &v, 0.1, None) {
            Err(Error::Stability { dt, suggested }) => {
                assert_eq!(dt, 0.1);
                assert!(suggested < 0.1 && suggested > 0.0);
            }
            other => panic!("expected stability error, got {other:?}"),
        }
    }

    #[test]
    fn step_budget_residual_is_small() {
        let g = TorusGrid::new(2, 32, 2.0 / 3.0).unwrap();
        let model = RheologyModel::newtonian(0.1).unwrap();
        let v = taylor_green(&g, 1.0).unwrap();
        let r = Stepper::new(&model, None, 0.0).unwrap().step(&v, 1e-3).unwrap();
        let residual = r.state.kinetic_energy() + r.increments.diss_sd - v.kinetic_energy();
        assert!(residual.abs() <= 1e-10, "{residual}");
    }
}
