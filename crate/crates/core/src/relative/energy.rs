use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::reference::ReferenceSolution;
use crate::certificates::DefectEstimate;
use crate::error::{Error, Result};
use crate::numerics::{cumulative_quadratic, cumulative_trapezoid};
use crate::rheology::RheologyModel;
use crate::spectral::{sym_gradient, velocity_gradient, SpectralVelocity, TorusGrid};

/// Default slack tolerance of the relative energy inequality.
pub const RTOL_R2: f64 = 1e-6;

pub const RELATIVE_CSV_HEADER: &str = "time,E,gronwall_envelope,slack_r2,conv_block";

fn aligned(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

/// `1/2 int |v - U|^2 + 1/2 trace_total(defect)`.
///
/// Fields on different resolutions are compared on the finer grid.
pub fn relative_energy(
    v: &SpectralVelocity,
    defect: Option<&DefectEstimate>,
    u: &SpectralVelocity,
) -> Result<f64> {
    if !aligned(v.time, u.time) {
        return Err(Error::Input(format!(
            "relative energy of states at t = {} and t = {}",
            v.time, u.time
        )));
    }
    if let Some(d) = defect {
        if !aligned(d.time, v.time) {
            return Err(Error::Input(format!(
                "defect at t = {} for a state at t = {}",
                d.time, v.time
            )));
        }
    }
    let n = v.grid.n().max(u.grid.n());
    let vv = if v.grid.n() == n { v.clone() } else { v.resample(n)? };
    let uu = if u.grid.n() == n { u.clone() } else { u.resample_to(&vv.grid)? };
    if vv.grid != uu.grid {
        return Err(Error::Input("states live on incompatible grids".into()));
    }
    let e = 0.5 * vv.axpy(-1.0, &uu).l2_norm_sq();
    Ok(e + 0.5 * defect.map_or(0.0, |d| d.trace_total))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct R2Options {
    /// Allowed negative slack of the relative energy inequality; the
    /// Gronwall envelope is offset by `rtol_r2 * KE(0)`.
    pub rtol_r2: f64,
    /// Adds `sup phi''(|DU|)` to the Gronwall rate.
    pub stress_term: bool,
}

impl Default for R2Options {
    fn default() -> Self {
        Self {
            rtol_r2: RTOL_R2,
            stress_term: false,
        }
    }
}

/// Relative energy between a coarse trajectory and a reference, with every
/// term of the relative energy inequality in its Gronwall form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelativeEnergyReport {
    pub source: String,
    pub n_coarse: usize,
    /// Quadrature resolution.
    pub n_eval: usize,
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    /// `int F(Dv) + F*(S) - S:DU - S_U:(Dv - DU)`, nonnegative by convexity.
    pub dissipation_gap_term: Vec<f64>,
    /// `-int ((v - U).grad U).(v - U)`
    pub convective_term: Vec<f64>,
    /// `int F(Dv) - S_U:(Dv - DU) - F(DU)`
    pub conv_block: Vec<f64>,
    pub gronwall_rate: Vec<f64>,
    pub gronwall_envelope: Vec<f64>,
    /// `E(0) + int convective - E(t) - int dissipation_gap`.
    pub slack_r2: Vec<f64>,
    pub kinetic0: f64,
    pub options: R2Options,
    pub sup_energy: f64,
    pub slack_ok: bool,
    pub envelope_ok: bool,
    pub conv_block_ok: bool,
    pub bound_ok: bool,
}

impl RelativeEnergyReport {
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{RELATIVE_CSV_HEADER}")?;
        for i in 0..self.times.len() {
            writeln!(
                w,
                "{:e},{:e},{:e},{:e},{:e}",
                self.times[i],
                self.energy[i],
                self.gronwall_envelope[i],
                self.slack_r2[i],
                self.conv_block[i]
            )?;
        }
        Ok(())
    }

    /// First recorded time with negative slack beyond tolerance.
    pub fn first_violation(&self) -> Option<f64> {
        self.times
            .iter()
            .zip(&self.slack_r2)
            .find(|(_, s)| **s < -self.options.rtol_r2)
            .map(|(t, _)| *t)
    }
}

struct TimeSample {
    energy: f64,
    gap: f64,
    convective: f64,
    conv_block: f64,
    conv_scale: f64,
    rate: f64,
}

fn sample(
    model: &RheologyModel,
    v: &SpectralVelocity,
    u: &SpectralVelocity,
    defect: Option<&DefectEstimate>,
    stress_term: bool,
) -> TimeSample {
    let grid = &v.grid;
    let d = grid.dim();
    let dv = sym_gradient(v);
    let du = sym_gradient(u);
    let grad_u = velocity_gradient(u);
    let w = v.axpy(-1.0, u).to_physical();
    let per_node: Vec<[f64; 5]> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let (a, b) = (dv.at(i), du.at(i));
            let s = model.stress_unchecked(&a);
            let su = model.stress_unchecked(&b);
            let (fa, fb) = (model.f_unchecked(&a), model.f_unchecked(&b));
            let diff = a - b;
            let su_diff = su.contract(&diff);
            let gap = fa + model.f_star_unchecked(&s) - s.contract(&b) - su_diff;
            let block = fa - su_diff - fb;
            let mut q = 0.0;
            let mut g2 = 0.0;
            for r in 0..d {
                for c in 0..d {
                    let gu = grad_u[r * d + c][i];
                    q -= w[r][i] * w[c][i] * gu;
                    g2 += gu * gu;
                }
            }
            let mut rate = 2.0 * g2.sqrt();
            if stress_term {
                rate += model.tangent_modulus(&b);
            }
            [gap, q, block, fa.abs() + fb.abs() + su_diff.abs(), rate]
        })
        .collect();
    let h = grid.cell_volume();
    let sum = |k: usize| per_node.iter().map(|r| r[k]).sum::<f64>() * h;
    let rate = per_node.iter().map(|r| r[4]).fold(0.0, f64::max);
    let e = 0.5 * v.axpy(-1.0, u).l2_norm_sq() + 0.5 * defect.map_or(0.0, |x| x.trace_total);
    TimeSample {
        energy: e,
        gap: sum(0),
        convective: sum(1),
        conv_block: sum(2),
        conv_scale: sum(3),
        rate,
    }
}

fn evaluation_grid(coarse: &TorusGrid, reference: &ReferenceSolution) -> Result<TorusGrid> {
    let n = match reference.native_n() {
        Some(n) => n.max(coarse.n()),
        None => 2 * coarse.n(),
    };
    coarse.with_n(n)
}

/// Evaluates the relative energy inequality between `coarse` (states at
/// increasing record times) and `reference`. Violations are reported, not
/// raised; errors signal unusable input.
pub fn verify_r2(
    model: &RheologyModel,
    coarse: &[SpectralVelocity],
    reference: &ReferenceSolution,
    defects: Option<&[DefectEstimate]>,
    options: &R2Options,
) -> Result<RelativeEnergyReport> {
    let Some(first) = coarse.first() else {
        return Err(Error::Input("empty coarse trajectory".into()));
    };
    if coarse.windows(2).any(|w| w[1].time <= w[0].time) {
        return Err(Error::Input("coarse trajectory times must increase".into()));
    }
    if let Some(ds) = defects {
        if ds.len() != coarse.len() {
            return Err(Error::Input(format!(
                "{} defect estimates for {} states",
                ds.len(),
                coarse.len()
            )));
        }
    }
    let eval = evaluation_grid(&first.grid, reference)?;
    let mut samples = Vec::with_capacity(coarse.len());
    for (i, v) in coarse.iter().enumerate() {
        let defect = defects.map(|ds| &ds[i]);
        if let Some(dd) = defect {
            if !aligned(dd.time, v.time) {
                return Err(Error::Input(format!(
                    "defect at t = {} for a state at t = {}",
                    dd.time, v.time
                )));
            }
        }
        let ve = v.resample_to(&eval)?;
        let ue = reference.velocity_on(&eval, v.time)?;
        samples.push(sample(model, &ve, &ue, defect, options.stress_term));
    }
    let times: Vec<f64> = coarse.iter().map(|v| v.time).collect();
    let col = |f: fn(&TimeSample) -> f64| samples.iter().map(f).collect::<Vec<f64>>();
    let energy = col(|s| s.energy);
    let gap = col(|s| s.gap);
    let convective = col(|s| s.convective);
    let conv_block = col(|s| s.conv_block);
    let rate = col(|s| s.rate);
    let int_gap = cumulative_quadratic(&times, &gap);
    let int_conv = cumulative_quadratic(&times, &convective);
    let int_rate = cumulative_trapezoid(&times, &rate);
    let kinetic0 = first.kinetic_energy();
    let e0 = energy[0];
    let slack: Vec<f64> = (0..times.len())
        .map(|i| e0 + int_conv[i] - energy[i] - int_gap[i])
        .collect();
    let envelope: Vec<f64> = int_rate
        .iter()
        .map(|r| (e0 + options.rtol_r2 * kinetic0) * r.exp())
        .collect();
    let slack_ok = slack.iter().all(|s| *s >= -options.rtol_r2);
    let envelope_ok = energy.iter().zip(&envelope).all(|(e, b)| e <= b);
    let conv_block_ok = samples
        .iter()
        .all(|s| s.conv_block >= -1e-8 * (1.0 + s.conv_scale));
    Ok(RelativeEnergyReport {
        source: reference.source().to_string(),
        n_coarse: first.grid.n(),
        n_eval: eval.n(),
        sup_energy: energy.iter().copied().fold(0.0, f64::max),
        times,
        energy,
        dissipation_gap_term: gap,
        convective_term: convective,
        conv_block,
        gronwall_rate: rate,
        gronwall_envelope: envelope,
        slack_r2: slack,
        kinetic0,
        options: *options,
        slack_ok,
        envelope_ok,
        conv_block_ok,
        bound_ok: slack_ok && envelope_ok && conv_block_ok,
    })
}
