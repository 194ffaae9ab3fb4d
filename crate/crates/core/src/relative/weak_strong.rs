use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::energy::{verify_r2, R2Options, RelativeEnergyReport};
use super::reference::{FineRun, ManufacturedFlow, ReferenceSolution};
use crate::certificates::{estimate_tail_defect, regularity_diagnostic, EnergyLedger, RegularityVerdict, REG_TOL};
use crate::error::{Error, Result};
use crate::rheology::{RheologyModel, RheologyParams};
use crate::spectral::{march, Forcing, InitialData, SpectralVelocity, Stepper, TimeStepRule, TorusGrid};

/// Default coarse resolutions and reference resolution.
pub const DEFAULT_COARSE_N: [usize; 3] = [16, 32, 64];
pub const DEFAULT_REFERENCE_N: usize = 128;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReferenceKind {
    FineRun,
    /// Forced vortex with amplitude `A exp(-decay t)`; the initial data is
    /// replaced by the vortex at `t = 0`.
    Manufactured { amplitude: f64, decay: Option<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakStrongConfig {
    pub rheology: RheologyParams,
    pub dim: usize,
    pub dealias_fraction: f64,
    pub coarse_n: Vec<usize>,
    pub reference_n: usize,
    pub reference: ReferenceKind,
    pub initial: InitialData,
    /// Seed the reference run was started from; must equal the initial seed.
    pub reference_seed: Option<u64>,
    pub t_final: f64,
    pub dt: TimeStepRule,
    pub record_stride: usize,
    pub newtonian_floor: f64,
    pub r2: R2Options,
    pub wallclock_cap: Option<Duration>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub sup_energy: f64,
    /// `sup_energy(N) / sup_energy(next N)`.
    pub ratio_to_next: Option<f64>,
    pub envelope_ok: bool,
    pub bound_ok: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeakStrongOutcome {
    pub reports: Vec<RelativeEnergyReport>,
    pub table: Vec<ConvergenceRow>,
    pub monotone: bool,
    pub min_ratio: Option<f64>,
    pub verdict: String,
    /// The wall-clock cap stopped the experiment early.
    pub partial: bool,
    pub seeds: Vec<u64>,
    pub dt_min: Option<f64>,
    pub steps: usize,
    pub reference_regularity: Option<RegularityVerdict>,
    pub wallclock: f64,
}

impl WeakStrongOutcome {
    pub fn consistent(&self) -> bool {
        self.verdict == "weak-strong-consistent"
    }

    pub fn summary_json(&self) -> serde_json::Value {
        let sup: BTreeMap<String, f64> = self
            .table
            .iter()
            .map(|r| (r.n.to_string(), r.sup_energy))
            .collect();
        serde_json::json!({
            "sup_E_by_N": sup,
            "verdict": self.verdict,
            "seeds": self.seeds,
            "wallclock": self.wallclock,
            "partial": self.partial,
            "monotone": self.monotone,
            "min_ratio": self.min_ratio,
            "steps": self.steps,
            "dt_min": self.dt_min,
        })
    }
}

fn convergence_table(reports: &[RelativeEnergyReport]) -> Vec<ConvergenceRow> {
    reports
        .iter()
        .enumerate()
        .map(|(i, r)| ConvergenceRow {
            n: r.n_coarse,
            sup_energy: r.sup_energy,
            ratio_to_next: reports.get(i + 1).map(|next| r.sup_energy / next.sup_energy),
            envelope_ok: r.envelope_ok,
            bound_ok: r.bound_ok,
        })
        .collect()
}

struct Timer {
    start: Instant,
    cap: Option<Duration>,
}

impl Timer {
    fn expired(&self) -> bool {
        self.cap.is_some_and(|c| self.start.elapsed() > c)
    }
}

/// Runs one resolution and keeps every observed state.
fn run_recorded(
    model: &RheologyModel,
    force: Option<&dyn Forcing>,
    config: &WeakStrongConfig,
    v0: SpectralVelocity,
    rule: &TimeStepRule,
    timer: &Timer,
    mut on_state: impl FnMut(&SpectralVelocity, &crate::spectral::Observation) -> Result<()>,
) -> Result<(Vec<SpectralVelocity>, Vec<f64>, bool)> {
    let stepper = Stepper::new(model, force, config.newtonian_floor)?;
    let mut states = Vec::new();
    let out = march(&stepper, v0, config.t_final, rule, config.record_stride, |o| {
        on_state(o.state, &o)?;
        states.push(o.state.clone());
        Ok(!timer.expired())
    })?;
    if let Some(e) = out.failure {
        return Err(e);
    }
    Ok((states, out.dts, out.interrupted))
}

fn validate(config: &WeakStrongConfig) -> Result<()> {
    if config.coarse_n.is_empty() {
        return Err(Error::Configuration("experiment.coarse_N must list at least one resolution".into()));
    }
    if config.coarse_n.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Configuration("experiment.coarse_N must increase".into()));
    }
    if let ReferenceKind::FineRun = config.reference {
        let finest = *config.coarse_n.last().expect("non-empty");
        if config.reference_n < finest {
            return Err(Error::Configuration(format!(
                "reference resolution {} is coarser than N = {finest}",
                config.reference_n
            )));
        }
    }
    if matches!(config.dt, TimeStepRule::Schedule(_)) {
        return Err(Error::Configuration("weak-strong runs choose their own step schedule".into()));
    }
    if let (Some(a), Some(b)) = (config.initial.seed(), config.reference_seed) {
        if a != b {
            return Err(Error::Configuration(format!(
                "coarse runs start from seed {a} but the reference from seed {b}; \
                 both must start from the same data"
            )));
        }
    }
    if config.reference_seed.is_some() && config.initial.seed().is_none() {
        return Err(Error::Configuration(
            "a reference seed was given but the initial data is not seeded".into(),
        ));
    }
    Ok(())
}

/// Coarse runs at each `coarse_n` against a reference, with the relative
/// energy inequality evaluated at every recorded time. All runs share the
/// step sequence of the schedule-setting run (the reference, or the finest
/// coarse run for manufactured references).
pub fn weak_strong_experiment(config: &WeakStrongConfig) -> Result<WeakStrongOutcome> {
    validate(config)?;
    let timer = Timer {
        start: Instant::now(),
        cap: config.wallclock_cap,
    };
    let model = RheologyModel::new(config.rheology.clone())?;
    let grid_for = |n: usize| TorusGrid::new(config.dim, n, config.dealias_fraction);
    let mut partial = false;
    let mut regularity = None;

    let (reference, schedule, steps) = match &config.reference {
        ReferenceKind::FineRun => {
            let grid = grid_for(config.reference_n)?;
            let v0 = config.initial.build(&grid)?;
            let mut ledger = EnergyLedger::new();
            let mut defects = Vec::new();
            let coarse_n = config.reference_n / 2;
            let (states, dts, interrupted) = run_recorded(
                &model,
                None,
                config,
                v0,
                &config.dt,
                &timer,
                |s, o| {
                    ledger.record(s.time, s.kinetic_energy(), &o.diag.rates, Some(&o.increments))?;
                    defects.push(estimate_tail_defect(s, coarse_n)?);
                    Ok(())
                },
            )?;
            partial |= interrupted;
            regularity = Some(regularity_diagnostic(&ledger, &defects, REG_TOL));
            let steps = dts.len();
            (ReferenceSolution::FineRun(FineRun::new(states)?), dts, steps)
        }
        ReferenceKind::Manufactured { amplitude, decay } => {
            let decay = decay.unwrap_or(model.newtonian_floor() * std::f64::consts::PI.powi(2));
            let flow = ManufacturedFlow::new(model.clone(), *amplitude, decay)?;
            let finest = *config.coarse_n.last().expect("validated");
            let grid = grid_for(finest)?;
            let stepper = Stepper::new(&model, Some(&flow), config.newtonian_floor)?;
            let out = march(&stepper, flow.velocity(&grid, 0.0)?, config.t_final, &config.dt, 1, |_| {
                Ok(!timer.expired())
            })?;
            if let Some(e) = out.failure {
                return Err(e);
            }
            partial |= out.interrupted;
            let steps = out.dts.len();
            (ReferenceSolution::Manufactured(flow), out.dts, steps)
        }
    };

    let mut reports = Vec::new();
    if !partial {
        let rule = TimeStepRule::Schedule(schedule.clone());
        for &n in &config.coarse_n {
            let grid = grid_for(n)?;
            let v0 = match &reference {
                ReferenceSolution::Manufactured(m) => m.velocity(&grid, 0.0)?,
                ReferenceSolution::FineRun(_) => config.initial.build(&grid)?,
            };
            let (states, _, interrupted) =
                run_recorded(&model, reference.forcing(), config, v0, &rule, &timer, |_, _| Ok(()))?;
            if interrupted {
                partial = true;
                break;
            }
            reports.push(verify_r2(&model, &states, &reference, None, &config.r2)?);
        }
    }

    let table = convergence_table(&reports);
    let monotone = table.windows(2).all(|w| w[1].sup_energy < w[0].sup_energy);
    let min_ratio = table
        .iter()
        .filter_map(|r| r.ratio_to_next)
        .reduce(f64::min);
    let envelopes = table.iter().all(|r| r.envelope_ok);
    let verdict = if partial {
        "partial"
    } else if monotone && envelopes {
        "weak-strong-consistent"
    } else {
        "weak-strong-violation"
    };
    Ok(WeakStrongOutcome {
        reports,
        table,
        monotone,
        min_ratio,
        verdict: verdict.to_string(),
        partial,
        seeds: config.initial.seed().into_iter().collect(),
        dt_min: schedule.iter().copied().reduce(f64::min),
        steps,
        reference_regularity: regularity,
        wallclock: timer.start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tg_config() -> WeakStrongConfig {
        WeakStrongConfig {
            rheology: RheologyParams {
                mu: 0.05,
                ..RheologyParams::default()
            },
            dim: 2,
            dealias_fraction: 2.0 / 3.0,
            coarse_n: vec![8, 16],
            reference_n: 32,
            reference: ReferenceKind::Manufactured {
                amplitude: 1.0,
                decay: None,
            },
            initial: InitialData::TaylorGreen { amplitude: 1.0 },
            reference_seed: None,
            t_final: 0.05,
            dt: TimeStepRule::Fixed(1e-3),
            record_stride: 5,
            newtonian_floor: 0.05,
            r2: R2Options::default(),
            wallclock_cap: None,
        }
    }

    #[test]
    fn newtonian_vortex_is_resolved_on_every_grid() {
        let out = weak_strong_experiment(&tg_config()).unwrap();
        assert_eq!(out.table.len(), 2);
        for r in &out.reports {
            assert!(r.sup_energy <= 1e-10, "{}", r.sup_energy);
            assert!(r.bound_ok);
        }
    }

    #[test]
    fn mismatched_seeds_refused() {
        let mut c = tg_config();
        c.reference = ReferenceKind::FineRun;
        c.initial = InitialData::SeededRandomSmooth {
            seed: 1,
            spectral_decay: 4.0,
            max_mode: 3,
            energy: 0.1,
        };
        c.reference_seed = Some(2);
        assert!(matches!(weak_strong_experiment(&c), Err(Error::Configuration(_))));
    }

    #[test]
    fn single_resolution_gives_one_row() {
        let mut c = tg_config();
        c.coarse_n = vec![16];
        let out = weak_strong_experiment(&c).unwrap();
        assert_eq!(out.table.len(), 1);
        assert_eq!(out.table[0].ratio_to_next, None);
    }

    #[test]
    fn identical_resolution_has_zero_energy() {
        let mut c = tg_config();
        c.reference = ReferenceKind::FineRun;
        c.rheology = RheologyParams {
            kind: crate::rheology::RheologyKind::PowerLaw,
            mu1: 0.01,
            mu2: 0.01,
            p: 2.5,
            ..RheologyParams::default()
        };
        c.newtonian_floor = 0.0;
        c.initial = InitialData::SeededRandomSmooth {
            seed: 5,
            spectral_decay: 4.0,
            max_mode: 3,
            energy: 0.05,
        };
        c.coarse_n = vec![16];
        c.reference_n = 16;
        let out = weak_strong_experiment(&c).unwrap();
        assert!(out.reports[0].energy.iter().all(|e| *e == 0.0));
        assert!(out.reference_regularity.is_some());
    }
}
