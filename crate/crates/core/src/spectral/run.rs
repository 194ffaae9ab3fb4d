use serde::{Deserialize, Serialize};

use super::field::SpectralVelocity;
use super::step::{BudgetRates, StateDiagnostics, Stepper};
use crate::error::{Error, Result};

/// Fraction of the stability bound used by automatic time steps.
pub const AUTO_DT_SAFETY: f64 = 0.5;
/// Automatic time steps re-evaluate the stability bound this often.
pub const AUTO_DT_RECHECK: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TimeStepRule {
    Fixed(f64),
    /// `AUTO_DT_SAFETY * cfl`, refreshed every `AUTO_DT_RECHECK` steps.
    Auto,
    /// Replays an explicit step sequence (e.g. one produced by an earlier run).
    Schedule(Vec<f64>),
}

/// A state handed to the observer together with the budget integrals
/// accumulated since the previous observation.
pub struct Observation<'a> {
    pub step: usize,
    pub state: &'a SpectralVelocity,
    pub diag: &'a StateDiagnostics,
    pub increments: BudgetRates,
}

#[derive(Debug)]
pub struct Marched {
    /// Last state that passed every check.
    pub state: SpectralVelocity,
    pub steps: usize,
    pub dts: Vec<f64>,
    /// Error that stopped the run early, if any.
    pub failure: Option<Error>,
    /// The observer asked to stop before `t_final`.
    pub interrupted: bool,
}

impl Marched {
    pub fn min_dt(&self) -> Option<f64> {
        self.dts.iter().copied().reduce(f64::min)
    }

    pub fn completed(&self) -> bool {
        self.failure.is_none() && !self.interrupted
    }
}

/// Advances `v0` to `t_final`, observing the initial state, every
/// `record_stride`-th state and the final state. The observer returns
/// `false` to stop the run.
pub fn march<F>(
    stepper: &Stepper,
    v0: SpectralVelocity,
    t_final: f64,
    rule: &TimeStepRule,
    record_stride: usize,
    mut observe: F,
) -> Result<Marched>
where
    F: FnMut(Observation) -> Result<bool>,
{
    if !(t_final.is_finite() && t_final >= v0.time) {
        return Err(Error::Configuration(format!(
            "final time {t_final} precedes the initial time {}",
            v0.time
        )));
    }
    if record_stride == 0 {
        return Err(Error::Configuration("record stride must be >= 1".into()));
    }
    match rule {
        TimeStepRule::Fixed(dt) if !(*dt > 0.0 && dt.is_finite()) => {
            return Err(Error::Configuration(format!("time step must be positive, got {dt}")));
        }
        TimeStepRule::Schedule(s) if s.iter().any(|dt| !(*dt > 0.0)) => {
            return Err(Error::Configuration("scheduled time steps must be positive".into()));
        }
        _ => {}
    }
    let t0 = v0.time;
    let mut v = v0;
    let mut dts = Vec::new();
    let mut acc = BudgetRates::default();
    let mut auto_dt = f64::NAN;
    let mut n = 0usize;
    let fail = |state: SpectralVelocity, dts: Vec<f64>, e: Error| Marched {
        state,
        steps: dts.len(),
        dts,
        failure: Some(e),
        interrupted: false,
    };
    loop {
        let remaining = t_final - v.time;
        let scheduled = match rule {
            TimeStepRule::Schedule(s) => s.get(n).copied(),
            _ => None,
        };
        let done = match rule {
            TimeStepRule::Schedule(s) => n >= s.len(),
            _ => remaining <= 1e-12 * t_final.abs().max(1.0),
        };
        if done {
            let diag = match stepper.diagnose(&v) {
                Ok(d) => d,
                Err(e) => return Ok(fail(v, dts, e)),
            };
            observe(Observation {
                step: n,
                state: &v,
                diag: &diag,
                increments: acc,
            })?;
            return Ok(Marched {
                state: v,
                steps: n,
                dts,
                failure: None,
                interrupted: false,
            });
        }
        let dt = match rule {
            TimeStepRule::Fixed(dt) => {
                // land on multiples of dt from t0 to keep record times aligned across runs
                let next = t0 + (n + 1) as f64 * dt;
                if next >= t_final - 1e-12 * dt {
                    t_final - v.time
                } else {
                    next - v.time
                }
            }
            TimeStepRule::Auto => {
                if n.is_multiple_of(AUTO_DT_RECHECK) || !auto_dt.is_finite() {
                    match stepper.diagnose(&v) {
                        Ok(d) => auto_dt = AUTO_DT_SAFETY * d.cfl,
                        Err(e) => return Ok(fail(v, dts, e)),
                    }
                }
                if auto_dt.is_finite() {
                    auto_dt.min(remaining)
                } else {
                    remaining
                }
            }
            TimeStepRule::Schedule(_) => scheduled.expect("checked above"),
        };
        let report = match stepper.step(&v, dt) {
            Ok(r) => r,
            Err(e) => return Ok(fail(v, dts, e)),
        };
        if n.is_multiple_of(record_stride) {
            let keep = observe(Observation {
                step: n,
                state: &v,
                diag: &report.start,
                increments: acc,
            })?;
            acc = BudgetRates::default();
            if !keep {
                return Ok(Marched {
                    state: v,
                    steps: n,
                    dts,
                    failure: None,
                    interrupted: true,
                });
            }
        }
        acc.diss_f += report.increments.diss_f;
        acc.diss_fstar += report.increments.diss_fstar;
        acc.diss_sd += report.increments.diss_sd;
        acc.work += report.increments.work;
        dts.push(dt);
        v = report.state;
        n += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rheology::RheologyModel;
    use crate::spectral::{taylor_green, TorusGrid};

    #[test]
    fn fixed_steps_land_on_final_time() {
        let g = TorusGrid::new(2, 16, 2.0 / 3.0).unwrap();
        let m = RheologyModel::newtonian(0.1).unwrap();
        let s = Stepper::new(&m, None, 0.1).unwrap();
        let mut seen = Vec::new();
        let out = march(&s, taylor_green(&g, 1.0).unwrap(), 0.1, &TimeStepRule::Fixed(0.03), 2, |o| {
            seen.push((o.step, o.state.time));
            Ok(true)
        })
        .unwrap();
        assert!(out.completed());
        assert_eq!(out.steps, 4);
        assert!((out.state.time - 0.1).abs() < 1e-15);
        assert_eq!(seen.iter().map(|s| s.0).collect::<Vec<_>>(), vec![0, 2, 4]);
        assert!((out.dts[3] - 0.01).abs() < 1e-12);
    }

    #[test]
    fn zero_horizon_observes_once() {
        let g = TorusGrid::new(2, 16, 2.0 / 3.0).unwrap();
        let m = RheologyModel::newtonian(0.1).unwrap();
        let s = Stepper::new(&m, None, 0.0).unwrap();
        let mut count = 0;
        let out = march(&s, taylor_green(&g, 1.0).unwrap(), 0.0, &TimeStepRule::Auto, 1, |o| {
            count += 1;
            assert_eq!(o.increments, BudgetRates::default());
            Ok(true)
        })
        .unwrap();
        assert_eq!((count, out.steps), (1, 0));
    }

    #[test]
    fn unstable_step_keeps_last_good_state() {
        let g = TorusGrid::new(2, 32, 2.0 / 3.0).unwrap();
        let m = RheologyModel::newtonian(1.0).unwrap();
        let s = Stepper::new(&m, None, 0.0).unwrap();
        let out = march(&s, taylor_green(&g, 1.0).unwrap(), 1.0, &TimeStepRule::Fixed(0.1), 1, |_| Ok(true))
            .unwrap();
        assert!(matches!(out.failure, Some(Error::Stability { .. })));
        assert_eq!(out.state.time, 0.0);
    }
}
