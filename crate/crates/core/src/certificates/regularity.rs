use serde::{Deserialize, Serialize};

use super::defect::DefectEstimate;
use super::ledger::EnergyLedger;

/// Default tolerance of the regularity diagnostic.
pub const REG_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityVerdict {
    /// Energy inequality saturated and defect negligible.
    pub strong_consistent: bool,
    /// Largest `|kinetic + cum(F + F*) - kinetic(0) - cum work|` and `|budget_residual|`.
    pub budget_gap: f64,
    /// Largest `trace_total` over the defect series.
    pub defect_trace: f64,
    pub reg_tol: f64,
}

impl RegularityVerdict {
    pub fn label(&self) -> &'static str {
        if self.strong_consistent {
            "strong-consistent"
        } else {
            "defect-or-budget-violation"
        }
    }
}

/// Checks that a completed run saturates the energy inequality and carries
/// no measurable defect.
pub fn regularity_diagnostic(
    ledger: &EnergyLedger,
    defects: &[DefectEstimate],
    reg_tol: f64,
) -> RegularityVerdict {
    let ke0 = ledger.initial_kinetic();
    let budget_gap = ledger
        .records
        .iter()
        .map(|r| {
            let slack = r.kinetic + r.cum_diss() - ke0 - r.cum_work;
            slack.abs().max(r.budget_residual.abs())
        })
        .fold(0.0, f64::max);
    let defect_trace = defects
        .iter()
        .map(|d| d.trace_total.abs())
        .fold(0.0, f64::max);
    RegularityVerdict {
        strong_consistent: budget_gap <= reg_tol && defect_trace <= reg_tol,
        budget_gap,
        defect_trace,
        reg_tol,
    }
}
