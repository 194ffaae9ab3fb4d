//! Energy ledgers, weak-form residuals, Reynolds-defect estimates and the
//! conditional-regularity diagnostic.

mod defect;
mod ledger;
mod regularity;
mod weak;

pub use defect::{estimate_defect, estimate_tail_defect, estimate_two_grid_defect, DefectEstimate};
pub use ledger::{
    budget_rates, record_ledger, CertificateReport, EnergyLedger, LedgerRecord, CERT_TOL_REL,
    LEDGER_CSV_HEADER,
};
pub use regularity::{regularity_diagnostic, RegularityVerdict, REG_TOL};
pub use weak::{weak_residuals, WeakFormResidual, DEFAULT_TEST_CUTOFF};
