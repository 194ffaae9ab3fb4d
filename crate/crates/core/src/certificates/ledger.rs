use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rheology::RheologyModel;
use crate::spectral::{sym_gradient, BudgetRates, Forcing, SpectralVelocity, SymTensorField};

/// Energy-inequality tolerance relative to the initial kinetic energy.
pub const CERT_TOL_REL: f64 = 1e-6;

pub const LEDGER_CSV_HEADER: &str = "time,kinetic,diss_F,diss_Fstar,diss_SD,gap,cum_diss,budget_residual";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LedgerRecord {
    pub time: f64,
    pub kinetic: f64,
    pub diss_f: f64,
    pub diss_fstar: f64,
    pub diss_sd: f64,
    pub gap: f64,
    pub cum_diss_f: f64,
    pub cum_diss_fstar: f64,
    pub cum_diss_sd: f64,
    pub cum_work: f64,
    /// `kinetic(t) + cum_diss_sd - kinetic(0) - cum_work`
    pub budget_residual: f64,
}

impl LedgerRecord {
    /// `cum(diss_F + diss_Fstar)`
    pub fn cum_diss(&self) -> f64 {
        self.cum_diss_f + self.cum_diss_fstar
    }
}

/// Time series of the energy budget with its Fenchel-Young split.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub records: Vec<LedgerRecord>,
    last_rates: Option<BudgetRates>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    /// `gap >= -1e-10 (1 + diss_F + diss_Fstar)` at every record.
    pub gap_ok: bool,
    /// `kinetic + cum(F + F*) <= kinetic(0) + cum work + cert_tol` at every record.
    pub certificate_ok: bool,
    /// `cum(F + F*)` nondecreasing.
    pub monotone_ok: bool,
    pub min_gap: f64,
    /// Largest `kinetic + cum(F + F*) - kinetic(0) - cum work`.
    pub max_excess: f64,
    pub cert_tol: f64,
    pub max_abs_budget_residual: f64,
}

impl CertificateReport {
    pub fn passed(&self) -> bool {
        self.gap_ok && self.certificate_ok && self.monotone_ok
    }
}

impl EnergyLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn initial_kinetic(&self) -> f64 {
        self.records.first().map_or(0.0, |r| r.kinetic)
    }

    pub fn last(&self) -> Option<&LedgerRecord> {
        self.records.last()
    }

    /// Appends a record from instantaneous rates. `increments` carries the
    /// time integrals of the rates since the previous record (e.g. RK4
    /// stage quadrature); without it the trapezoid rule on records is used.
    pub fn record(
        &mut self,
        time: f64,
        kinetic: f64,
        rates: &BudgetRates,
        increments: Option<&BudgetRates>,
    ) -> Result<&LedgerRecord> {
        if !(time.is_finite() && kinetic.is_finite()) {
            return Err(Error::NonFinite { time });
        }
        let rec = match self.records.last() {
            None => LedgerRecord {
                time,
                kinetic,
                diss_f: rates.diss_f,
                diss_fstar: rates.diss_fstar,
                diss_sd: rates.diss_sd,
                gap: rates.gap(),
                cum_diss_f: 0.0,
                cum_diss_fstar: 0.0,
                cum_diss_sd: 0.0,
                cum_work: 0.0,
                budget_residual: 0.0,
            },
            Some(prev) => {
                if time < prev.time {
                    return Err(Error::Sequencing {
                        last: prev.time,
                        got: time,
                    });
                }
                let inc = match increments {
                    Some(inc) => *inc,
                    None => {
                        let last = self.last_rates.unwrap_or_default();
                        let h = 0.5 * (time - prev.time);
                        BudgetRates {
                            diss_f: h * (last.diss_f + rates.diss_f),
                            diss_fstar: h * (last.diss_fstar + rates.diss_fstar),
                            diss_sd: h * (last.diss_sd + rates.diss_sd),
                            work: h * (last.work + rates.work),
                        }
                    }
                };
                let cum_diss_sd = prev.cum_diss_sd + inc.diss_sd;
                let cum_work = prev.cum_work + inc.work;
                LedgerRecord {
                    time,
                    kinetic,
                    diss_f: rates.diss_f,
                    diss_fstar: rates.diss_fstar,
                    diss_sd: rates.diss_sd,
                    gap: rates.gap(),
                    cum_diss_f: prev.cum_diss_f + inc.diss_f,
                    cum_diss_fstar: prev.cum_diss_fstar + inc.diss_fstar,
                    cum_diss_sd,
                    cum_work,
                    budget_residual: kinetic + cum_diss_sd - self.records[0].kinetic - cum_work,
                }
            }
        };
        self.last_rates = Some(*rates);
        self.records.push(rec);
        Ok(self.records.last().expect("just pushed"))
    }

    /// Checks the discrete energy inequality and the Fenchel-Young gaps.
    pub fn certificate(&self) -> CertificateReport {
        let ke0 = self.initial_kinetic();
        let cert_tol = CERT_TOL_REL * ke0;
        let mut gap_ok = true;
        let mut min_gap = f64::INFINITY;
        let mut max_excess = f64::NEG_INFINITY;
        let mut monotone_ok = true;
        let mut max_res: f64 = 0.0;
        let mut prev_cum = f64::NEG_INFINITY;
        for r in &self.records {
            min_gap = min_gap.min(r.gap);
            if r.gap < -1e-10 * (1.0 + r.diss_f + r.diss_fstar) {
                gap_ok = false;
            }
            let excess = r.kinetic + r.cum_diss() - ke0 - r.cum_work;
            max_excess = max_excess.max(excess);
            let cum = r.cum_diss();
            if cum < prev_cum - 1e-14 * prev_cum.abs() {
                monotone_ok = false;
            }
            prev_cum = cum;
            max_res = max_res.max(r.budget_residual.abs());
        }
        if self.records.is_empty() {
            min_gap = 0.0;
            max_excess = 0.0;
        }
        CertificateReport {
            gap_ok,
            certificate_ok: max_excess <= cert_tol,
            monotone_ok,
            min_gap,
            max_excess,
            cert_tol,
            max_abs_budget_residual: max_res,
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{LEDGER_CSV_HEADER}")?;
        for r in &self.records {
            writeln!(
                w,
                "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                r.time,
                r.kinetic,
                r.diss_f,
                r.diss_fstar,
                r.diss_sd,
                r.gap,
                r.cum_diss(),
                r.budget_residual
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii output")
    }
}

/// Budget rates of the pair `(v, S)`: `int F(Dv)`, `int F*(S)`, `int S:Dv`, `int f.v`.
pub fn budget_rates(
    model: &RheologyModel,
    v: &SpectralVelocity,
    stress: &SymTensorField,
    force: Option<&dyn Forcing>,
) -> Result<BudgetRates> {
    if stress.grid != v.grid {
        return Err(Error::Input("stress and velocity live on different grids".into()));
    }
    let strain = sym_gradient(v);
    let mut work = 0.0;
    if let Some(f) = force {
        if let Some(fc) = f.spectral(&v.grid, v.time)? {
            let fv = SpectralVelocity {
                grid: v.grid.clone(),
                coeffs: fc,
                time: v.time,
            };
            work = crate::spectral::project(&fv).inner(v);
        }
    }
    Ok(BudgetRates {
        diss_f: strain.integrate(|d| model.f_unchecked(d)),
        diss_fstar: stress.integrate(|s| model.f_star_unchecked(s)),
        diss_sd: stress.contract_integral(&strain),
        work,
    })
}

/// Appends `(v, S)` to the ledger with trapezoid time integration.
pub fn record_ledger(
    ledger: &mut EnergyLedger,
    model: &RheologyModel,
    v: &SpectralVelocity,
    stress: &SymTensorField,
    force: Option<&dyn Forcing>,
) -> Result<()> {
    let rates = budget_rates(model, v, stress, force)?;
    ledger.record(v.time, v.kinetic_energy(), &rates, None)?;
    Ok(())
}
