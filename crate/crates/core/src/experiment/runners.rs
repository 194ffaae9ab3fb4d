use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ForceConfig, FORMAT_VERSION};
use crate::certificates::{
    estimate_tail_defect, regularity_diagnostic, weak_residuals, CertificateReport, DefectEstimate, EnergyLedger,
    RegularityVerdict, WeakFormResidual,
};
use crate::error::{Error, Result};
use crate::relative::{relative_energy, weak_strong_experiment, ManufacturedFlow, WeakStrongOutcome};
use crate::rheology::{validate_hypotheses_seeded, HypothesisReport, RheologyModel, SymTensor};
use crate::spectral::{
    march, taylor_green, write_snapshot, Forcing, SpectralVelocity, Stepper, TimeStepRule, TorusGrid,
};

/// Fixes the worker count of the global pool. Results are reproducible for a
/// fixed count, which is echoed into every output directory.
pub fn configure_threads(threads: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Configuration(format!("cannot size the worker pool: {e}")))
}

/// Output directory of one command, created with the resolved config echo.
pub struct OutputDir {
    pub path: PathBuf,
    formats: Vec<String>,
}

impl OutputDir {
    pub fn create(path: &Path, cfg: &ExperimentConfig, command: &str, extra: &[(String, String)]) -> Result<Self> {
        fs::create_dir_all(path)?;
        let mut meta = vec![
            ("meta.format_version".to_string(), FORMAT_VERSION.to_string()),
            ("meta.command".to_string(), command.to_string()),
            ("meta.threads".to_string(), rayon::current_num_threads().to_string()),
        ];
        meta.extend_from_slice(extra);
        fs::write(path.join("config.resolved.cfg"), cfg.to_text(&meta))?;
        Ok(Self {
            path: path.to_path_buf(),
            formats: cfg.output.formats.clone(),
        })
    }

    fn wants(&self, format: &str) -> bool {
        self.formats.iter().any(|f| f == format)
    }

    fn writer(&self, name: &str) -> Result<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.path.join(name))?))
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        if self.wants("json") {
            let mut w = self.writer(name)?;
            serde_json::to_writer_pretty(&mut w, value)?;
            writeln!(w)?;
            w.flush()?;
        }
        Ok(())
    }
}

fn model_for(cfg: &ExperimentConfig) -> Result<RheologyModel> {
    let mut params = cfg.rheology.clone();
    params.dim = cfg.grid.dim;
    RheologyModel::new(params)
}

fn newtonian_floor(cfg: &ExperimentConfig, model: &RheologyModel) -> f64 {
    cfg.time.newtonian_floor.unwrap_or_else(|| model.newtonian_floor())
}

fn manufactured(cfg: &ExperimentConfig, model: &RheologyModel) -> Result<Option<ManufacturedFlow>> {
    match &cfg.force {
        ForceConfig::None => Ok(None),
        ForceConfig::Manufactured { amplitude, decay } => {
            let decay = decay.unwrap_or(model.newtonian_floor() * std::f64::consts::PI.powi(2));
            ManufacturedFlow::new(model.clone(), *amplitude, decay).map(Some)
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimulateSummary {
    pub format_version: u32,
    pub steps: usize,
    pub final_time: f64,
    pub dt_min: Option<f64>,
    pub dt_max: Option<f64>,
    pub newtonian_floor: f64,
    pub min_gap: f64,
    pub max_gap: f64,
    pub certificate: CertificateReport,
    pub regularity: RegularityVerdict,
    pub defect_min_eigenvalue: f64,
    pub defect_psd: bool,
    pub weak_residual: Option<WeakFormResidual>,
    /// Relative L2 distance to the manufactured solution at the final time.
    pub manufactured_error: Option<f64>,
    pub failure: Option<String>,
    pub threads: usize,
    pub wallclock: f64,
    #[serde(skip)]
    pub ledger: EnergyLedger,
    #[serde(skip)]
    pub final_state: Option<SpectralVelocity>,
}

impl SimulateSummary {
    pub fn passed(&self) -> bool {
        self.failure.is_none() && self.certificate.passed() && self.defect_psd
    }
}

/// Steps the configured problem to `T_final`, writing the ledger, snapshots,
/// the final defect estimate and a summary.
pub fn run_simulate(cfg: &ExperimentConfig, out: &Path) -> Result<SimulateSummary> {
    let start = Instant::now();
    let model = model_for(cfg)?;
    let grid = TorusGrid::new(cfg.grid.dim, cfg.grid.n, cfg.grid.dealias_fraction)?;
    let v0 = cfg.initial.build(&grid)?;
    let flow = manufactured(cfg, &model)?;
    let force: Option<&dyn Forcing> = flow.as_ref().map(|f| f as &dyn Forcing);
    let mu0 = newtonian_floor(cfg, &model);
    let stepper = Stepper::new(&model, force, mu0)?;
    let rule = cfg.time.rule();
    let dt0 = match rule {
        TimeStepRule::Fixed(dt) => dt,
        _ => crate::spectral::AUTO_DT_SAFETY * stepper.diagnose(&v0)?.cfl,
    };
    let snap_stride = cfg.time.snapshot_stride;
    if snap_stride > 0 && !snap_stride.is_multiple_of(cfg.time.record_stride) {
        return Err(Error::Configuration(
            "time.snapshot_stride must be a multiple of time.record_stride".into(),
        ));
    }
    let coarse_n = cfg.experiment.defect_coarse_n.unwrap_or((grid.n() / 2).max(8));
    let dir = OutputDir::create(
        out,
        cfg,
        "simulate",
        &[
            ("meta.newtonian_floor".into(), format!("{mu0:?}")),
            ("meta.initial_dt".into(), format!("{dt0:?}")),
        ],
    )?;
    let snap_dir = dir.path.join("snapshots");
    if dir.wants("bin") {
        fs::create_dir_all(&snap_dir)?;
    }
    let snap_path = |step: usize| snap_dir.join(format!("step_{step:06}.bin"));

    let mut ledger = EnergyLedger::new();
    let mut defects: Vec<DefectEstimate> = Vec::new();
    let mut states = Vec::new();
    let keep_states = cfg.experiment.weak_residuals;
    let marched = march(&stepper, v0, cfg.time.t_final, &rule, cfg.time.record_stride, |o| {
        ledger.record(o.state.time, o.state.kinetic_energy(), &o.diag.rates, Some(&o.increments))?;
        defects.push(estimate_tail_defect(o.state, coarse_n)?);
        if dir.wants("bin") && (o.step == 0 || (snap_stride > 0 && o.step % snap_stride == 0)) {
            write_snapshot(&snap_path(o.step), o.state)?;
        }
        if keep_states {
            states.push(o.state.clone());
        }
        Ok(true)
    })?;
    if dir.wants("bin") {
        write_snapshot(&snap_path(marched.steps), &marched.state)?;
    }
    if dir.wants("csv") {
        ledger.write_csv(dir.writer("ledger.csv")?)?;
        if let Some(d) = defects.last() {
            d.write_csv(dir.writer("defect.csv")?)?;
        }
    }
    let weak_residual = if keep_states && states.len() >= 2 && marched.failure.is_none() {
        let cutoff = cfg.experiment.weak_cutoff;
        Some(weak_residuals(&model, &states, force, cutoff, None)?)
    } else {
        None
    };
    let manufactured_error = match &flow {
        Some(f) if marched.failure.is_none() => {
            let u = f.velocity(&grid, marched.state.time)?;
            let e = relative_energy(&marched.state, None, &u)?;
            Some((e / u.kinetic_energy()).sqrt())
        }
        _ => None,
    };
    let certificate = ledger.certificate();
    let (min_gap, max_gap) = ledger
        .records
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.gap), b.max(r.gap)));
    let defect_min_eigenvalue = defects.iter().map(|d| d.min_eigenvalue).fold(f64::INFINITY, f64::min);
    let summary = SimulateSummary {
        format_version: FORMAT_VERSION,
        steps: marched.steps,
        final_time: marched.state.time,
        dt_min: marched.min_dt(),
        dt_max: marched.dts.iter().copied().reduce(f64::max),
        newtonian_floor: mu0,
        min_gap,
        max_gap,
        regularity: regularity_diagnostic(&ledger, &defects, cfg.experiment.reg_tol),
        certificate,
        defect_min_eigenvalue,
        defect_psd: defects.iter().all(DefectEstimate::is_psd),
        weak_residual,
        manufactured_error,
        failure: marched.failure.as_ref().map(ToString::to_string),
        threads: rayon::current_num_threads(),
        wallclock: start.elapsed().as_secs_f64(),
        ledger,
        final_state: Some(marched.state),
    };
    dir.json("summary.json", &summary)?;
    match marched.failure {
        Some(e) => Err(e),
        None => Ok(summary),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConjugateRow {
    pub sigma: f64,
    pub f_star: f64,
    pub f_star_numeric: f64,
    pub rel_diff: f64,
}

pub const CONJUGATE_CSV_HEADER: &str = "sigma,F_star,F_star_numeric,rel_diff";

/// `F*` along a fixed deviatoric direction at log-spaced `|S|`, from the
/// model's own conjugate and from the numeric radial transform.
pub fn conjugate_table(model: &RheologyModel, dim: usize, min: f64, max: f64, points: usize) -> Result<Vec<ConjugateRow>> {
    let mut diag = vec![0.0; dim];
    diag[0] = std::f64::consts::FRAC_1_SQRT_2;
    diag[1] = -std::f64::consts::FRAC_1_SQRT_2;
    let dir = SymTensor::diag(&diag);
    let numeric = model.with_numeric_conjugate();
    (0..points)
        .map(|i| {
            let sigma = if points == 1 {
                min
            } else {
                min * (max / min).powf(i as f64 / (points - 1) as f64)
            };
            let s = dir.scale(sigma);
            let a = model.eval_f_star(&s)?;
            let b = numeric.eval_f_star(&s)?;
            let rel_diff = if a == b {
                0.0
            } else {
                (a - b).abs() / a.abs().max(b.abs())
            };
            Ok(ConjugateRow {
                sigma,
                f_star: a,
                f_star_numeric: b,
                rel_diff,
            })
        })
        .collect()
}

fn write_table(dir: &OutputDir, rows: &[ConjugateRow]) -> Result<()> {
    if dir.wants("csv") {
        let mut w = dir.writer("conjugate_table.csv")?;
        writeln!(w, "{CONJUGATE_CSV_HEADER}")?;
        for r in rows {
            writeln!(w, "{:e},{:e},{:e},{:e}", r.sigma, r.f_star, r.f_star_numeric, r.rel_diff)?;
        }
        w.flush()?;
    }
    Ok(())
}

fn table_for(cfg: &ExperimentConfig, model: &RheologyModel) -> Result<Vec<ConjugateRow>> {
    let e = &cfg.experiment;
    conjugate_table(model, cfg.grid.dim, e.table_min, e.table_max, e.table_points)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerifySummary {
    pub format_version: u32,
    pub report: HypothesisReport,
    pub table: Vec<ConjugateRow>,
}

impl VerifySummary {
    /// Fenchel-Young must hold for every model; the structural hypotheses
    /// are reported, not enforced.
    pub fn passed(&self) -> bool {
        self.report.verdict.fenchel_young
    }
}

pub fn run_verify_rheology(cfg: &ExperimentConfig, out: &Path) -> Result<VerifySummary> {
    let model = model_for(cfg)?;
    let dir = OutputDir::create(out, cfg, "verify-rheology", &[])?;
    let report = validate_hypotheses_seeded(&model, cfg.experiment.samples, cfg.experiment.hypothesis_seed)?;
    let table = table_for(cfg, &model)?;
    write_table(&dir, &table)?;
    let summary = VerifySummary {
        format_version: FORMAT_VERSION,
        report,
        table,
    };
    dir.json("hypotheses.json", &summary.report)?;
    Ok(summary)
}

pub fn run_conjugate_table(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<ConjugateRow>> {
    let model = model_for(cfg)?;
    let dir = OutputDir::create(out, cfg, "conjugate-table", &[])?;
    let table = table_for(cfg, &model)?;
    write_table(&dir, &table)?;
    Ok(table)
}

pub fn run_weak_strong(cfg: &ExperimentConfig, out: &Path) -> Result<WeakStrongOutcome> {
    let ws = cfg.weak_strong()?;
    let dir = OutputDir::create(
        out,
        cfg,
        "weak-strong",
        &[("meta.newtonian_floor".into(), format!("{:?}", ws.newtonian_floor))],
    )?;
    let outcome = weak_strong_experiment(&ws)?;
    if dir.wants("csv") {
        for r in &outcome.reports {
            r.write_csv(dir.writer(&format!("relative_energy_N{}.csv", r.n_coarse))?)?;
        }
        let mut w = dir.writer("convergence.csv")?;
        writeln!(w, "N,sup_E,ratio_to_next,envelope_ok,bound_ok")?;
        for row in &outcome.table {
            let ratio = row.ratio_to_next.map_or(String::new(), |r| format!("{r:e}"));
            writeln!(w, "{},{:e},{ratio},{},{}", row.n, row.sup_energy, row.envelope_ok, row.bound_ok)?;
        }
        w.flush()?;
    }
    let mut json = outcome.summary_json();
    json["format_version"] = FORMAT_VERSION.into();
    json["reference_regularity"] = serde_json::to_value(&outcome.reference_regularity)?;
    dir.json("summary.json", &json)?;
    Ok(outcome)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaylorGreenRow {
    pub mu: f64,
    pub kinetic0: f64,
    pub kinetic_final: f64,
    /// `KE(0) exp(-2 pi^2 mu T)`
    pub kinetic_exact: f64,
    pub rel_err: f64,
    pub certificate_ok: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TaylorGreenSummary {
    pub format_version: u32,
    pub n: usize,
    pub dt: f64,
    pub t_final: f64,
    pub tolerance: f64,
    pub rows: Vec<TaylorGreenRow>,
}

impl TaylorGreenSummary {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.rel_err <= self.tolerance && r.certificate_ok)
    }
}

/// Tolerance of the Taylor-Green kinetic energy regression.
pub const TAYLOR_GREEN_TOL: f64 = 1e-6;

/// Newtonian Taylor-Green decay for every viscosity in `experiment.mu_list`.
pub fn run_taylor_green(cfg: &ExperimentConfig, out: &Path) -> Result<TaylorGreenSummary> {
    if cfg.grid.dim != 2 {
        return Err(Error::Configuration("taylor-green runs are two-dimensional".into()));
    }
    let dt = cfg.time.dt.unwrap_or(1e-3);
    let amplitude = match cfg.initial {
        crate::spectral::InitialData::TaylorGreen { amplitude } => amplitude,
        _ => 1.0,
    };
    let dir = OutputDir::create(out, cfg, "taylor-green", &[])?;
    let grid = TorusGrid::new(2, cfg.grid.n, cfg.grid.dealias_fraction)?;
    let mut rows = Vec::new();
    for &mu in &cfg.experiment.mu_list {
        let model = RheologyModel::newtonian(mu)?;
        let stepper = Stepper::new(&model, None, mu)?;
        let mut ledger = EnergyLedger::new();
        let marched = march(
            &stepper,
            taylor_green(&grid, amplitude)?,
            cfg.time.t_final,
            &TimeStepRule::Fixed(dt),
            cfg.time.record_stride,
            |o| {
                ledger.record(o.state.time, o.state.kinetic_energy(), &o.diag.rates, Some(&o.increments))?;
                Ok(true)
            },
        )?;
        if let Some(e) = marched.failure {
            return Err(e);
        }
        if dir.wants("csv") {
            ledger.write_csv(dir.writer(&format!("ledger_mu{mu}.csv"))?)?;
        }
        let ke0 = ledger.initial_kinetic();
        let ke = marched.state.kinetic_energy();
        let exact = ke0 * (-2.0 * std::f64::consts::PI.powi(2) * mu * marched.state.time).exp();
        rows.push(TaylorGreenRow {
            mu,
            kinetic0: ke0,
            kinetic_final: ke,
            kinetic_exact: exact,
            rel_err: (ke - exact).abs() / exact,
            certificate_ok: ledger.certificate().passed(),
        });
    }
    if dir.wants("csv") {
        let mut w = dir.writer("taylor_green.csv")?;
        writeln!(w, "mu,kinetic0,kinetic_final,kinetic_exact,rel_err,certificate_ok")?;
        for r in &rows {
            writeln!(
                w,
                "{:e},{:e},{:e},{:e},{:e},{}",
                r.mu, r.kinetic0, r.kinetic_final, r.kinetic_exact, r.rel_err, r.certificate_ok
            )?;
        }
        w.flush()?;
    }
    let summary = TaylorGreenSummary {
        format_version: FORMAT_VERSION,
        n: grid.n(),
        dt,
        t_final: cfg.time.t_final,
        tolerance: TAYLOR_GREEN_TOL,
        rows,
    };
    dir.json("summary.json", &summary)?;
    Ok(summary)
}
