//! One line per acceptance criterion; exits non-zero if any criterion fails.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use drhe::certificates::estimate_defect;
use drhe::experiment::{run_simulate, run_taylor_green, run_weak_strong, ExperimentConfig, SimulateSummary};
use drhe::rheology::{validate_hypotheses, RheologyKind, RheologyModel, RheologyParams, SymTensor};
use drhe::spectral::{seeded_random_smooth, TorusGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> drhe::Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn shipped_configs() -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(configs_dir())
        .expect("configs directory")
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "cfg"))
        .collect();
    v.sort();
    v
}

fn random_tensor(rng: &mut ChaCha8Rng, dim: usize) -> SymTensor {
    let n = dim * (dim + 1) / 2;
    let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let t = SymTensor::from_upper(dim, &u);
    let mag = 10f64.powf(rng.random_range(-2.0..1.0));
    t.scale(mag / t.norm().max(1e-12))
}

fn random_model(rng: &mut ChaCha8Rng, kind: usize) -> RheologyModel {
    let mut r = |a: f64, b: f64| rng.random_range(a..b);
    match kind {
        0 => RheologyModel::newtonian(r(0.01, 5.0)),
        1 => RheologyModel::power_law(r(0.0, 1.0), r(0.1, 3.0), r(1.2, 4.0)),
        2 => RheologyModel::carreau(r(0.0, 1.0), r(0.05, 1.0), r(0.1, 3.0), r(1.2, 3.5)),
        3 => RheologyModel::bingham(r(0.0, 1.0), r(0.0, 2.0), r(1e-3, 1.0)),
        4 => {
            let l: Vec<f64> = (0..16).map(|i| if i % 5 == 0 { 1.0 } else { 0.0 } + r(-0.3, 0.3)).collect();
            RheologyModel::anisotropic(
                RheologyParams {
                    kind: RheologyKind::PowerLaw,
                    mu1: r(0.0, 1.0),
                    mu2: r(0.1, 3.0),
                    p: r(1.5, 3.0),
                    ..Default::default()
                },
                l,
            )
        }
        _ => RheologyModel::euler(2),
    }
    .unwrap()
}

fn fenchel_young_suite() -> drhe::Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut lo, mut hi, mut mismatched) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY);
    let pairs = 12_000;
    for i in 0..pairs {
        let model = random_model(&mut rng, i % 6);
        let d = random_tensor(&mut rng, 2);
        let gap = model.fenchel_young_gap(&model.stress_from_d(&d)?, &d)?;
        lo = lo.min(gap);
        hi = hi.max(gap);
        let s = random_tensor(&mut rng, 2);
        mismatched = mismatched.min(model.fenchel_young_gap(&s, &d)?);
    }
    outcome(
        lo >= -1e-12 && hi <= 1e-10 && mismatched >= -1e-12,
        format!("{pairs} pairs, selection gap in [{lo:.2e}, {hi:.2e}], mismatched min {mismatched:.2e}"),
    )
}

fn conjugate_correctness() -> drhe::Result<Outcome> {
    let mut worst: f64 = 0.0;
    for p in [1.5, 2.0, 2.5, 3.0, 4.0] {
        let model = RheologyModel::power_law(0.0, 1.0, p)?;
        let numeric = model.with_numeric_conjugate();
        for i in 0..=60 {
            let sigma = 10f64.powf(-3.0 + 6.0 * i as f64 / 60.0);
            let s = SymTensor::diag(&[sigma / 2f64.sqrt(), -sigma / 2f64.sqrt()]);
            let (a, b) = (model.eval_f_star(&s)?, numeric.eval_f_star(&s)?);
            worst = worst.max((a - b).abs() / a.abs());
        }
    }
    outcome(worst <= 1e-8, format!("worst relative difference {worst:.2e}"))
}

fn taylor_green_regression(tmp: &Path) -> drhe::Result<Outcome> {
    let cfg = ExperimentConfig::from_text(
        "grid.N = 32\ntime.T_final = 1\ntime.dt = 1e-3\ntime.record_stride = 100\nexperiment.mu_list = 0.01, 0.1, 1\n",
    )?;
    let s = run_taylor_green(&cfg, &tmp.join("tg"))?;
    // independent oracle: the vortex sin(pi x) cos(pi y) has |k|^2 = 2 pi^2
    let mut worst: f64 = 0.0;
    for r in &s.rows {
        let exact = r.kinetic0 * (-2.0 * PI * PI * r.mu).exp();
        worst = worst.max((r.kinetic_final - exact).abs() / exact);
    }
    outcome(worst <= 1e-6, format!("mu in {{0.01, 0.1, 1}}, worst relative error {worst:.2e}"))
}

fn run_shipped(tmp: &Path) -> drhe::Result<Vec<(String, SimulateSummary)>> {
    shipped_configs()
        .iter()
        .map(|p| {
            let name = p.file_stem().unwrap().to_string_lossy().into_owned();
            let cfg = ExperimentConfig::load(p)?;
            Ok((name.clone(), run_simulate(&cfg, &tmp.join("shipped").join(&name))?))
        })
        .collect()
}

fn energy_certificates(runs: &[(String, SimulateSummary)]) -> drhe::Result<Outcome> {
    let mut bad = Vec::new();
    for (name, s) in runs {
        let ke0 = s.ledger.initial_kinetic();
        let tol = 1e-6 * ke0;
        let ok = s.ledger.records.iter().all(|r| {
            r.kinetic + r.cum_diss() <= ke0 + r.cum_work + tol && r.gap >= -1e-10 * (1.0 + r.diss_f + r.diss_fstar)
        });
        if !ok {
            bad.push(name.as_str());
        }
    }
    outcome(bad.is_empty(), format!("{} configs, failing: {bad:?}", runs.len()))
}

fn defect_psd(runs: &[(String, SimulateSummary)]) -> drhe::Result<Outcome> {
    let grid = TorusGrid::new(2, 32, 2.0 / 3.0)?;
    let mut worst = f64::INFINITY;
    let mut ok = true;
    for seed in 0..100 {
        let v = seeded_random_smooth(&grid, seed, 1.0, 10, 1.0)?;
        let est = estimate_defect(&v, 8)?;
        ok &= est.min_eigenvalue >= -1e-10 * (1.0 + est.trace_total);
        worst = worst.min(est.min_eigenvalue);
    }
    let runs_ok = runs.iter().all(|(_, s)| s.defect_psd);
    outcome(
        ok && runs_ok,
        format!("100 random fields (min eigenvalue {worst:.2e}), {} example runs psd: {runs_ok}", runs.len()),
    )
}

fn weak_strong(tmp: &Path) -> drhe::Result<Outcome> {
    let cfg = ExperimentConfig::load(&configs_dir().join("weak_strong.cfg"))?;
    let o = run_weak_strong(&cfg, &tmp.join("ws"))?;
    let sup: Vec<String> = o.table.iter().map(|r| format!("{}:{:.2e}", r.n, r.sup_energy)).collect();
    let envelope = o.reports.iter().all(|r| r.envelope_ok);
    let ratio = o.min_ratio.unwrap_or(0.0);
    outcome(
        o.monotone && ratio >= 4.0 && envelope && !o.partial,
        format!(
            "sup E [{}], min ratio {ratio:.2e}, envelope {envelope}, {:.0} s",
            sup.join(", "),
            o.wallclock
        ),
    )
}

fn regularity(runs: &[(String, SimulateSummary)]) -> drhe::Result<Outcome> {
    let mut worst_gap: f64 = 0.0;
    let mut worst_trace: f64 = 0.0;
    for (_, s) in runs {
        worst_gap = worst_gap.max(s.regularity.budget_gap.abs());
        worst_trace = worst_trace.max(s.regularity.defect_trace);
    }
    outcome(
        worst_gap <= 1e-6 && worst_trace <= 1e-6,
        format!("{} resolved runs, budget gap <= {worst_gap:.2e}, defect trace <= {worst_trace:.2e}", runs.len()),
    )
}

fn euler(runs: &[(String, SimulateSummary)]) -> drhe::Result<Outcome> {
    let (_, s) = runs
        .iter()
        .find(|(n, _)| n == "euler")
        .expect("euler.cfg is shipped");
    let first = &s.ledger.records[0];
    let last = s.ledger.last().unwrap();
    let drift = (last.kinetic - first.kinetic).abs();
    let report = validate_hypotheses(&RheologyModel::euler(2)?, 1000)?;
    let excluded = !report.verdict.conjugate_ball;
    outcome(
        drift <= 1e-8 && (s.final_time - 1.0).abs() < 1e-12 && excluded,
        format!("N = 32, |KE(1) - KE(0)| = {drift:.2e}, conjugate-ball exclusion reported: {excluded}"),
    )
}

fn determinism(tmp: &Path) -> drhe::Result<Outcome> {
    let cfg = ExperimentConfig::load(&configs_dir().join("power_law.cfg"))?;
    let (a, b) = (tmp.join("det_a"), tmp.join("det_b"));
    run_simulate(&cfg, &a)?;
    run_simulate(&cfg, &b)?;
    let mut files = vec![PathBuf::from("ledger.csv")];
    for e in fs::read_dir(a.join("snapshots"))? {
        files.push(Path::new("snapshots").join(e?.file_name()));
    }
    let same = files
        .iter()
        .all(|f| fs::read(a.join(f)).ok().is_some_and(|x| Some(x) == fs::read(b.join(f)).ok()));
    outcome(same, format!("{} files compared byte for byte", files.len()))
}

fn main() {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let tmp = tmp.path();
    let mut failed = 0;
    let mut report = |n: usize, name: &str, r: drhe::Result<Outcome>| {
        let (pass, detail) = match r {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!("criterion {n} [{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    };
    let start = Instant::now();
    report(1, "Fenchel-Young suite", fenchel_young_suite());
    report(2, "conjugate correctness", conjugate_correctness());
    report(3, "Taylor-Green regression", taylor_green_regression(tmp));
    let runs = run_shipped(tmp);
    let with_runs = |f: fn(&[(String, SimulateSummary)]) -> drhe::Result<Outcome>| match &runs {
        Ok(r) => f(r),
        Err(e) => outcome(false, format!("shipped configs failed: {e}")),
    };
    report(4, "energy-inequality certificate", with_runs(energy_certificates));
    report(5, "defect PSD", with_runs(defect_psd));
    report(6, "weak-strong decay", weak_strong(tmp));
    report(7, "conditional-regularity diagnostic", with_runs(regularity));
    report(8, "Euler degenerate case", with_runs(euler));
    report(9, "determinism", determinism(tmp));
    println!("acceptance: {} of 9 criteria failed ({:.0} s)", failed, start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
