use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn drhe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drhe"))
        .args(args)
        .output()
        .expect("run drhe")
}

fn write_cfg(dir: &Path, text: &str) -> String {
    let p = dir.join("run.cfg");
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_writes_a_self_describing_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        tmp.path(),
        "rheology.mu = 0.1\ngrid.N = 16\ntime.T_final = 0.05\ntime.dt = 1e-3\ntime.record_stride = 10\n",
    );
    let out = tmp.path().join("out");
    let o = drhe(&["simulate", "--config", &cfg, "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["config.resolved.cfg", "ledger.csv", "summary.json", "snapshots/step_000000.bin", "snapshots/step_000050.bin"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let echo = fs::read_to_string(out.join("config.resolved.cfg")).unwrap();
    assert!(echo.contains("meta.format_version = 1"));
    assert!(echo.contains("meta.threads = 1"));
    let summary: serde_json::Value = serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["steps"], 50);
}

#[test]
fn seeded_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        tmp.path(),
        "rheology.kind = power_law\nrheology.mu1 = 0.05\nrheology.mu2 = 0.05\nrheology.p = 2.5\n\
         grid.N = 16\ntime.T_final = 0.02\ninitial.kind = seeded_random_smooth\n",
    );
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    for (dir, seed) in [(&a, "11"), (&b, "11"), (&c, "12")] {
        let o = drhe(&["simulate", "--config", &cfg, "--out", path(dir), "--seed", seed]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let read = |d: &Path| fs::read(d.join("ledger.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
    let echo = fs::read_to_string(a.join("config.resolved.cfg")).unwrap();
    assert!(echo.contains("initial.seed = 11"));
}

#[test]
fn unknown_keys_are_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "grid.N = 16\ngrid.bogus = 3\n");
    let o = drhe(&["simulate", "--config", &cfg, "--out", path(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
}

#[test]
fn oversized_step_exits_with_error_and_keeps_last_good_state() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "rheology.mu = 1\ngrid.N = 16\ntime.T_final = 1\ntime.dt = 0.5\n");
    let out = tmp.path().join("o");
    let o = drhe(&["simulate", "--config", &cfg, "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("stability limit"));
    assert!(out.join("snapshots/step_000000.bin").exists());
    assert!(out.join("summary.json").exists());
}

#[test]
fn verify_rheology_reports_and_tabulates() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        tmp.path(),
        "rheology.kind = power_law\nrheology.mu1 = 0\nrheology.p = 3\nexperiment.table_points = 7\n",
    );
    let out = tmp.path().join("o");
    let o = drhe(&["verify-rheology", "--config", &cfg, "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(out.join("conjugate_table.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("sigma,F_star,F_star_numeric,rel_diff"));
    assert_eq!(lines.count(), 7);
    let report: serde_json::Value = serde_json::from_slice(&fs::read(out.join("hypotheses.json")).unwrap()).unwrap();
    assert_eq!(report["fenchel_young_ok"], true);
}

#[test]
fn newtonian_conjugate_table_is_quadratic() {
    // least-squares fit F* = c sigma^2 over the table; exact value c = 1/(2 mu)
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "rheology.mu = 0.4\nexperiment.table_points = 13\n");
    let out = tmp.path().join("o");
    let o = drhe(&["conjugate-table", "--config", &cfg, "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let rows: Vec<(f64, f64)> = fs::read_to_string(out.join("conjugate_table.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            (v[0], v[1])
        })
        .collect();
    // fit in log space: log F* = log c + 2 log sigma
    let xs: Vec<f64> = rows.iter().map(|r| r.0.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.1.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    assert!(1.0 - ss_res / ss_tot >= 1.0 - 1e-10);
    assert!((slope - 2.0).abs() < 1e-10);
    assert!((intercept.exp() - 1.25).abs() < 1e-10);
}

#[test]
fn euler_verification_flags_the_excluded_hypothesis() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "rheology.kind = euler\nexperiment.samples = 200\n");
    let o = drhe(&["verify-rheology", "--config", &cfg, "--out", path(&tmp.path().join("o"))]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("conjugate_ball=false"));
}

#[test]
fn weak_strong_single_row_and_seed_refusal() {
    let tmp = tempfile::tempdir().unwrap();
    let base = "rheology.mu = 0.05\ntime.T_final = 0.02\ntime.dt = 1e-3\ntime.record_stride = 5\n\
                experiment.reference = manufactured\nexperiment.coarse_N = 16\nexperiment.reference_N = 32\n";
    let cfg = write_cfg(tmp.path(), base);
    let out = tmp.path().join("ws");
    let o = drhe(&["weak-strong", "--config", &cfg, "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let conv = fs::read_to_string(out.join("convergence.csv")).unwrap();
    assert_eq!(conv.lines().count(), 2);
    assert!(out.join("relative_energy_N16.csv").exists());

    let cfg = write_cfg(
        tmp.path(),
        &format!(
            "{}initial.kind = seeded_random_smooth\ninitial.seed = 1\nexperiment.reference_seed = 2\n",
            base.replace("experiment.reference = manufactured\n", "")
        ),
    );
    let o = drhe(&["weak-strong", "--config", &cfg, "--out", path(&tmp.path().join("refused"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
}

#[test]
fn taylor_green_subcommand_matches_decay() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_cfg(tmp.path(), "grid.N = 16\ntime.T_final = 0.1\ntime.dt = 1e-3\nexperiment.mu_list = 0.1, 1\n");
    let out = tmp.path().join("tg");
    let o = drhe(&["taylor-green", "--config", &cfg, "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read_to_string(out.join("taylor_green.csv")).unwrap().lines().count(), 3);
}
