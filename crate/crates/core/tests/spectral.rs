#![allow(clippy::needless_range_loop)]

use std::f64::consts::PI;

use drhe::rheology::RheologyModel;
use drhe::spectral::{
    march, recover_pressure, read_snapshot, taylor_green, velocity_gradient, write_snapshot, SpectralVelocity,
    Stepper, TimeStepRule, TorusGrid,
};
use drhe::Error;

fn grid(d: usize, n: usize) -> TorusGrid {
    TorusGrid::new(d, n, 2.0 / 3.0).unwrap()
}

fn from_fn(g: &TorusGrid, f: impl Fn([f64; 3]) -> Vec<f64>) -> SpectralVelocity {
    let d = g.dim();
    let mut phys = vec![vec![0.0; g.len()]; d];
    for i in 0..g.len() {
        let v = f(g.node(i));
        for c in 0..d {
            phys[c][i] = v[c];
        }
    }
    SpectralVelocity::from_physical(g, &phys).unwrap()
}

fn run(model: &RheologyModel, mu0: f64, v0: SpectralVelocity, t: f64, dt: f64) -> SpectralVelocity {
    let stepper = Stepper::new(model, None, mu0).unwrap();
    let m = march(&stepper, v0, t, &TimeStepRule::Fixed(dt), 1, |_| Ok(true)).unwrap();
    assert!(m.failure.is_none(), "{:?}", m.failure);
    m.state
}

#[test]
fn taylor_green_pressure_matches_closed_form() {
    // v = (sin pi x cos pi y, -cos pi x sin pi y): (v . grad) v = -grad p with
    // p = (cos 2 pi x + cos 2 pi y) / 4, and the Newtonian stress term is solenoidal
    let g = grid(2, 16);
    let v = taylor_green(&g, 1.0).unwrap();
    let p = recover_pressure(&RheologyModel::newtonian(0.3).unwrap(), &v, None)
        .unwrap()
        .to_physical();
    for i in 0..g.len() {
        let x = g.node(i);
        let exact = 0.25 * ((2.0 * PI * x[0]).cos() + (2.0 * PI * x[1]).cos());
        assert!((p[i] - exact).abs() < 1e-13, "node {i}: {} vs {exact}", p[i]);
    }
}

#[test]
fn velocity_gradient_of_a_shear_mode() {
    let g = grid(2, 8);
    let v = from_fn(&g, |x| vec![(PI * x[1]).sin(), 0.0]);
    let grad = velocity_gradient(&v);
    for i in 0..g.len() {
        let y = g.node(i)[1];
        assert!((grad[1][i] - PI * (PI * y).cos()).abs() < 1e-13);
        assert!(grad[0][i].abs() < 1e-13 && grad[2][i].abs() < 1e-13 && grad[3][i].abs() < 1e-13);
    }
}

#[test]
fn taylor_green_is_a_steady_euler_flow() {
    let g = grid(2, 16);
    let v0 = taylor_green(&g, 0.7).unwrap();
    let v = run(&RheologyModel::euler(2).unwrap(), 0.0, v0.clone(), 0.5, 1e-2);
    assert!(v.max_abs_diff(&v0) < 1e-13);
}

#[test]
fn newtonian_vortex_amplitude_decays_exactly() {
    // div(mu D) = (mu/2) Laplacian v and |k|^2 = 2 pi^2: rate mu pi^2
    let (mu, t) = (0.2, 0.4);
    let g = grid(2, 16);
    let v = run(
        &RheologyModel::newtonian(mu).unwrap(),
        mu,
        taylor_green(&g, 1.0).unwrap(),
        t,
        1e-2,
    );
    let exact = taylor_green(&g, (-mu * PI * PI * t).exp()).unwrap();
    assert!(v.max_abs_diff(&exact) < 1e-13);
}

#[test]
fn three_dimensional_shear_mode_decays() {
    // v = (sin pi y, 0, 0) is a steady Euler flow; viscosity damps it at (mu/2) pi^2
    let (mu, t) = (0.5, 0.3);
    let g = grid(3, 8);
    let v0 = from_fn(&g, |x| vec![(PI * x[1]).sin(), 0.0, 0.0]);
    let v = run(&RheologyModel::newtonian(mu).unwrap(), 0.0, v0.clone(), t, 1e-3);
    let a = (-0.5 * mu * PI * PI * t).exp();
    let exact = v0.axpy(a - 1.0, &v0);
    assert!(v.max_abs_diff(&exact) < 1e-11, "{}", v.max_abs_diff(&exact));
    assert!(v.max_divergence() < 1e-12);
}

#[test]
fn oversized_fixed_step_is_rejected() {
    let g = grid(2, 16);
    let model = RheologyModel::newtonian(1.0).unwrap();
    let stepper = Stepper::new(&model, None, 0.0).unwrap();
    let m = march(&stepper, taylor_green(&g, 1.0).unwrap(), 1.0, &TimeStepRule::Fixed(0.5), 1, |_| Ok(true)).unwrap();
    let Some(Error::Stability { dt, suggested }) = m.failure else {
        panic!("expected a stability failure, got {:?}", m.failure);
    };
    assert_eq!(dt, 0.5);
    assert!(suggested < dt);
    assert_eq!(m.steps, 0);
}

#[test]
fn auto_steps_reach_the_horizon() {
    let g = grid(2, 16);
    let model = RheologyModel::power_law(0.05, 0.05, 1.6).unwrap();
    let stepper = Stepper::new(&model, None, 0.0).unwrap();
    let mut seen = Vec::new();
    let m = march(&stepper, taylor_green(&g, 0.5).unwrap(), 0.05, &TimeStepRule::Auto, 5, |o| {
        seen.push(o.state.time);
        Ok(true)
    })
    .unwrap();
    assert!(m.completed());
    assert_eq!(m.state.time, 0.05);
    assert_eq!(seen[0], 0.0);
    assert_eq!(*seen.last().unwrap(), 0.05);
    assert!(seen.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn snapshot_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.bin");
    let mut v = taylor_green(&grid(2, 8), 0.3).unwrap();
    v.time = 0.125;
    write_snapshot(&path, &v).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(&bytes[..4], b"DRHE");
    let back = read_snapshot(&path, 2.0 / 3.0).unwrap();
    assert_eq!(back.time, 0.125);
    assert_eq!(back.max_abs_diff(&v), 0.0);
}
