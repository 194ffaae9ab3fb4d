use drhe::certificates::estimate_defect;
use drhe::relative::relative_energy;
use drhe::rheology::{RheologyModel, RheologyParams, SymTensor};
use drhe::spectral::{decode_snapshot, encode_snapshot, project, seeded_random_smooth, TorusGrid};
use proptest::prelude::*;

fn model_strategy() -> impl Strategy<Value = RheologyModel> {
    prop_oneof![
        (0.01f64..10.0).prop_map(|mu| RheologyModel::newtonian(mu).unwrap()),
        (0.0f64..1.0, 0.1f64..5.0, 1.2f64..4.0).prop_map(|(a, b, p)| RheologyModel::power_law(a, b, p).unwrap()),
        (0.0f64..1.0, 0.05f64..1.0, 0.1f64..5.0, 1.2f64..3.5)
            .prop_map(|(mi, a, b, p)| RheologyModel::carreau(mi, a, b, p).unwrap()),
        (0.0f64..1.0, 0.0f64..2.0, 1e-3f64..1.0).prop_map(|(mu, t, e)| RheologyModel::bingham(mu, t, e).unwrap()),
        (0.01f64..2.0, 0.01f64..1.0).prop_map(|(mu, lam)| {
            RheologyModel::new(RheologyParams {
                mu,
                smoothing: lam,
                ..Default::default()
            })
            .unwrap()
        }),
    ]
}

fn tensor_strategy(dim: usize) -> impl Strategy<Value = SymTensor> {
    let n = dim * (dim + 1) / 2;
    (prop::collection::vec(-1.0f64..1.0, n), -3.0f64..2.0).prop_map(move |(u, lg)| {
        let t = SymTensor::from_upper(dim, &u);
        let norm = t.norm().max(1e-12);
        t.scale(10f64.powf(lg) / norm)
    })
}

fn rotation(theta: f64) -> Vec<f64> {
    let (s, c) = theta.sin_cos();
    vec![c, -s, s, c]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn potential_is_convex(m in model_strategy(), a in tensor_strategy(2), b in tensor_strategy(2)) {
        let (fa, fb) = (m.eval_f(&a).unwrap(), m.eval_f(&b).unwrap());
        for lam in [0.25, 0.5, 0.75] {
            let mid = a.scale(lam) + b.scale(1.0 - lam);
            let f = m.eval_f(&mid).unwrap();
            prop_assert!(f <= lam * fa + (1.0 - lam) * fb + 1e-12 * (1.0 + fa.abs() + fb.abs()));
        }
    }

    #[test]
    fn stress_is_monotone(m in model_strategy(), a in tensor_strategy(2), b in tensor_strategy(2)) {
        let sa = m.stress_from_d(&a).unwrap();
        let sb = m.stress_from_d(&b).unwrap();
        let dot = (sa - sb).contract(&(a - b));
        prop_assert!(dot >= -1e-12 * (1.0 + sa.norm() * a.norm() + sb.norm() * b.norm()));
    }

    #[test]
    fn fenchel_young_equality_on_the_selection(m in model_strategy(), d in tensor_strategy(2)) {
        let s = m.stress_from_d(&d).unwrap();
        let gap = m.fenchel_young_gap(&s, &d).unwrap();
        let tol = RheologyModel::gap_tolerance(m.eval_f(&d).unwrap(), m.eval_f_star(&s).unwrap());
        prop_assert!(gap >= -tol && gap <= tol, "gap {gap:e} tol {tol:e}");
    }

    #[test]
    fn fenchel_young_inequality_off_the_selection(m in model_strategy(), d in tensor_strategy(2), s in tensor_strategy(2)) {
        let gap = m.fenchel_young_gap(&s, &d).unwrap();
        let f = m.eval_f(&d).unwrap();
        let fs = m.eval_f_star(&s).unwrap();
        prop_assert!(gap >= -RheologyModel::gap_tolerance(f, fs));
    }

    #[test]
    fn isotropic_potentials_are_rotation_invariant(m in model_strategy(), d in tensor_strategy(2), th in 0.0f64..6.3) {
        let q = rotation(th);
        let f = m.eval_f(&d).unwrap();
        let fr = m.eval_f(&d.conjugate_by(&q)).unwrap();
        prop_assert!((f - fr).abs() <= 1e-12 * (1.0 + f.abs()));
        let s = m.stress_from_d(&d).unwrap().conjugate_by(&q);
        let sr = m.stress_from_d(&d.conjugate_by(&q)).unwrap();
        prop_assert!((s - sr).norm() <= 1e-11 * (1.0 + s.norm()));
    }

    #[test]
    fn numeric_conjugate_matches_closed_power_law(p in 1.3f64..4.0, mu2 in 0.2f64..5.0, lg in -3.0f64..3.0) {
        let m = RheologyModel::power_law(0.0, mu2, p).unwrap();
        let s = SymTensor::diag(&[10f64.powf(lg), 0.0]);
        let a = m.eval_f_star(&s).unwrap();
        let b = m.with_numeric_conjugate().eval_f_star(&s).unwrap();
        prop_assert!((a - b).abs() <= 1e-8 * a.abs(), "{a} vs {b}");
    }

    #[test]
    fn biconjugate_recovers_the_potential(m in model_strategy(), d in tensor_strategy(2)) {
        // F(D) >= sup over probes of S:D - F*(S), attained at S = dF(D)
        let s = m.stress_from_d(&d).unwrap();
        let f = m.eval_f(&d).unwrap();
        let at_selection = s.contract(&d) - m.eval_f_star(&s).unwrap();
        for t in [0.5, 0.9, 1.1, 2.0] {
            let probe = s.scale(t);
            let v = probe.contract(&d) - m.eval_f_star(&probe).unwrap();
            prop_assert!(v <= at_selection + 1e-10 * (1.0 + f.abs()));
        }
        prop_assert!((at_selection - f).abs() <= 1e-9 * (1.0 + f.abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn defect_estimates_are_psd(seed in any::<u64>(), decay in 0.0f64..4.0, coarse in prop::sample::select(vec![2usize, 4, 8])) {
        let grid = TorusGrid::new(2, 16, 2.0 / 3.0).unwrap();
        let v = seeded_random_smooth(&grid, seed, decay, 5, 1.0).unwrap();
        let est = estimate_defect(&v, coarse).unwrap();
        prop_assert!(est.min_eigenvalue >= -1e-10 * (1.0 + est.trace_total));
        prop_assert!(est.trace_total >= -1e-10);
    }

    #[test]
    fn leray_projection_is_idempotent(seed in any::<u64>()) {
        let grid = TorusGrid::new(2, 16, 2.0 / 3.0).unwrap();
        let v = seeded_random_smooth(&grid, seed, 1.0, 5, 1.0).unwrap();
        let pv = project(&v);
        prop_assert!(pv.max_divergence() < 1e-12);
        prop_assert!(project(&pv).max_abs_diff(&pv) < 1e-15);
    }

    #[test]
    fn snapshots_round_trip_bitwise(seed in any::<u64>(), t in 0.0f64..10.0) {
        let grid = TorusGrid::new(2, 8, 2.0 / 3.0).unwrap();
        let mut v = seeded_random_smooth(&grid, seed, 2.0, 3, 0.5).unwrap();
        v.time = t;
        let back = decode_snapshot(&encode_snapshot(&v), 2.0 / 3.0).unwrap();
        prop_assert_eq!(back.time.to_bits(), t.to_bits());
        prop_assert_eq!(back.max_abs_diff(&v), 0.0);
    }

    #[test]
    fn relative_energy_is_symmetric_and_vanishes_on_the_diagonal(a in any::<u64>(), b in any::<u64>()) {
        let grid = TorusGrid::new(2, 8, 2.0 / 3.0).unwrap();
        let v = seeded_random_smooth(&grid, a, 2.0, 3, 1.0).unwrap();
        let u = seeded_random_smooth(&grid, b, 2.0, 3, 1.0).unwrap();
        prop_assert_eq!(relative_energy(&v, None, &v).unwrap(), 0.0);
        let e1 = relative_energy(&v, None, &u).unwrap();
        let e2 = relative_energy(&u, None, &v).unwrap();
        prop_assert!((e1 - e2).abs() <= 1e-14 * (1.0 + e1));
        prop_assert!(e1 >= 0.0);
    }
}
