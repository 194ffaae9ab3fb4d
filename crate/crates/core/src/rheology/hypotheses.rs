//! Sampled checks of the structural hypotheses on a dissipation potential.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::model::RheologyModel;
use super::tensor::{upper_len, SymTensor};
use crate::error::{Error, Result};

/// Seed used by [`validate_hypotheses`].
pub const DEFAULT_HYPOTHESIS_SEED: u64 = 0x005e_ed0f_f00d;

/// Largest dual radius probed for the conjugate-domain ball.
const BALL_PROBE_MAX: f64 = 1e8;
/// Magnitude used for the growth-at-infinity checks.
const LARGE_D: f64 = 1e6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisVerdict {
    /// Fenchel-Young inequality with equality on the stress selection.
    pub fenchel_young: bool,
    /// `F*(S)/|S|` strictly increasing over the sampled radii.
    pub conjugate_superlinear: bool,
    /// `dom F*` contains a ball of positive radius.
    pub conjugate_ball: bool,
    /// `F(D)/|D|` bounded below by a positive constant for large `D`.
    pub linear_growth: bool,
    /// `F_inf(D) >= r |D|` on sampled directions for the sampled ball radius `r`.
    pub asymptotic_polar: bool,
    pub convexity: bool,
    pub domain_full: bool,
}

impl HypothesisVerdict {
    pub fn all_pass(&self) -> bool {
        self.fenchel_young
            && self.conjugate_superlinear
            && self.conjugate_ball
            && self.linear_growth
            && self.asymptotic_polar
            && self.convexity
            && self.domain_full
    }

    /// `(label, passed)` pairs in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, bool)> {
        vec![
            ("fenchel_young", self.fenchel_young),
            ("conjugate_superlinear", self.conjugate_superlinear),
            ("conjugate_ball", self.conjugate_ball),
            ("linear_growth", self.linear_growth),
            ("asymptotic_polar", self.asymptotic_polar),
            ("convexity", self.convexity),
            ("domain_full", self.domain_full),
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub model: String,
    pub samples: usize,
    pub seed: u64,
    pub fenchel_young_ok: bool,
    /// Worst (most negative) gap seen on mismatched pairs.
    pub min_gap: f64,
    /// Largest |gap| seen on the stress selection.
    pub max_selection_gap: f64,
    /// `(|S|, F*(S)/|S|)` at `|S| = 10^k`, `k = 1..4`; infinite slopes serialize as `null`.
    pub conjugate_superlinear_slope_at: Vec<(f64, Option<f64>)>,
    #[serde(rename = "F_domain_full")]
    pub f_domain_full: bool,
    #[serde(rename = "F_star_ball_radius")]
    pub f_star_ball_radius: f64,
    /// Smallest sampled `F(sD)/(s|D|)` at `s|D| = 1e6`.
    pub growth_lower_bound: f64,
    /// Sampled sup of `F_inf(D)/|D|` over directions where `F_inf` is finite (0 when none are).
    #[serde(rename = "F_infinity_linear_bound")]
    pub f_infinity_linear_bound: f64,
    pub convexity_violations: usize,
    pub verdict: HypothesisVerdict,
}

fn random_direction(rng: &mut ChaCha8Rng, dim: usize) -> SymTensor {
    loop {
        let upper: Vec<f64> = (0..upper_len(dim)).map(|_| rng.sample(StandardNormal)).collect();
        let t = SymTensor::from_upper(dim, &upper);
        let n = t.norm();
        if n > 1e-8 {
            return t.scale(1.0 / n);
        }
    }
}

fn random_tensor(rng: &mut ChaCha8Rng, dim: usize, log10_range: (f64, f64)) -> SymTensor {
    let dir = random_direction(rng, dim);
    let mag = 10f64.powf(rng.random_range(log10_range.0..log10_range.1));
    dir.scale(mag)
}

/// Largest `r <= BALL_PROBE_MAX` with `F*(r E)` finite, by a log grid then bisection.
fn finite_radius_along(model: &RheologyModel, e: &SymTensor) -> f64 {
    let finite = |r: f64| model.f_star_unchecked(&e.scale(r)).is_finite();
    let mut last_ok = 0.0;
    let mut first_bad = None;
    let mut r = 1e-8;
    while r <= BALL_PROBE_MAX {
        if finite(r) {
            last_ok = r;
        } else {
            first_bad = Some(r);
            break;
        }
        r *= 10.0;
    }
    let Some(mut hi) = first_bad else {
        return last_ok;
    };
    let mut lo = last_ok;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if finite(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// [`validate_hypotheses_seeded`] with [`DEFAULT_HYPOTHESIS_SEED`].
pub fn validate_hypotheses(model: &RheologyModel, samples: usize) -> Result<HypothesisReport> {
    validate_hypotheses_seeded(model, samples, DEFAULT_HYPOTHESIS_SEED)
}

pub fn validate_hypotheses_seeded(
    model: &RheologyModel,
    samples: usize,
    seed: u64,
) -> Result<HypothesisReport> {
    if samples < 100 {
        return Err(Error::Input(format!("validate_hypotheses needs >= 100 samples, got {samples}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dims: Vec<usize> = match model.required_dim() {
        Some(d) => vec![d],
        None => vec![2, 3],
    };
    let dim_of = |i: usize| dims[i % dims.len()];

    // Fenchel-Young: equality on the selection, inequality on mismatched pairs.
    let mut fy_ok = true;
    let mut min_gap = f64::INFINITY;
    let mut max_sel_gap: f64 = 0.0;
    let mut domain_full = true;
    for i in 0..samples {
        let dim = dim_of(i);
        let d = random_tensor(&mut rng, dim, (-3.0, 2.0));
        let f = model.f_unchecked(&d);
        if !f.is_finite() {
            domain_full = false;
            continue;
        }
        let s = model.stress_unchecked(&d);
        let fs = model.f_star_unchecked(&s);
        let tol = RheologyModel::gap_tolerance(f, fs);
        let gap = f + fs - s.contract(&d);
        max_sel_gap = max_sel_gap.max(gap.abs());
        if !(gap.abs() <= tol) {
            fy_ok = false;
        }
        let s2 = random_tensor(&mut rng, dim, (-3.0, 2.0));
        let fs2 = model.f_star_unchecked(&s2);
        if fs2.is_finite() {
            let gap2 = f + fs2 - s2.contract(&d);
            min_gap = min_gap.min(gap2);
            if gap2 < -RheologyModel::gap_tolerance(f, fs2) {
                fy_ok = false;
            }
        }
        let big = random_tensor(&mut rng, dim, (3.0, 6.0));
        if !model.f_unchecked(&big).is_finite() {
            domain_full = false;
        }
    }

    // Superlinear conjugate: strictly increasing slopes; infinite values count
    // as unbounded growth provided they come last.
    let dim0 = dims[0];
    let e0 = random_direction(&mut rng, dim0);
    let slopes: Vec<(f64, Option<f64>)> = (1..=4)
        .map(|k| {
            let r = 10f64.powi(k);
            let v = model.f_star_unchecked(&e0.scale(r)) / r;
            (r, v.is_finite().then_some(v))
        })
        .collect();
    let superlinear = {
        let finite: Vec<f64> = slopes.iter().map_while(|(_, v)| *v).collect();
        let tail_infinite = slopes[finite.len()..].iter().all(|(_, v)| v.is_none());
        tail_infinite && finite.windows(2).all(|w| w[1] > w[0])
    };

    // Ball in dom F*: minimum over sampled directions of the finite radius.
    let n_dirs = samples.min(32);
    let mut ball = f64::INFINITY;
    for i in 0..n_dirs {
        let e = random_direction(&mut rng, dim_of(i));
        ball = ball.min(finite_radius_along(model, &e));
    }

    // Growth at infinity and the asymptotic function.
    let mut growth = f64::INFINITY;
    let mut finf_sup: f64 = 0.0;
    let mut finf_inf = f64::INFINITY;
    for i in 0..n_dirs {
        let e = random_direction(&mut rng, dim_of(i));
        growth = growth.min(model.f_unchecked(&e.scale(LARGE_D)) / LARGE_D);
        let finf = model.asymptotic_f(&e, LARGE_D)?;
        finf_inf = finf_inf.min(finf);
        if finf.is_finite() {
            finf_sup = finf_sup.max(finf);
        }
    }
    let polar_ok = finf_inf >= ball * (1.0 - 1e-6) - 1e-9;

    // Convexity along sampled segments.
    let mut convexity_violations = 0;
    for i in 0..samples {
        let dim = dim_of(i);
        let d1 = random_tensor(&mut rng, dim, (-2.0, 1.5));
        let d2 = random_tensor(&mut rng, dim, (-2.0, 1.5));
        let (f1, f2) = (model.f_unchecked(&d1), model.f_unchecked(&d2));
        for lam in [0.25, 0.5, 0.75] {
            let mid = d1.scale(lam) + d2.scale(1.0 - lam);
            let lhs = model.f_unchecked(&mid);
            if lhs > lam * f1 + (1.0 - lam) * f2 + 1e-12 * (1.0 + f1.abs() + f2.abs()) {
                convexity_violations += 1;
            }
        }
    }

    let verdict = HypothesisVerdict {
        fenchel_young: fy_ok,
        conjugate_superlinear: superlinear,
        conjugate_ball: ball > 0.0,
        linear_growth: growth > 1e-12,
        asymptotic_polar: polar_ok,
        convexity: convexity_violations == 0,
        domain_full,
    };
    Ok(HypothesisReport {
        model: model.kind().name().to_string(),
        samples,
        seed,
        fenchel_young_ok: fy_ok,
        min_gap,
        max_selection_gap: max_sel_gap,
        conjugate_superlinear_slope_at: slopes,
        f_domain_full: domain_full,
        f_star_ball_radius: ball,
        growth_lower_bound: growth,
        f_infinity_linear_bound: finf_sup,
        convexity_violations,
        verdict,
    })
}
