//! Numerical Legendre transform of a convex radial profile.
//!
//! `phi*(sigma) = sup_{s >= 0} sigma s - phi(s)`. The objective is concave, so
//! a golden-section search narrows the bracket and a safeguarded Newton
//! iteration on `phi'(s) = sigma` polishes the maximizer.

use super::profile::RadialProfile;

/// Largest radius probed before the supremum is declared divergent.
pub(crate) const SAMPLING_HORIZON: f64 = 1e150;

const GOLDEN_ITERS: usize = 8;
const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Maximizer of `sigma s - phi(s)`, or `None` when the supremum diverges.
pub(crate) fn radial_argmax(profile: &RadialProfile, sigma: f64) -> Option<f64> {
    if sigma <= 0.0 {
        return Some(0.0);
    }
    // bracket: slope(lo) < sigma <= slope(hi)
    let mut lo = 0.0;
    let mut hi = 1.0;
    while profile.slope(hi) < sigma {
        lo = hi;
        hi *= 2.0;
        if hi > SAMPLING_HORIZON {
            return None;
        }
    }
    while hi > 1e-300 && lo == 0.0 && profile.slope(0.5 * hi) >= sigma {
        hi *= 0.5;
    }

    let objective = |s: f64| sigma * s - profile.value(s);
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let (mut f1, mut f2) = (objective(x1), objective(x2));
    for _ in 0..GOLDEN_ITERS {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = objective(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = objective(x1);
        }
    }
    // golden section keeps the maximizer inside [a, b]; re-validate against
    // the monotone slope in case of round-off in the objective comparisons
    if profile.slope(a) > sigma {
        a = lo;
    }
    if profile.slope(b) < sigma {
        b = hi;
    }

    let mut s = 0.5 * (a + b);
    for _ in 0..200 {
        let g = profile.slope(s) - sigma;
        if g == 0.0 {
            return Some(s);
        }
        if g < 0.0 {
            a = s;
        } else {
            b = s;
        }
        let c = profile.curvature(s);
        let mut next = s - g / c;
        if !c.is_finite() || c <= 0.0 || !(next > a && next < b) {
            next = 0.5 * (a + b);
        }
        if (next - s).abs() <= 2.0 * f64::EPSILON * s.abs() || (b - a) <= 2.0 * f64::EPSILON * b {
            return Some(next);
        }
        s = next;
    }
    Some(s)
}

/// `phi*(sigma)`; `f64::INFINITY` signals a divergent supremum.
pub(crate) fn radial_conjugate(profile: &RadialProfile, sigma: f64) -> f64 {
    match radial_argmax(profile, sigma) {
        Some(s) => (sigma * s - profile.value(s)).max(0.0),
        None => f64::INFINITY,
    }
}
