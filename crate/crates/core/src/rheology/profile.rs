//! Scalar profiles `phi(s)` with `F(D) = phi(|D|)` for the isotropic potentials.


use super::conjugate::{radial_argmax, radial_conjugate};

/// Base isotropic potentials, parameterized by the viscosity law
/// `mu(s) = S/|D|` so that `phi'(s) = mu(s) s`.
#[derive(Clone, Debug, PartialEq)]
pub(crate) enum BaseProfile {
    /// `phi = mu s^2 / 2`
    Newtonian { mu: f64 },
    /// `mu(s) = (mu1 + mu2 s^2)^((p-2)/2)`
    PowerLaw { mu1: f64, mu2: f64, p: f64 },
    /// `mu(s) = mu_inf + (mu1 + mu2 s^2)^((p-2)/2)` with `mu1 > 0`; `phi` by quadrature.
    Carreau {
        mu_inf: f64,
        mu1: f64,
        mu2: f64,
        p: f64,
    },
    /// `phi = mu s^2/2 + tau0 (sqrt(s^2 + eps^2) - eps)`
    Bingham { mu: f64, tau0: f64, eps: f64 },
}

/// `(mu1 + mu2 s^2)^e`, exact at `s = 0` for `mu1 = 0` and `e > 0`.
#[inline]
fn shifted_pow(mu1: f64, mu2: f64, s: f64, e: f64) -> f64 {
    let base = mu1 + mu2 * s * s;
    if base == 0.0 {
        if e > 0.0 {
            0.0
        } else if e == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        base.powf(e)
    }
}

/// `int_0^s (mu1 + mu2 r^2)^((p-2)/2) r dr`.
fn power_value(mu1: f64, mu2: f64, p: f64, s: f64) -> f64 {
    if mu1 == 0.0 {
        mu2.powf(0.5 * (p - 2.0)) * s.powf(p) / p
    } else {
        // [(mu1 + mu2 s^2)^(p/2) - mu1^(p/2)] / (mu2 p), cancellation-free
        let x = mu2 * s * s / mu1;
        mu1.powf(0.5 * p) * (0.5 * p * x.ln_1p()).exp_m1() / (mu2 * p)
    }
}

impl BaseProfile {
    pub fn value(&self, s: f64) -> f64 {
        match *self {
            BaseProfile::Newtonian { mu } => 0.5 * mu * s * s,
            BaseProfile::PowerLaw { mu1, mu2, p } => power_value(mu1, mu2, p, s),
            BaseProfile::Carreau {
                mu_inf,
                mu1,
                mu2,
                p,
            } => 0.5 * mu_inf * s * s + power_value(mu1, mu2, p, s),
            BaseProfile::Bingham { mu, tau0, eps } => {
                let root = (s * s + eps * eps).sqrt();
                0.5 * mu * s * s + tau0 * s * s / (root + eps)
            }
        }
    }

    /// `phi'(s) = mu(s) s`.
    pub fn slope(&self, s: f64) -> f64 {
        self.secant(s) * s
    }

    /// Secant viscosity `mu(s) = phi'(s)/s`, continuous extension at 0.
    pub fn secant(&self, s: f64) -> f64 {
        match *self {
            BaseProfile::Newtonian { mu } => mu,
            BaseProfile::PowerLaw { mu1, mu2, p } => shifted_pow(mu1, mu2, s, 0.5 * (p - 2.0)),
            BaseProfile::Carreau {
                mu_inf,
                mu1,
                mu2,
                p,
            } => mu_inf + shifted_pow(mu1, mu2, s, 0.5 * (p - 2.0)),
            BaseProfile::Bingham { mu, tau0, eps } => mu + tau0 / (s * s + eps * eps).sqrt(),
        }
    }

    /// `phi''(s)`.
    pub fn curvature(&self, s: f64) -> f64 {
        match *self {
            BaseProfile::Newtonian { mu } => mu,
            BaseProfile::PowerLaw { mu1, mu2, p } => power_curvature(mu1, mu2, p, s),
            BaseProfile::Carreau {
                mu_inf,
                mu1,
                mu2,
                p,
            } => mu_inf + power_curvature(mu1, mu2, p, s),
            BaseProfile::Bingham { mu, tau0, eps } => {
                let q = s * s + eps * eps;
                mu + tau0 * eps * eps / (q * q.sqrt())
            }
        }
    }

    /// Closed-form conjugate where one is implemented.
    pub fn conjugate_closed(&self, sigma: f64) -> Option<f64> {
        match *self {
            BaseProfile::Newtonian { mu } => Some(sigma * sigma / (2.0 * mu)),
            BaseProfile::PowerLaw { mu1, mu2, p } if mu1 == 0.0 => {
                // phi = c s^p / p  =>  phi* = c^(1-p') sigma^p' / p'
                let c = mu2.powf(0.5 * (p - 2.0));
                let q = p / (p - 1.0);
                Some(c.powf(1.0 - q) * sigma.powf(q) / q)
            }
            BaseProfile::Bingham { mu, tau0, eps } if mu == 0.0 => {
                if sigma < tau0 {
                    let r = (tau0 - sigma) * (tau0 + sigma);
                    // tau0 eps - eps sqrt(tau0^2 - sigma^2)
                    Some(eps * sigma * sigma / (tau0 + r.sqrt()))
                } else {
                    Some(f64::INFINITY)
                }
            }
            _ => None,
        }
    }

    pub fn has_closed_conjugate(&self) -> bool {
        self.conjugate_closed(1.0).is_some()
    }

    /// Exponent `p` with `phi(s) ~ s^p` at infinity.
    pub fn growth_exponent(&self) -> f64 {
        match *self {
            BaseProfile::Newtonian { .. } => 2.0,
            BaseProfile::PowerLaw { p, .. } => p,
            BaseProfile::Carreau { mu_inf, p, .. } => {
                if mu_inf > 0.0 {
                    p.max(2.0)
                } else {
                    p
                }
            }
            BaseProfile::Bingham { mu, .. } => {
                if mu > 0.0 {
                    2.0
                } else {
                    1.0
                }
            }
        }
    }
}

fn power_curvature(mu1: f64, mu2: f64, p: f64, s: f64) -> f64 {
    // (mu1 + mu2 s^2)^((p-4)/2) (mu1 + (p-1) mu2 s^2)
    let base = mu1 + mu2 * s * s;
    if base == 0.0 {
        return if p > 2.0 {
            0.0
        } else if p == 2.0 {
            1.0
        } else {
            f64::INFINITY
        };
    }
    base.powf(0.5 * (p - 4.0)) * (mu1 + (p - 1.0) * mu2 * s * s)
}

/// Base profile composed with an optional Moreau-Yosida envelope of parameter
/// `lambda`: `phi_lambda(s) = min_r phi(r) + (s - r)^2 / (2 lambda)`.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct RadialProfile {
    pub base: BaseProfile,
    pub smoothing: f64,
}

impl RadialProfile {
    pub fn new(base: BaseProfile, smoothing: f64) -> Self {
        Self { base, smoothing }
    }

    /// Proximal radius `r` solving `r + lambda phi'(r) = s`.
    fn prox(&self, s: f64) -> f64 {
        let lam = self.smoothing;
        if s == 0.0 {
            return 0.0;
        }
        let g = |r: f64| r + lam * self.base.slope(r) - s;
        let (mut lo, mut hi) = (0.0, s);
        let mut r = s / (1.0 + lam * self.base.secant(s));
        for _ in 0..200 {
            let gr = g(r);
            if gr == 0.0 {
                return r;
            }
            if gr < 0.0 {
                lo = r;
            } else {
                hi = r;
            }
            let dg = 1.0 + lam * self.base.curvature(r);
            let mut next = r - gr / dg;
            if !(next > lo && next < hi) || !dg.is_finite() {
                next = 0.5 * (lo + hi);
            }
            if (next - r).abs() <= 2.0 * f64::EPSILON * r.abs() || hi - lo <= f64::EPSILON * hi {
                return next;
            }
            r = next;
        }
        r
    }

    pub fn value(&self, s: f64) -> f64 {
        if self.smoothing == 0.0 {
            return self.base.value(s);
        }
        let r = self.prox(s);
        self.base.value(r) + (s - r) * (s - r) / (2.0 * self.smoothing)
    }

    pub fn slope(&self, s: f64) -> f64 {
        if self.smoothing == 0.0 {
            return self.base.slope(s);
        }
        self.base.slope(self.prox(s))
    }

    pub fn secant(&self, s: f64) -> f64 {
        if self.smoothing == 0.0 {
            return self.base.secant(s);
        }
        if s == 0.0 {
            let c = self.base.curvature(0.0);
            return if c.is_finite() {
                c / (1.0 + self.smoothing * c)
            } else {
                1.0 / self.smoothing
            };
        }
        self.slope(s) / s
    }

    pub fn curvature(&self, s: f64) -> f64 {
        if self.smoothing == 0.0 {
            return self.base.curvature(s);
        }
        let c = self.base.curvature(self.prox(s));
        if c.is_finite() {
            c / (1.0 + self.smoothing * c)
        } else {
            1.0 / self.smoothing
        }
    }

    pub fn conjugate_closed(&self, sigma: f64) -> Option<f64> {
        self.base
            .conjugate_closed(sigma)
            .map(|c| c + 0.5 * self.smoothing * sigma * sigma)
    }

    pub fn conjugate_numeric(&self, sigma: f64) -> f64 {
        radial_conjugate(self, sigma)
    }

    /// `phi(r) + phi*(sigma) - sigma r`, written as the convexity defect
    /// `phi(r) - phi(s) - sigma (r - s)` at the maximizer `s` of the conjugate
    /// so that nothing of size `phi(r)` cancels when the gap is small.
    pub fn young_gap(&self, r: f64, sigma: f64) -> f64 {
        match radial_argmax(self, sigma) {
            Some(s) => self.value(r) - self.value(s) - sigma * (r - s),
            None => f64::INFINITY,
        }
    }

    pub fn growth_exponent(&self) -> f64 {
        if self.smoothing > 0.0 {
            // the envelope has at most quadratic growth
            self.base.growth_exponent().min(2.0)
        } else {
            self.base.growth_exponent()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_slope(p: &RadialProfile, s: f64) -> f64 {
        let h = 1e-5 * (1.0 + s);
        (p.value(s + h) - p.value(s - h)) / (2.0 * h)
    }

    #[test]
    fn slopes_match_finite_differences() {
        let cases = [
            BaseProfile::Newtonian { mu: 1.3 },
            BaseProfile::PowerLaw {
                mu1: 0.0,
                mu2: 2.0,
                p: 3.0,
            },
            BaseProfile::PowerLaw {
                mu1: 0.5,
                mu2: 1.0,
                p: 1.5,
            },
            BaseProfile::Carreau {
                mu_inf: 0.1,
                mu1: 1.0,
                mu2: 4.0,
                p: 1.4,
            },
            BaseProfile::Bingham {
                mu: 0.2,
                tau0: 1.0,
                eps: 0.1,
            },
        ];
        for base in cases {
            for lam in [0.0, 0.3] {
                let prof = RadialProfile::new(base.clone(), lam);
                for s in [0.05, 0.7, 2.5] {
                    let fd = fd_slope(&prof, s);
                    let an = prof.slope(s);
                    assert!((fd - an).abs() < 1e-7 * (1.0 + an.abs()), "{base:?} {lam} {s}: {fd} vs {an}");
                }
            }
        }
    }

    #[test]
    fn carreau_antiderivative_matches_quadrature() {
        let (mu_inf, mu1, mu2, p) = (0.05, 0.8, 3.0, 2.6);
        let prof = BaseProfile::Carreau {
            mu_inf,
            mu1,
            mu2,
            p,
        };
        for s in [1e-3, 0.3, 4.0, 50.0] {
            let exact = 0.5 * mu_inf * s * s
                + crate::numerics::integrate(|r| (mu1 + mu2 * r * r).powf(0.5 * (p - 2.0)) * r, 0.0, s, 1e-16 * (1.0 + s * s));
            let got = prof.value(s);
            assert!((got - exact).abs() <= 1e-12 * exact.abs().max(1e-300), "{s}: {got} vs {exact}");
        }
    }

    #[test]
    fn power_law_value_mu1_zero() {
        let prof = BaseProfile::PowerLaw {
            mu1: 0.0,
            mu2: 1.0,
            p: 3.0,
        };
        assert!((prof.value(2.0) - 8.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn envelope_never_exceeds_base() {
        let base = BaseProfile::PowerLaw {
            mu1: 0.0,
            mu2: 1.0,
            p: 1.5,
        };
        let env = RadialProfile::new(base.clone(), 0.1);
        for s in [0.0, 0.01, 1.0, 10.0] {
            assert!(env.value(s) <= base.value(s) + 1e-15);
        }
        assert!(env.secant(0.0).is_finite());
    }
}
