use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::profile::{BaseProfile, RadialProfile};
use super::tensor::{upper_len, upper_pairs, SymTensor};

/// Absolute part of the Fenchel-Young tolerance.
pub const GAP_TOL_ABS: f64 = 1e-10;
/// Relative part of the Fenchel-Young tolerance (relative to `F(D) + F*(S)`).
pub const GAP_TOL_REL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RheologyKind {
    Newtonian,
    PowerLaw,
    Carreau,
    BinghamRegularized,
    AnisotropicWrap,
    Euler,
}

impl RheologyKind {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "newtonian" => Self::Newtonian,
            "power_law" => Self::PowerLaw,
            "carreau" => Self::Carreau,
            "bingham_regularized" => Self::BinghamRegularized,
            "anisotropic_wrap" => Self::AnisotropicWrap,
            "euler" => Self::Euler,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Newtonian => "newtonian",
            Self::PowerLaw => "power_law",
            Self::Carreau => "carreau",
            Self::BinghamRegularized => "bingham_regularized",
            Self::AnisotropicWrap => "anisotropic_wrap",
            Self::Euler => "euler",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConjugateMode {
    ClosedForm,
    RadialNumeric,
}

/// Raw model parameters as read from a configuration block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RheologyParams {
    pub kind: RheologyKind,
    /// Newtonian viscosity; Newtonian floor for Carreau and Bingham.
    pub mu: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub p: f64,
    pub tau0: f64,
    pub eps_reg: f64,
    /// Row-major `d^2 x d^2` map on vectorized tensors (anisotropic wrap).
    pub l: Option<Vec<f64>>,
    /// Isotropic potential wrapped by `anisotropic_wrap`.
    pub inner: RheologyKind,
    /// Moreau-Yosida envelope parameter, 0 disables smoothing.
    pub smoothing: f64,
    /// `None` picks the closed form whenever one exists.
    pub conjugate_mode: Option<ConjugateMode>,
    /// Spatial dimension, used by `euler` to size the zero map.
    pub dim: usize,
}

impl Default for RheologyParams {
    fn default() -> Self {
        Self {
            kind: RheologyKind::Newtonian,
            mu: 1.0,
            mu1: 0.0,
            mu2: 1.0,
            p: 2.0,
            tau0: 0.0,
            eps_reg: 1e-3,
            l: None,
            inner: RheologyKind::Newtonian,
            smoothing: 0.0,
            conjugate_mode: None,
            dim: 2,
        }
    }
}

/// Composition `F_L(D) = F(A D)` with `A = sym o L` restricted to symmetric
/// tensors, stored in an orthonormal basis of the symmetric tensors.
#[derive(Clone, Debug)]
struct LinearWrap {
    dim: usize,
    a: DMatrix<f64>,
    at: DMatrix<f64>,
    at_pinv: DMatrix<f64>,
}

fn sym_basis(dim: usize) -> Vec<SymTensor> {
    upper_pairs(dim)
        .iter()
        .map(|&(i, j)| {
            let mut full = vec![0.0; dim * dim];
            if i == j {
                full[i * dim + i] = 1.0;
            } else {
                let w = std::f64::consts::FRAC_1_SQRT_2;
                full[i * dim + j] = w;
                full[j * dim + i] = w;
            }
            SymTensor::sym_of(dim, &full)
        })
        .collect()
}

impl LinearWrap {
    fn new(l: &[f64]) -> Result<Self> {
        let dim = match l.len() {
            16 => 2,
            81 => 3,
            n => {
                return Err(Error::Configuration(format!(
                    "rheology.L must have 16 (d=2) or 81 (d=3) entries, got {n}"
                )))
            }
        };
        if l.iter().any(|v| !v.is_finite()) {
            return Err(Error::Configuration("rheology.L has non-finite entries".into()));
        }
        let basis = sym_basis(dim);
        let m = basis.len();
        let dd = dim * dim;
        let mut a = DMatrix::zeros(m, m);
        for (col, b) in basis.iter().enumerate() {
            let v = b.to_vec_full();
            let mut lv = vec![0.0; dd];
            for r in 0..dd {
                lv[r] = (0..dd).map(|c| l[r * dd + c] * v[c]).sum();
            }
            let image = SymTensor::sym_of(dim, &lv);
            for (row, e) in basis.iter().enumerate() {
                a[(row, col)] = e.contract(&image);
            }
        }
        let at = a.transpose();
        let at_pinv = at
            .clone()
            .pseudo_inverse(1e-13)
            .map_err(|e| Error::Configuration(format!("pseudo-inverse of L failed: {e}")))?;
        Ok(Self {
            dim,
            a,
            at,
            at_pinv,
        })
    }

    /// Minimal-norm `m` with `A^T m = sc`, `None` when `sc` leaves the range.
    fn dual_preimage(&self, sc: &DVector<f64>) -> Option<DVector<f64>> {
        // the SVD pseudo-inverse alone leaves ~1e-10 relative residuals; two
        // refinement sweeps bring consistent systems to round-off
        let mut m = &self.at_pinv * sc;
        for _ in 0..2 {
            m += &self.at_pinv * (sc - &self.at * &m);
        }
        let residual = (&self.at * &m - sc).norm();
        (residual <= 1e-10 * sc.norm()).then_some(m)
    }

    fn coords(&self, t: &SymTensor) -> nalgebra::DVector<f64> {
        let basis = sym_basis(self.dim);
        nalgebra::DVector::from_iterator(basis.len(), basis.iter().map(|b| b.contract(t)))
    }

    fn tensor(&self, c: &nalgebra::DVector<f64>) -> SymTensor {
        let basis = sym_basis(self.dim);
        basis
            .iter()
            .zip(c.iter())
            .fold(SymTensor::zeros(self.dim), |acc, (b, &x)| acc + x * *b)
    }
}

/// A validated convex dissipation potential `F` on symmetric tensors.
///
/// Isotropic kinds are evaluated through the radial profile `F(D) = phi(|D|)`,
/// with the Newtonian normalization `F(D) = mu |D|^2 / 2` so that
/// `dF(D) = mu D`. Conjugate values may be `f64::INFINITY`.
#[derive(Clone, Debug)]
pub struct RheologyModel {
    params: RheologyParams,
    radial: RadialProfile,
    wrap: Option<LinearWrap>,
    conjugate_mode: ConjugateMode,
}

impl RheologyModel {
    pub fn new(params: RheologyParams) -> Result<Self> {
        let cfg = |m: &str| Err(Error::Configuration(m.to_string()));
        let finite = [
            params.mu,
            params.mu1,
            params.mu2,
            params.p,
            params.tau0,
            params.eps_reg,
            params.smoothing,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return cfg("rheology parameters must be finite");
        }
        if params.smoothing < 0.0 {
            return cfg("rheology.smoothing must be >= 0");
        }
        let base_kind = match params.kind {
            RheologyKind::AnisotropicWrap => params.inner,
            RheologyKind::Euler => RheologyKind::Newtonian,
            k => k,
        };
        let base = match base_kind {
            RheologyKind::Newtonian => {
                let mu = if params.kind == RheologyKind::Euler { 1.0 } else { params.mu };
                if mu <= 0.0 {
                    return cfg("newtonian: mu must be > 0");
                }
                BaseProfile::Newtonian { mu }
            }
            RheologyKind::PowerLaw => {
                if params.p <= 1.0 {
                    return cfg("power_law: p must be > 1");
                }
                if params.mu2 <= 0.0 || params.mu1 < 0.0 {
                    return cfg("power_law: requires mu1 >= 0 and mu2 > 0");
                }
                BaseProfile::PowerLaw {
                    mu1: params.mu1,
                    mu2: params.mu2,
                    p: params.p,
                }
            }
            RheologyKind::Carreau => {
                if params.p <= 1.0 || params.mu1 <= 0.0 || params.mu2 <= 0.0 || params.mu < 0.0 {
                    return cfg("carreau: requires p > 1, mu1 > 0, mu2 > 0, mu >= 0");
                }
                BaseProfile::Carreau {
                    mu_inf: params.mu,
                    mu1: params.mu1,
                    mu2: params.mu2,
                    p: params.p,
                }
            }
            RheologyKind::BinghamRegularized => {
                if params.mu < 0.0 || params.tau0 < 0.0 || params.eps_reg <= 0.0 {
                    return cfg("bingham_regularized: requires mu >= 0, tau0 >= 0, eps_reg > 0");
                }
                if params.mu + params.tau0 <= 0.0 {
                    return cfg("bingham_regularized: mu and tau0 cannot both vanish");
                }
                BaseProfile::Bingham {
                    mu: params.mu,
                    tau0: params.tau0,
                    eps: params.eps_reg,
                }
            }
            RheologyKind::AnisotropicWrap | RheologyKind::Euler => {
                return cfg("anisotropic_wrap: inner potential must be isotropic");
            }
        };
        let radial = RadialProfile::new(base, params.smoothing);
        let wrap = match params.kind {
            RheologyKind::AnisotropicWrap => {
                let l = params
                    .l
                    .as_deref()
                    .ok_or_else(|| Error::Configuration("anisotropic_wrap requires rheology.L".into()))?;
                Some(LinearWrap::new(l)?)
            }
            RheologyKind::Euler => {
                if params.dim != 2 && params.dim != 3 {
                    return cfg("euler: dimension must be 2 or 3");
                }
                let n = params.dim * params.dim;
                Some(LinearWrap::new(&vec![0.0; n * n])?)
            }
            _ => None,
        };
        let closed = radial.base.has_closed_conjugate();
        let conjugate_mode = match params.conjugate_mode {
            Some(ConjugateMode::ClosedForm) if !closed => {
                return cfg("conjugate_mode = closed_form is not available for this model")
            }
            Some(m) => m,
            None if closed => ConjugateMode::ClosedForm,
            None => ConjugateMode::RadialNumeric,
        };
        Ok(Self {
            params,
            radial,
            wrap,
            conjugate_mode,
        })
    }

    pub fn newtonian(mu: f64) -> Result<Self> {
        Self::new(RheologyParams {
            kind: RheologyKind::Newtonian,
            mu,
            ..Default::default()
        })
    }

    pub fn power_law(mu1: f64, mu2: f64, p: f64) -> Result<Self> {
        Self::new(RheologyParams {
            kind: RheologyKind::PowerLaw,
            mu1,
            mu2,
            p,
            ..Default::default()
        })
    }

    pub fn carreau(mu_inf: f64, mu1: f64, mu2: f64, p: f64) -> Result<Self> {
        Self::new(RheologyParams {
            kind: RheologyKind::Carreau,
            mu: mu_inf,
            mu1,
            mu2,
            p,
            ..Default::default()
        })
    }

    pub fn bingham(mu: f64, tau0: f64, eps_reg: f64) -> Result<Self> {
        Self::new(RheologyParams {
            kind: RheologyKind::BinghamRegularized,
            mu,
            tau0,
            eps_reg,
            ..Default::default()
        })
    }

    /// `L = 0`: no viscous dissipation at all.
    pub fn euler(dim: usize) -> Result<Self> {
        Self::new(RheologyParams {
            kind: RheologyKind::Euler,
            dim,
            ..Default::default()
        })
    }

    pub fn anisotropic(inner: RheologyParams, l: Vec<f64>) -> Result<Self> {
        Self::new(RheologyParams {
            kind: RheologyKind::AnisotropicWrap,
            inner: inner.kind,
            l: Some(l),
            ..inner
        })
    }

    /// Same potential with the conjugate evaluated by the numerical Legendre transform.
    pub fn with_numeric_conjugate(&self) -> Self {
        let mut m = self.clone();
        m.conjugate_mode = ConjugateMode::RadialNumeric;
        m.params.conjugate_mode = Some(ConjugateMode::RadialNumeric);
        m
    }

    pub fn params(&self) -> &RheologyParams {
        &self.params
    }

    pub fn kind(&self) -> RheologyKind {
        self.params.kind
    }

    pub fn conjugate_mode(&self) -> ConjugateMode {
        self.conjugate_mode
    }

    pub fn is_isotropic(&self) -> bool {
        self.wrap.is_none()
    }

    /// Dimension imposed by the model (`Some` only for wrapped potentials).
    pub fn required_dim(&self) -> Option<usize> {
        self.wrap.as_ref().map(|w| w.dim)
    }

    /// Effective exponent of `F` at infinity (0 for `L = 0`).
    pub fn growth_exponent(&self) -> f64 {
        match &self.wrap {
            Some(w) if w.a.iter().all(|&v| v == 0.0) => 0.0,
            _ => self.radial.growth_exponent(),
        }
    }

    /// Newtonian part `mu0` that can be integrated exactly by an integrating factor.
    pub fn newtonian_floor(&self) -> f64 {
        if self.wrap.is_some() || self.params.smoothing > 0.0 {
            return 0.0;
        }
        match self.radial.base {
            BaseProfile::Newtonian { mu } => mu,
            BaseProfile::Carreau { mu_inf, .. } => mu_inf,
            BaseProfile::Bingham { mu, .. } => mu,
            BaseProfile::PowerLaw { p, .. } if p == 2.0 => 1.0,
            BaseProfile::PowerLaw { .. } => 0.0,
        }
    }

    fn check_tensor(&self, t: &SymTensor, what: &str) -> Result<()> {
        if !t.is_finite() {
            return Err(Error::Domain(format!("{what} has non-finite entries")));
        }
        if let Some(w) = &self.wrap {
            if t.dim() != w.dim {
                return Err(Error::Domain(format!(
                    "{what} has dimension {}, model expects {}",
                    t.dim(),
                    w.dim
                )));
            }
        }
        Ok(())
    }

    /// Dissipation potential `F(D)`.
    pub fn eval_f(&self, d: &SymTensor) -> Result<f64> {
        self.check_tensor(d, "D")?;
        Ok(self.f_unchecked(d))
    }

    /// Conjugate `F*(S)`; `f64::INFINITY` when the supremum diverges.
    pub fn eval_f_star(&self, s: &SymTensor) -> Result<f64> {
        self.check_tensor(s, "S")?;
        Ok(self.f_star_unchecked(s))
    }

    /// Radial subdifferential selection `mu(|D|) D`; the minimal-norm element 0 at `D = 0`.
    pub fn stress_from_d(&self, d: &SymTensor) -> Result<SymTensor> {
        self.check_tensor(d, "D")?;
        Ok(self.stress_unchecked(d))
    }

    /// `F(D) + F*(S) - S:D`, infinite when `F*(S)` is.
    ///
    /// Evaluated as the radial convexity defect plus the Cauchy-Schwarz
    /// defect `|S||D| (1 - cos)`, both nonnegative, instead of the raw sum.
    pub fn fenchel_young_gap(&self, s: &SymTensor, d: &SymTensor) -> Result<f64> {
        self.check_tensor(s, "S")?;
        self.check_tensor(d, "D")?;
        let (m, ad, rest) = match &self.wrap {
            None => (DVector::from_vec(s.to_vec_full()), DVector::from_vec(d.to_vec_full()), 0.0),
            Some(w) => {
                let sc = w.coords(s);
                let Some(m) = w.dual_preimage(&sc) else {
                    return Ok(f64::INFINITY);
                };
                let ad = &w.a * w.coords(d);
                // m.(A D) equals S:D exactly in exact arithmetic
                let rest = m.dot(&ad) - sc.dot(&w.coords(d));
                (m, ad, rest)
            }
        };
        let (sigma, r) = (m.norm(), ad.norm());
        let radial = self.radial.young_gap(r, sigma);
        if radial.is_infinite() {
            return Ok(f64::INFINITY);
        }
        let aligned = if sigma > 0.0 && r > 0.0 {
            0.5 * sigma * r * (&m / sigma - &ad / r).norm_squared()
        } else {
            0.0
        };
        Ok(radial + aligned + rest)
    }

    /// Tolerance `gap_tol` applicable to a pair with the given `F(D)` and `F*(S)`.
    pub fn gap_tolerance(f: f64, f_star: f64) -> f64 {
        GAP_TOL_ABS + GAP_TOL_REL * (f.abs() + f_star.abs())
    }

    /// Asymptotic function `F_inf(D) = lim F(sD)/s`, Richardson-extrapolated from
    /// `s_max/4, s_max/2, s_max`; `f64::INFINITY` flags superlinear growth.
    pub fn asymptotic_f(&self, d: &SymTensor, s_max: f64) -> Result<f64> {
        self.check_tensor(d, "D")?;
        if !(s_max >= 1e3) {
            return Err(Error::Domain(format!("s_max must be >= 1e3, got {s_max}")));
        }
        if d.norm() == 0.0 {
            return Ok(0.0);
        }
        let ratio = |s: f64| self.f_unchecked(&d.scale(s)) / s;
        let (f1, f2, f3) = (ratio(0.25 * s_max), ratio(0.5 * s_max), ratio(s_max));
        let (d1, d2) = (f2 - f1, f3 - f2);
        // F(sD)/s is nondecreasing for convex F with F(0) = 0; increments that
        // fail to shrink indicate growth rather than convergence
        if d2 > 1e-12 * f3.abs() && d2 >= d1 {
            return Ok(f64::INFINITY);
        }
        let a1 = 2.0 * f3 - f2;
        let a0 = 2.0 * f2 - f1;
        Ok((4.0 * a1 - a0) / 3.0)
    }

    // ---- unchecked kernels used on collocation grids ----

    #[inline]
    pub(crate) fn f_unchecked(&self, d: &SymTensor) -> f64 {
        match &self.wrap {
            None => self.radial.value(d.norm()),
            Some(w) => {
                let ad = &w.a * w.coords(d);
                self.radial.value(ad.norm())
            }
        }
    }

    #[inline]
    pub(crate) fn radial_conjugate_value(&self, sigma: f64) -> f64 {
        match self.conjugate_mode {
            ConjugateMode::ClosedForm => self
                .radial
                .conjugate_closed(sigma)
                .expect("closed form validated at construction"),
            ConjugateMode::RadialNumeric => self.radial.conjugate_numeric(sigma),
        }
    }

    #[inline]
    pub(crate) fn f_star_unchecked(&self, s: &SymTensor) -> f64 {
        match &self.wrap {
            None => self.radial_conjugate_value(s.norm()),
            Some(w) => {
                let Some(m) = w.dual_preimage(&w.coords(s)) else {
                    return f64::INFINITY;
                };
                self.radial_conjugate_value(m.norm())
            }
        }
    }

    #[inline]
    pub(crate) fn stress_unchecked(&self, d: &SymTensor) -> SymTensor {
        match &self.wrap {
            None => {
                let n = d.norm();
                if n == 0.0 {
                    return SymTensor::zeros(d.dim());
                }
                d.scale(self.radial.secant(n))
            }
            Some(w) => {
                let ad = &w.a * w.coords(d);
                let n = ad.norm();
                if n == 0.0 {
                    return SymTensor::zeros(d.dim());
                }
                let inner = ad * self.radial.secant(n);
                w.tensor(&(&w.at * inner))
            }
        }
    }

    /// Secant viscosity `|S|/|D|` (limit value at `D = 0`), used by the CFL bound.
    pub(crate) fn secant_viscosity(&self, d: &SymTensor) -> f64 {
        match &self.wrap {
            None => self.radial.secant(d.norm()),
            Some(w) => {
                let n = d.norm();
                if n == 0.0 {
                    let smax = w.a.singular_values().max();
                    return self.radial.secant(0.0) * smax * smax;
                }
                self.stress_unchecked(d).norm() / n
            }
        }
    }

    /// Tangent modulus `phi''(|D|)` of the isotropic profile.
    pub(crate) fn tangent_modulus(&self, d: &SymTensor) -> f64 {
        match &self.wrap {
            None => self.radial.curvature(d.norm()),
            Some(w) => {
                let smax = w.a.singular_values().max();
                let ad = &w.a * w.coords(d);
                self.radial.curvature(ad.norm()) * smax * smax
            }
        }
    }




    /// Number of independent tensor entries this model acts on, if fixed.
    pub fn upper_len(&self) -> Option<usize> {
        self.required_dim().map(upper_len)
    }
}
