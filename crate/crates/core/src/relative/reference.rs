use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::rheology::{RheologyModel, SymTensor};
use crate::spectral::{taylor_green, Complex64, Forcing, SpectralVelocity, TorusGrid};

/// `U(t, x) = a(t) (sin pi x cos pi y, -cos pi x sin pi y)` with
/// `a(t) = A exp(-decay t)`, driven by the body force that makes it an exact
/// solution for the given isotropic rheology.
///
/// Along this field `DU = a pi cos(pi x) cos(pi y) diag(1, -1)`, so
/// `div S(DU) = -pi^2 a phi''(|DU|) U/a` and the convective term is the
/// gradient of `(a^2/4)(cos 2 pi x + cos 2 pi y)`; hence the force is
/// `(pi^2 phi''(|DU|) - decay) U`.
#[derive(Clone, Debug)]
pub struct ManufacturedFlow {
    model: RheologyModel,
    amplitude: f64,
    decay: f64,
    unforced: bool,
}

impl ManufacturedFlow {
    pub fn new(model: RheologyModel, amplitude: f64, decay: f64) -> Result<Self> {
        if !model.is_isotropic() {
            return Err(Error::Configuration(
                "manufactured references need an isotropic rheology".into(),
            ));
        }
        if model.required_dim().is_some_and(|d| d != 2) {
            return Err(Error::Configuration("manufactured references are two-dimensional".into()));
        }
        if !(amplitude.is_finite() && decay.is_finite()) {
            return Err(Error::Configuration("manufactured amplitude and decay must be finite".into()));
        }
        Ok(Self {
            model,
            amplitude,
            decay,
            unforced: false,
        })
    }

    /// The freely decaying Newtonian vortex, `decay = mu pi^2`, with no force.
    pub fn taylor_green(mu: f64, amplitude: f64) -> Result<Self> {
        let mut flow = Self::new(RheologyModel::newtonian(mu)?, amplitude, mu * PI * PI)?;
        flow.unforced = true;
        Ok(flow)
    }

    pub fn model(&self) -> &RheologyModel {
        &self.model
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    pub fn is_unforced(&self) -> bool {
        self.unforced
    }

    pub fn amplitude_at(&self, t: f64) -> f64 {
        self.amplitude * (-self.decay * t).exp()
    }

    fn unit(x: [f64; 3]) -> [f64; 2] {
        let (sx, cx) = (PI * x[0]).sin_cos();
        let (sy, cy) = (PI * x[1]).sin_cos();
        [sx * cy, -cx * sy]
    }

    pub fn velocity_at(&self, t: f64, x: [f64; 3]) -> [f64; 2] {
        let a = self.amplitude_at(t);
        let u = Self::unit(x);
        [a * u[0], a * u[1]]
    }

    /// `d_j U_i` as `[[d_x U_1, d_y U_1], [d_x U_2, d_y U_2]]`.
    pub fn gradient_at(&self, t: f64, x: [f64; 3]) -> [[f64; 2]; 2] {
        let a = self.amplitude_at(t) * PI;
        let (sx, cx) = (PI * x[0]).sin_cos();
        let (sy, cy) = (PI * x[1]).sin_cos();
        [[a * cx * cy, -a * sx * sy], [a * sx * sy, -a * cx * cy]]
    }

    fn strain_at(&self, t: f64, x: [f64; 3]) -> SymTensor {
        let g = self.gradient_at(t, x);
        SymTensor::diag(&[g[0][0], g[1][1]])
    }

    pub fn stress_at(&self, t: f64, x: [f64; 3]) -> SymTensor {
        self.model.stress_unchecked(&self.strain_at(t, x))
    }

    /// Zero-mean pressure.
    pub fn pressure_at(&self, t: f64, x: [f64; 3]) -> f64 {
        let a = self.amplitude_at(t);
        0.25 * a * a * ((2.0 * PI * x[0]).cos() + (2.0 * PI * x[1]).cos())
    }

    pub fn force_at(&self, t: f64, x: [f64; 3]) -> [f64; 2] {
        if self.unforced {
            return [0.0; 2];
        }
        let kappa = self.model.tangent_modulus(&self.strain_at(t, x));
        let u = self.velocity_at(t, x);
        let c = PI * PI * kappa - self.decay;
        [c * u[0], c * u[1]]
    }

    /// The vortex at time `t`, exact on any grid that retains `|k| = 1`.
    pub fn velocity(&self, grid: &TorusGrid, t: f64) -> Result<SpectralVelocity> {
        if grid.dim() != 2 {
            return Err(Error::Configuration("manufactured references are two-dimensional".into()));
        }
        let mut v = taylor_green(grid, self.amplitude_at(t))?;
        v.time = t;
        Ok(v)
    }
}

impl Forcing for ManufacturedFlow {
    fn spectral(&self, grid: &TorusGrid, t: f64) -> Result<Option<Vec<Vec<Complex64>>>> {
        if self.unforced {
            return Ok(None);
        }
        if grid.dim() != 2 {
            return Err(Error::Configuration("manufactured forcing is two-dimensional".into()));
        }
        let mut phys = vec![vec![0.0; grid.len()]; 2];
        for i in 0..grid.len() {
            let f = self.force_at(t, grid.node(i));
            phys[0][i] = f[0];
            phys[1][i] = f[1];
        }
        Ok(Some(phys.iter().map(|p| grid.to_spectral(p)).collect()))
    }
}

/// Snapshots of a resolved run at increasing times.
#[derive(Clone, Debug)]
pub struct FineRun {
    snapshots: Vec<SpectralVelocity>,
}

impl FineRun {
    pub fn new(snapshots: Vec<SpectralVelocity>) -> Result<Self> {
        let Some(first) = snapshots.first() else {
            return Err(Error::Input("a fine-run reference needs at least one snapshot".into()));
        };
        if snapshots.iter().any(|s| s.grid != first.grid) {
            return Err(Error::Input("reference snapshots live on different grids".into()));
        }
        if snapshots.windows(2).any(|w| w[1].time <= w[0].time) {
            return Err(Error::Input("reference snapshot times must increase".into()));
        }
        Ok(Self { snapshots })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.snapshots[0].grid
    }

    pub fn snapshots(&self) -> &[SpectralVelocity] {
        &self.snapshots
    }

    /// The stored state at `t`, or the linear interpolant between the
    /// bracketing snapshots.
    pub fn at(&self, t: f64) -> Result<SpectralVelocity> {
        let tol = |s: &SpectralVelocity| 1e-12 * (1.0 + s.time.abs());
        if let Some(s) = self.snapshots.iter().find(|s| (s.time - t).abs() <= tol(s)) {
            let mut out = s.clone();
            out.time = t;
            return Ok(out);
        }
        let j = self.snapshots.partition_point(|s| s.time < t);
        if j == 0 || j == self.snapshots.len() {
            return Err(Error::Input(format!(
                "time {t} lies outside the reference run [{}, {}]",
                self.snapshots[0].time,
                self.snapshots[self.snapshots.len() - 1].time
            )));
        }
        let (a, b) = (&self.snapshots[j - 1], &self.snapshots[j]);
        let w = (t - a.time) / (b.time - a.time);
        let mut out = a.axpy(w, &b.axpy(-1.0, a));
        out.time = t;
        Ok(out)
    }
}

/// Strong solution the coarse runs are compared with.
#[derive(Clone, Debug)]
pub enum ReferenceSolution {
    Manufactured(ManufacturedFlow),
    FineRun(FineRun),
}

impl ReferenceSolution {
    pub fn source(&self) -> &'static str {
        match self {
            ReferenceSolution::Manufactured(_) => "manufactured",
            ReferenceSolution::FineRun(_) => "fine_run",
        }
    }

    /// Resolution the reference lives on, if it is grid-bound.
    pub fn native_n(&self) -> Option<usize> {
        match self {
            ReferenceSolution::Manufactured(_) => None,
            ReferenceSolution::FineRun(r) => Some(r.grid().n()),
        }
    }

    /// `U(t)` represented on `grid`.
    pub fn velocity_on(&self, grid: &TorusGrid, t: f64) -> Result<SpectralVelocity> {
        match self {
            ReferenceSolution::Manufactured(m) => m.velocity(grid, t),
            ReferenceSolution::FineRun(r) => {
                let u = r.at(t)?;
                if &u.grid == grid {
                    Ok(u)
                } else {
                    u.resample_to(grid)
                }
            }
        }
    }

    /// Body force of the reference problem.
    pub fn forcing(&self) -> Option<&dyn Forcing> {
        match self {
            ReferenceSolution::Manufactured(m) if !m.is_unforced() => Some(m),
            _ => None,
        }
    }
}
