use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::defect::DefectEstimate;
use crate::error::{Error, Result};
use crate::numerics::cumulative_quadratic;
use crate::rheology::RheologyModel;
use crate::spectral::{unprojected_rhs, Complex64, Forcing, SpectralVelocity};

/// Default per-axis bound on test wavenumbers.
pub const DEFAULT_TEST_CUTOFF: i64 = 8;

/// Largest violations of the weak formulation over Fourier test functions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakFormResidual {
    /// Tests are `a exp(i pi k.x)` with `0 < max_j |k_j| <= cutoff`, `a` a unit vector orthogonal to `k`.
    pub cutoff: i64,
    pub n_tests: usize,
    /// `max |int v . grad psi|` over scalar tests `psi = exp(-i pi k.x)` and snapshots.
    pub incompressibility_residual: f64,
    /// `max |int v(t).phi - int v(0).phi - int_0^t (...) ds|` over tests and snapshot times.
    pub momentum_residual: f64,
    pub worst_time: f64,
    pub worst_mode: [i64; 3],
}

/// Unit vectors spanning the plane orthogonal to `k`.
fn transverse_basis(k: [f64; 3], dim: usize) -> Vec<[f64; 3]> {
    let kn = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
    let u = [k[0] / kn, k[1] / kn, k[2] / kn];
    if dim == 2 {
        return vec![[-u[1], u[0], 0.0]];
    }
    let axis = (0..3)
        .min_by(|&a, &b| u[a].abs().total_cmp(&u[b].abs()))
        .expect("three axes");
    let mut e = [0.0; 3];
    e[axis] = 1.0;
    let dot = u[axis];
    let mut a1 = [e[0] - dot * u[0], e[1] - dot * u[1], e[2] - dot * u[2]];
    let n1 = (a1[0] * a1[0] + a1[1] * a1[1] + a1[2] * a1[2]).sqrt();
    a1.iter_mut().for_each(|x| *x /= n1);
    let a2 = [
        u[1] * a1[2] - u[2] * a1[1],
        u[2] * a1[0] - u[0] * a1[2],
        u[0] * a1[1] - u[1] * a1[0],
    ];
    vec![a1, a2]
}

/// `int_cell exp(-i pi k.x) dx` over the axis-aligned cell with lower corner `x0`.
fn cell_exponential_integral(k: [i64; 3], x0: [f64; 3], width: f64, dim: usize) -> Complex64 {
    let mut acc = Complex64::new(1.0, 0.0);
    for a in 0..dim {
        if k[a] == 0 {
            acc *= width;
        } else {
            let w = PI * k[a] as f64;
            let e = |x: f64| Complex64::new((w * x).cos(), -(w * x).sin());
            acc *= (e(x0[a] + width) - e(x0[a])) / Complex64::new(0.0, -w);
        }
    }
    acc
}

/// `int r : grad(conj phi)` for `phi = a exp(i pi k.x)` with `r` piecewise constant per cell.
fn defect_pairing(defect: &DefectEstimate, k: [i64; 3], a: [f64; 3]) -> Complex64 {
    let d = defect.dim;
    let width = 2.0 / defect.coarse_n as f64;
    let kp = [PI * k[0] as f64, PI * k[1] as f64, PI * k[2] as f64];
    let mut acc = Complex64::new(0.0, 0.0);
    for c in 0..defect.cells.len() {
        let m = defect.cell_tensor(c);
        let mut amk = 0.0;
        for i in 0..d {
            for j in 0..d {
                amk += a[i] * m.get(i, j) * kp[j];
            }
        }
        if amk == 0.0 {
            continue;
        }
        let integral = cell_exponential_integral(k, defect.cell_origin(c), width, d);
        acc += Complex64::new(0.0, -amk) * integral;
    }
    acc
}

/// Weak-form residuals of a trajectory given as snapshots at uniform times.
///
/// `defects`, when given, supplies one defect estimate per snapshot whose
/// divergence enters the momentum balance; otherwise the defect is zero.
pub fn weak_residuals(
    model: &RheologyModel,
    snapshots: &[SpectralVelocity],
    force: Option<&dyn Forcing>,
    cutoff: i64,
    defects: Option<&[DefectEstimate]>,
) -> Result<WeakFormResidual> {
    if snapshots.len() < 2 {
        return Err(Error::Input(format!(
            "weak residuals need at least two snapshots, got {}",
            snapshots.len()
        )));
    }
    let grid = &snapshots[0].grid;
    if snapshots.iter().any(|s| &s.grid != grid) {
        return Err(Error::Input("snapshots live on different grids".into()));
    }
    let times: Vec<f64> = snapshots.iter().map(|s| s.time).collect();
    let dt = times[1] - times[0];
    if !(dt > 0.0) || times.windows(2).any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1e-300)) {
        return Err(Error::Input("snapshots are not at uniform increasing times".into()));
    }
    if let Some(ds) = defects {
        if ds.len() != snapshots.len() {
            return Err(Error::Input(format!(
                "{} defect estimates for {} snapshots",
                ds.len(),
                snapshots.len()
            )));
        }
    }
    if cutoff < 1 {
        return Err(Error::Configuration("test cutoff must be >= 1".into()));
    }
    let d = grid.dim();
    let vol = grid.volume();
    let kc = cutoff.min(grid.kmax());

    // test wavenumbers on one half space (the other half gives conjugate identities)
    let mut tests: Vec<(usize, [i64; 3])> = Vec::new();
    for idx in 0..grid.len() {
        let k = grid.wavenumber(idx);
        if (0..d).any(|a| k[a].abs() > kc) {
            continue;
        }
        let first = k.iter().find(|&&x| x != 0);
        if first.is_some_and(|&x| x > 0) {
            tests.push((idx, k));
        }
    }

    let rhs: Vec<Vec<Vec<Complex64>>> = snapshots
        .iter()
        .map(|s| unprojected_rhs(model, s, force))
        .collect::<Result<_>>()?;

    let mut incompressibility: f64 = 0.0;
    let mut momentum: f64 = 0.0;
    let mut worst_time = times[0];
    let mut worst_mode = [0i64; 3];
    let mut n_tests = 0;
    for &(idx, k) in &tests {
        let kp = grid.wavevector(idx);
        for s in snapshots {
            let div: Complex64 = (0..d).map(|c| s.coeffs[c][idx] * kp[c]).sum();
            incompressibility = incompressibility.max(vol * div.norm());
        }
        for a in transverse_basis(kp, d) {
            n_tests += 1;
            let pair = |coeffs: &[Vec<Complex64>]| -> Complex64 {
                (0..d).map(|c| coeffs[c][idx] * a[c]).sum::<Complex64>() * vol
            };
            let g: Vec<Complex64> = (0..snapshots.len())
                .map(|i| {
                    let mut val = pair(&rhs[i]);
                    if let Some(ds) = defects {
                        val += defect_pairing(&ds[i], k, a);
                    }
                    val
                })
                .collect();
            let re: Vec<f64> = g.iter().map(|z| z.re).collect();
            let im: Vec<f64> = g.iter().map(|z| z.im).collect();
            let (ire, iim) = (cumulative_quadratic(&times, &re), cumulative_quadratic(&times, &im));
            let c0 = pair(&snapshots[0].coeffs);
            for (i, s) in snapshots.iter().enumerate() {
                let lhs = pair(&s.coeffs) - c0;
                let r = (lhs - Complex64::new(ire[i], iim[i])).norm();
                if r > momentum {
                    momentum = r;
                    worst_time = s.time;
                    worst_mode = k;
                }
            }
        }
    }
    Ok(WeakFormResidual {
        cutoff: kc,
        n_tests,
        incompressibility_residual: incompressibility,
        momentum_residual: momentum,
        worst_time,
        worst_mode,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transverse_vectors_are_orthonormal() {
        for k in [[1.0, 2.0, 0.0], [0.3, -1.0, 2.0], [0.0, 0.0, 1.0]] {
            let dim = if k[2] == 0.0 { 2 } else { 3 };
            let basis = transverse_basis(k, dim);
            assert_eq!(basis.len(), dim - 1);
            for (i, a) in basis.iter().enumerate() {
                let dot_k: f64 = (0..3).map(|c| a[c] * k[c]).sum();
                assert!(dot_k.abs() < 1e-14);
                for b in &basis[i..] {
                    let dot: f64 = (0..3).map(|c| a[c] * b[c]).sum();
                    let expected = if std::ptr::eq(a, b) { 1.0 } else { 0.0 };
                    assert!((dot - expected).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn cell_integral_matches_quadrature() {
        let k = [2, -1, 0];
        let x0 = [-0.3, 0.1, 0.0];
        let w = 0.25;
        let exact = cell_exponential_integral(k, x0, w, 2);
        let m = 400;
        let h = w / m as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..m {
            for j in 0..m {
                let x = x0[0] + (i as f64 + 0.5) * h;
                let y = x0[1] + (j as f64 + 0.5) * h;
                let ph = -PI * (2.0 * x - y);
                acc += Complex64::new(ph.cos(), ph.sin()) * h * h;
            }
        }
        assert!((acc - exact).norm() < 1e-6);
    }
}
