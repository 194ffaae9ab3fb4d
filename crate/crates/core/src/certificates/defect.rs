use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rheology::{upper_len, upper_pairs, SymTensor};
use crate::spectral::SpectralVelocity;

/// Cell-variance estimate of the Reynolds defect on a coarse partition.
///
/// Cell `c` holds `avg(v (x) v) - avg(v) (x) avg(v)` over the fine nodes in
/// that cell, which is a covariance matrix and therefore positive semidefinite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectEstimate {
    pub dim: usize,
    pub fine_n: usize,
    pub coarse_n: usize,
    pub time: f64,
    /// Upper-triangle entries per cell, cells in row-major order.
    pub cells: Vec<Vec<f64>>,
    pub min_eigenvalues: Vec<f64>,
    pub min_eigenvalue: f64,
    /// `int trace` over the torus.
    pub trace_total: f64,
}

impl DefectEstimate {
    pub fn cell_tensor(&self, c: usize) -> SymTensor {
        SymTensor::from_upper(self.dim, &self.cells[c])
    }

    /// Volume of one coarse cell.
    pub fn cell_volume(&self) -> f64 {
        (2.0 / self.coarse_n as f64).powi(self.dim as i32)
    }

    /// Lower corner of cell `c`.
    pub fn cell_origin(&self, c: usize) -> [f64; 3] {
        let mut x = [0.0; 3];
        let mut rest = c;
        for a in (0..self.dim).rev() {
            x[a] = -1.0 + 2.0 * (rest % self.coarse_n) as f64 / self.coarse_n as f64;
            rest /= self.coarse_n;
        }
        x
    }

    /// Cone condition `min_eig >= -1e-10 (1 + trace_total)`.
    pub fn is_psd(&self) -> bool {
        self.min_eigenvalue >= -1e-10 * (1.0 + self.trace_total)
    }

    /// A zero defect on the given partition.
    pub fn zero(dim: usize, fine_n: usize, coarse_n: usize, time: f64) -> Self {
        let cells = coarse_n.pow(dim as u32);
        Self {
            dim,
            fine_n,
            coarse_n,
            time,
            cells: vec![vec![0.0; upper_len(dim)]; cells],
            min_eigenvalues: vec![0.0; cells],
            min_eigenvalue: 0.0,
            trace_total: 0.0,
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let names: Vec<String> = upper_pairs(self.dim)
            .iter()
            .map(|(i, j)| format!("m{}{}", i + 1, j + 1))
            .collect();
        writeln!(w, "cell_index,{},min_eig", names.join(","))?;
        for (c, vals) in self.cells.iter().enumerate() {
            let entries: Vec<String> = vals.iter().map(|v| format!("{v:e}")).collect();
            writeln!(w, "{c},{},{:e}", entries.join(","), self.min_eigenvalues[c])?;
        }
        Ok(())
    }
}

fn check_partition(fine_n: usize, coarse_n: usize) -> Result<()> {
    if coarse_n == 0 || !fine_n.is_multiple_of(coarse_n) {
        return Err(Error::Configuration(format!(
            "coarse resolution {coarse_n} does not divide the fine resolution {fine_n}"
        )));
    }
    Ok(())
}

/// Cell-variance defect of nodal data `phys[c][node]` on an `N^d` grid.
pub(crate) fn defect_from_nodal(
    phys: &[Vec<f64>],
    dim: usize,
    fine_n: usize,
    coarse_n: usize,
    time: f64,
) -> Result<DefectEstimate> {
    check_partition(fine_n, coarse_n)?;
    let r = fine_n / coarse_n;
    let ncells = coarse_n.pow(dim as u32);
    let per_cell = r.pow(dim as u32) as f64;
    let pairs = upper_pairs(dim);
    let mut mean = vec![[0.0f64; 3]; ncells];
    let mut second = vec![[0.0f64; 6]; ncells];
    let total = fine_n.pow(dim as u32);
    for node in 0..total {
        let mut rest = node;
        let mut cell = 0;
        let mut stride = 1;
        for _ in 0..dim {
            let j = rest % fine_n;
            rest /= fine_n;
            cell += (j / r) * stride;
            stride *= coarse_n;
        }
        for c in 0..dim {
            mean[cell][c] += phys[c][node];
        }
        for (m, &(i, j)) in pairs.iter().enumerate() {
            second[cell][m] += phys[i][node] * phys[j][node];
        }
    }
    let cell_vol = (2.0 / coarse_n as f64).powi(dim as i32);
    let mut cells = Vec::with_capacity(ncells);
    let mut mins = Vec::with_capacity(ncells);
    let mut trace_total = 0.0;
    for cell in 0..ncells {
        let mu: Vec<f64> = (0..dim).map(|c| mean[cell][c] / per_cell).collect();
        let vals: Vec<f64> = pairs
            .iter()
            .enumerate()
            .map(|(m, &(i, j))| second[cell][m] / per_cell - mu[i] * mu[j])
            .collect();
        let t = SymTensor::from_upper(dim, &vals);
        trace_total += t.trace() * cell_vol;
        mins.push(t.min_eigenvalue());
        cells.push(vals);
    }
    let min_eigenvalue = mins.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(DefectEstimate {
        dim,
        fine_n,
        coarse_n,
        time,
        cells,
        min_eigenvalues: mins,
        min_eigenvalue,
        trace_total,
    })
}

/// Cell-variance estimator of `v_fine` over the `coarse_n^d` partition.
pub fn estimate_defect(v_fine: &SpectralVelocity, coarse_n: usize) -> Result<DefectEstimate> {
    let grid = &v_fine.grid;
    check_partition(grid.n(), coarse_n)?;
    defect_from_nodal(&v_fine.to_physical(), grid.dim(), grid.n(), coarse_n, v_fine.time)
}

/// Two-grid estimator: the cell variance of `v_fine - v_coarse`, where the
/// coarse state is spectrally interpolated to the fine grid. It vanishes when
/// the coarse run already reproduces the fine one.
pub fn estimate_two_grid_defect(
    v_fine: &SpectralVelocity,
    v_coarse: &SpectralVelocity,
) -> Result<DefectEstimate> {
    let (nf, nc) = (v_fine.grid.n(), v_coarse.grid.n());
    check_partition(nf, nc)?;
    if v_fine.dim() != v_coarse.dim() {
        return Err(Error::Input("fine and coarse states differ in dimension".into()));
    }
    if (v_fine.time - v_coarse.time).abs() > 1e-9 * (1.0 + v_fine.time.abs()) {
        return Err(Error::Input(format!(
            "fine state at t = {} but coarse state at t = {}",
            v_fine.time, v_coarse.time
        )));
    }
    let diff = v_fine.axpy(-1.0, &v_coarse.resample(nf)?);
    estimate_defect(&diff, nc)
}

/// Two-grid estimator of a single resolution: the cell variance of the
/// spectral tail `v - P_coarse v` on the `coarse_n` partition.
pub fn estimate_tail_defect(v: &SpectralVelocity, coarse_n: usize) -> Result<DefectEstimate> {
    check_partition(v.grid.n(), coarse_n)?;
    let truncated = v.resample(coarse_n)?;
    estimate_two_grid_defect(v, &truncated)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{seeded_random_smooth, TorusGrid};
    use std::f64::consts::PI;

    #[test]
    fn constant_per_cell_is_zero() {
        let (n, nc) = (8, 4);
        let mut phys = vec![vec![0.0; n * n]; 2];
        for node in 0..n * n {
            let (i, j) = (node / n, node % n);
            phys[0][node] = ((i / 2) * 7 + j / 2) as f64;
            phys[1][node] = -(((j / 2) * 3) as f64);
        }
        let d = defect_from_nodal(&phys, 2, n, nc, 0.0).unwrap();
        assert!(d.cells.iter().flatten().all(|v| v.abs() < 1e-12));
        assert_eq!(d.trace_total, 0.0);
    }

    #[test]
    fn high_mode_defect_is_full_second_moment() {
        let g = TorusGrid::new(2, 32, 2.0 / 3.0).unwrap();
        // v = (0, sin(8 pi x)): every coarse cell of width 1/4 holds one period
        let phys = vec![
            vec![0.0; g.len()],
            (0..g.len()).map(|i| (8.0 * PI * g.node(i)[0]).sin()).collect(),
        ];
        let v = SpectralVelocity::from_physical(&g, &phys).unwrap();
        let d = estimate_defect(&v, 8).unwrap();
        // int_{[-1,1]^2} sin^2(8 pi x) = 2
        assert!((d.trace_total - 2.0).abs() < 1e-10 * 2.0, "{}", d.trace_total);
        assert!(d.is_psd());
    }

    #[test]
    fn indivisible_partition_rejected() {
        let g = TorusGrid::new(2, 16, 2.0 / 3.0).unwrap();
        let v = SpectralVelocity::zeros(&g);
        assert!(matches!(estimate_defect(&v, 6), Err(Error::Configuration(_))));
    }

    #[test]
    fn tail_defect_vanishes_for_band_limited_data() {
        let g = TorusGrid::new(2, 32, 2.0 / 3.0).unwrap();
        let v = seeded_random_smooth(&g, 9, 3.0, 4, 1.0).unwrap();
        let d = estimate_tail_defect(&v, 16).unwrap();
        assert!(d.trace_total.abs() < 1e-28);
        let rough = seeded_random_smooth(&g, 9, 0.5, 10, 1.0).unwrap();
        assert!(estimate_tail_defect(&rough, 16).unwrap().trace_total > 1e-3);
    }

    #[test]
    fn csv_columns() {
        let d = DefectEstimate::zero(3, 8, 2, 0.0);
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("cell_index,m11,m12,m13,m22,m23,m33,min_eig\n"));
        assert_eq!(s.lines().count(), 9);
    }
}
