use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::field::{seeded_random_smooth, taylor_green, SpectralVelocity};
use super::grid::TorusGrid;
use super::snapshot::read_snapshot;
use crate::error::Result;

pub const DEFAULT_SPECTRAL_DECAY: f64 = 4.0;
pub const DEFAULT_MAX_MODE: i64 = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialData {
    TaylorGreen {
        amplitude: f64,
    },
    SeededRandomSmooth {
        seed: u64,
        spectral_decay: f64,
        max_mode: i64,
        energy: f64,
    },
    /// Snapshot file, truncated or zero-padded to the target grid.
    Snapshot {
        path: PathBuf,
    },
}

impl InitialData {
    pub fn build(&self, grid: &TorusGrid) -> Result<SpectralVelocity> {
        match self {
            InitialData::TaylorGreen { amplitude } => taylor_green(grid, *amplitude),
            InitialData::SeededRandomSmooth {
                seed,
                spectral_decay,
                max_mode,
                energy,
            } => seeded_random_smooth(grid, *seed, *spectral_decay, *max_mode, *energy),
            InitialData::Snapshot { path } => {
                let v = read_snapshot(path, grid.dealias_fraction())?;
                let mut out = v.resample_to(grid)?;
                out.time = 0.0;
                Ok(out)
            }
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            InitialData::SeededRandomSmooth { seed, .. } => Some(*seed),
            _ => None,
        }
    }
}
