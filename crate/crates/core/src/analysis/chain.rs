use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lifetime::{least_squares, photon_lifetime, LifetimeResult};
use crate::dynamics::{decay_protocol, DriveSpec, SampleGrid};
use crate::error::Result;
use crate::model::{build_chain_model, ChainSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainPoint {
    pub n: usize,
    pub lifetime: LifetimeResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainScaling {
    pub points: Vec<ChainPoint>,
    /// Least-squares `t_1e` vs `N` over points with a crossing; needs two.
    pub fit: Option<LinearFit>,
}

/// Lifetime of the last cavity of one chain after resonant steady-state
/// excitation through the first cavity's port.
pub fn chain_end_lifetime(spec: &ChainSpec, grid: &SampleGrid) -> Result<LifetimeResult> {
    let model = build_chain_model(spec, spec.omega())?;
    let drive = DriveSpec::new(0, C64::new(1.0, 0.0), spec.omega())?;
    let run = decay_protocol(&model, &drive, spec.n() - 1, grid)?;
    photon_lifetime(&run.trajectory, spec.n() - 1)
}

/// End-cavity lifetime for each chain length, with a linear fit against `N`.
pub fn chain_lifetime_scaling(
    base: &ChainSpec,
    n_values: &[usize],
    grid: &SampleGrid,
) -> Result<ChainScaling> {
    let points = n_values
        .par_iter()
        .map(|&n| {
            let spec = base.resized(n)?;
            chain_end_lifetime(&spec, grid).map(|lifetime| ChainPoint { n, lifetime })
        })
        .collect::<Result<Vec<_>>>()?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter_map(|p| p.lifetime.t_1e.map(|t| (p.n as f64, t)))
        .unzip();
    let fit = (xs.len() >= 2).then(|| {
        let (slope, intercept, r_squared) = least_squares(&xs, &ys);
        LinearFit {
            slope,
            intercept,
            r_squared,
        }
    });
    Ok(ChainScaling { points, fit })
}
