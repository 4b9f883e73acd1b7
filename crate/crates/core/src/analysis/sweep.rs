//! Grid sweeps of photon lifetime over one or two system parameters.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::interference::DIRECT_ZETA;
use super::lifetime::{photon_lifetime, LifetimeResult};
use crate::dynamics::{decay_protocol, evolve_free, DriveSpec, InitialState, SampleGrid};
use crate::error::{Error, Result};
use crate::model::{
    build_chain_model, build_pair_model, effective_coupling, CableSpec, CavityParams, ChainSpec,
    CouplingSpec, LinearModel,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    DeltaPhi,
    Theta,
    G,
    Gamma0l0,
    Gamma1,
    Gamma2,
    N,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::DeltaPhi => "delta_phi",
            SweepParam::Theta => "theta",
            SweepParam::G => "g",
            SweepParam::Gamma0l0 => "gamma0l0",
            SweepParam::Gamma1 => "gamma1",
            SweepParam::Gamma2 => "gamma2",
            SweepParam::N => "n",
        }
    }

    /// Whether values are angles (and so accept the `"<x>pi"` notation).
    pub fn is_angle(self) -> bool {
        matches!(self, SweepParam::DeltaPhi | SweepParam::Theta)
    }

    /// Whether values are rates subject to unit conversion.
    pub fn is_rate(self) -> bool {
        matches!(self, SweepParam::G | SweepParam::Gamma1 | SweepParam::Gamma2)
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "delta_phi" => SweepParam::DeltaPhi,
            "theta" => SweepParam::Theta,
            "g" => SweepParam::G,
            "gamma0l0" => SweepParam::Gamma0l0,
            "gamma1" => SweepParam::Gamma1,
            "gamma2" => SweepParam::Gamma2,
            "n" => SweepParam::N,
            other => {
                return Err(Error::InvalidSweep(format!("unknown sweep parameter `{other}`")))
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

impl SweepAxis {
    pub fn new(param: SweepParam, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidSweep(format!("axis `{param}` has no values")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSweep(format!("axis `{param}` has non-finite values")));
        }
        if param == SweepParam::N && values.iter().any(|v| v.fract() != 0.0 || *v < 0.0) {
            return Err(Error::InvalidSweep("axis `n` needs non-negative integers".into()));
        }
        Ok(Self { param, values })
    }

    /// `points` values evenly covering `[0, 2π)`.
    pub fn full_turn(param: SweepParam, points: usize) -> Result<Self> {
        let step = std::f64::consts::TAU / points as f64;
        Self::new(param, (0..points).map(|k| k as f64 * step).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseSystem {
    Pair {
        cavities: [CavityParams; 2],
        coupling: CouplingSpec,
    },
    Chain(ChainSpec),
}

impl BaseSystem {
    pub fn dim(&self) -> usize {
        match self {
            BaseSystem::Pair { .. } => 2,
            BaseSystem::Chain(c) => c.n(),
        }
    }

    fn supports(&self, param: SweepParam) -> bool {
        match (self, param) {
            (BaseSystem::Pair { coupling, .. }, p) => match coupling {
                CouplingSpec::Direct { .. } => matches!(p, SweepParam::G | SweepParam::DeltaPhi),
                CouplingSpec::Cable(_) => !matches!(p, SweepParam::G | SweepParam::N),
            },
            (BaseSystem::Chain(_), p) => matches!(p, SweepParam::G | SweepParam::N),
        }
    }

    /// Builds the linear model in a frame rotating at `frame`.
    pub fn model(&self, frame: f64) -> Result<LinearModel> {
        match self {
            BaseSystem::Pair { cavities, coupling } => {
                build_pair_model(&cavities[0], &cavities[1], coupling, frame)
            }
            BaseSystem::Chain(spec) => build_chain_model(spec, frame),
        }
    }

    /// Tunneling phase ζ of a two-cavity system.
    pub fn zeta(&self) -> Option<Result<f64>> {
        match self {
            BaseSystem::Pair { cavities, coupling } => Some(match coupling {
                CouplingSpec::Direct { .. } => Ok(DIRECT_ZETA),
                CouplingSpec::Cable(_) => {
                    effective_coupling(&cavities[0], &cavities[1], coupling).map(|e| e.zeta)
                }
            }),
            BaseSystem::Chain(_) => None,
        }
    }

    fn with_param(&self, param: SweepParam, value: f64) -> Result<Self> {
        let mut next = self.clone();
        match (&mut next, param) {
            (BaseSystem::Pair { coupling, .. }, SweepParam::G) => {
                *coupling = CouplingSpec::direct(value)?;
            }
            (BaseSystem::Pair { coupling: CouplingSpec::Cable(c), .. }, SweepParam::Theta) => {
                *c = CableSpec::new(value, c.gamma0l0)?;
            }
            (BaseSystem::Pair { coupling: CouplingSpec::Cable(c), .. }, SweepParam::Gamma0l0) => {
                *c = CableSpec::new(c.theta, value)?;
            }
            (BaseSystem::Pair { cavities, .. }, SweepParam::Gamma1 | SweepParam::Gamma2) => {
                let j = usize::from(param == SweepParam::Gamma2);
                let c = cavities[j];
                cavities[j] = CavityParams::new(c.omega(), c.kappa_i(), c.kappa_e(), value)?;
            }
            (BaseSystem::Chain(spec), SweepParam::G) => *spec = spec.with_g(value)?,
            (BaseSystem::Chain(spec), SweepParam::N) => *spec = spec.resized(value as usize)?,
            (_, SweepParam::DeltaPhi) => {}
            _ => {
                return Err(Error::InvalidSweep(format!(
                    "parameter `{param}` does not apply to this system"
                )))
            }
        }
        Ok(next)
    }
}

/// How each grid point is excited before its ringdown is measured.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SweepProtocol {
    /// Cavities start in `(α, α·e^{iΔφ})` and decay freely.
    FreeDecay { alpha: f64, delta_phi: f64 },
    /// Resonant drive at `drive_port` to steady state, then free decay seen
    /// at `observe_port` (the last mode when unset).
    SteadyDecay {
        drive_port: usize,
        observe_port: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub base: BaseSystem,
    pub axes: Vec<SweepAxis>,
    pub protocol: SweepProtocol,
    pub grid: SampleGrid,
    /// Rotating-frame (and, for steady decay, drive) frequency.
    pub frame: f64,
    pub target_mode: usize,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() || self.axes.len() > 2 {
            return Err(Error::InvalidSweep(format!(
                "need 1 or 2 axes, got {}",
                self.axes.len()
            )));
        }
        if self.axes.len() == 2 && self.axes[0].param == self.axes[1].param {
            return Err(Error::InvalidSweep("both axes sweep the same parameter".into()));
        }
        for axis in &self.axes {
            if axis.values.is_empty() || axis.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidSweep(format!(
                    "axis `{}` needs finite values",
                    axis.param
                )));
            }
            if !self.base.supports(axis.param) {
                return Err(Error::InvalidSweep(format!(
                    "parameter `{}` does not apply to this system",
                    axis.param
                )));
            }
            if axis.param == SweepParam::DeltaPhi
                && !matches!(self.protocol, SweepProtocol::FreeDecay { .. })
            {
                return Err(Error::InvalidSweep(
                    "delta_phi can only be swept with the free-decay protocol".into(),
                ));
            }
        }
        let has_n = self.axes.iter().any(|a| a.param == SweepParam::N);
        if !has_n && self.target_mode >= self.base.dim() {
            return Err(Error::ModeOutOfRange {
                index: self.target_mode,
                dim: self.base.dim(),
            });
        }
        if let SweepProtocol::FreeDecay { alpha, delta_phi } = self.protocol {
            if !(alpha.is_finite() && alpha > 0.0 && delta_phi.is_finite()) {
                return Err(Error::InvalidSweep("free decay needs α > 0 and finite Δφ".into()));
            }
            if self.base.dim() != 2 {
                return Err(Error::InvalidSweep(
                    "free decay from phased coherent states needs two cavities".into(),
                ));
            }
        }
        Ok(())
    }

    fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.values.len()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointError {
    pub code: String,
    pub message: String,
}

impl From<Error> for PointError {
    fn from(e: Error) -> Self {
        Self {
            code: e.code().to_string(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointOutcome {
    /// Lifetime of every mode at this point.
    pub lifetimes: Vec<LifetimeResult>,
    /// Tunneling phase, for two-cavity systems.
    pub zeta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub index: Vec<usize>,
    pub coords: Vec<f64>,
    pub outcome: std::result::Result<PointOutcome, PointError>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axes: Vec<SweepAxis>,
    pub target_mode: usize,
    /// Row-major: the last axis varies fastest.
    pub points: Vec<SweepPoint>,
}

impl SweepResult {
    /// Lifetime of `mode` at each point; `None` for failed points and points
    /// without a crossing.
    pub fn lifetimes(&self, mode: usize) -> Vec<Option<f64>> {
        self.points
            .iter()
            .map(|p| {
                p.outcome
                    .as_ref()
                    .ok()
                    .and_then(|o| o.lifetimes.get(mode))
                    .and_then(|l| l.t_1e)
            })
            .collect()
    }

    pub fn target_lifetimes(&self) -> Vec<Option<f64>> {
        self.lifetimes(self.target_mode)
    }

    /// Index of the longest lifetime of `mode` (first on ties).
    pub fn argmax(&self, mode: usize) -> Option<usize> {
        extremum(&self.lifetimes(mode), |a, b| a > b)
    }

    pub fn argmin(&self, mode: usize) -> Option<usize> {
        extremum(&self.lifetimes(mode), |a, b| a < b)
    }
}

fn extremum(values: &[Option<f64>], better: impl Fn(f64, f64) -> bool) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, v) in values.iter().enumerate() {
        if let Some(v) = *v {
            if best.map_or(true, |(_, b)| better(v, b)) {
                best = Some((k, v));
            }
        }
    }
    best.map(|(k, _)| k)
}

fn unravel(mut flat: usize, shape: &[usize]) -> Vec<usize> {
    let mut index = vec![0; shape.len()];
    for (slot, &len) in index.iter_mut().zip(shape).rev() {
        *slot = flat % len;
        flat /= len;
    }
    index
}

fn evaluate_point(spec: &SweepSpec, coords: &[f64]) -> Result<PointOutcome> {
    let mut system = spec.base.clone();
    let mut protocol = spec.protocol;
    for (axis, &value) in spec.axes.iter().zip(coords) {
        system = system.with_param(axis.param, value)?;
        if let (SweepParam::DeltaPhi, SweepProtocol::FreeDecay { delta_phi, .. }) =
            (axis.param, &mut protocol)
        {
            *delta_phi = value;
        }
    }
    let zeta = system.zeta().transpose()?;
    let model = system.model(spec.frame)?;
    let trajectory = match protocol {
        SweepProtocol::FreeDecay { alpha, delta_phi } => {
            let init = InitialState::coherent_pair(alpha, delta_phi)?;
            evolve_free(&model, &init, &spec.grid)?
        }
        SweepProtocol::SteadyDecay {
            drive_port,
            observe_port,
        } => {
            let observe = observe_port.unwrap_or(model.dim() - 1);
            let drive = DriveSpec::new(drive_port, C64::new(1.0, 0.0), spec.frame)?;
            decay_protocol(&model, &drive, observe, &spec.grid)?.trajectory
        }
    };
    let lifetimes = (0..trajectory.dim())
        .map(|j| photon_lifetime(&trajectory, j))
        .collect::<Result<Vec<_>>>()?;
    Ok(PointOutcome { lifetimes, zeta })
}

/// Evaluates the photon lifetime at every grid point. Points are independent
/// and run in parallel; a failing point becomes an error entry.
pub fn sweep_lifetime(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let shape = spec.shape();
    let total: usize = shape.iter().product();
    let points = (0..total)
        .into_par_iter()
        .map(|flat| {
            let index = unravel(flat, &shape);
            let coords: Vec<f64> = index
                .iter()
                .zip(&spec.axes)
                .map(|(&i, axis)| axis.values[i])
                .collect();
            let outcome = evaluate_point(spec, &coords).map_err(PointError::from);
            SweepPoint {
                index,
                coords,
                outcome,
            }
        })
        .collect();
    Ok(SweepResult {
        axes: spec.axes.clone(),
        target_mode: spec.target_mode,
        points,
    })
}
