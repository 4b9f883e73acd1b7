//! Experiment configuration: JSON schema, unit normalization and defaults.
//!
//! [`parse_config`] returns a fully resolved config: every rate is in rad/s,
//! `units` reads `rad_per_s`, and defaulted fields are filled in, so that
//! emitting and re-parsing it reproduces the same value.

use std::f64::consts::{PI, TAU};
use std::fmt;

use num_complex::Complex64 as C64;
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::analysis::{BaseSystem, SweepAxis, SweepParam, SweepProtocol, SweepSpec};
use crate::dynamics::{DriveSpec, InitialState, SampleGrid};
use crate::error::{Error, Result};
use crate::lindblad::{FockConfig, QuantumSystem, DEFAULT_DIM_PER_MODE, DEFAULT_LEAKAGE_THRESHOLD};
use crate::model::{
    build_chain_model, build_pair_model, CavityParams, ChainSpec, CouplingSpec, LinearModel,
};

pub const DEFAULT_SAMPLES: usize = 2000;

/// Default time window in units of the longest bare 1/e time.
pub const DEFAULT_WINDOW: f64 = 8.0;

/// An angle in radians; also read from strings such as `"0.1pi"` or `"-pi"`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Angle(pub f64);

impl Angle {
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        let bad = || Error::InvalidConfig(format!("`{text}` is not an angle (use radians or \"<x>pi\")"));
        match t.strip_suffix("pi") {
            Some(prefix) => {
                let factor = match prefix.trim() {
                    "" | "+" => 1.0,
                    "-" => -1.0,
                    p => p.strip_suffix('*').unwrap_or(p).trim().parse::<f64>().map_err(|_| bad())?,
                };
                Ok(Angle(factor * PI))
            }
            None => t.parse::<f64>().map(Angle).map_err(|_| bad()),
        }
    }
}

impl Serialize for Angle {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.0)
    }
}

impl<'de> Deserialize<'de> for Angle {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct AngleVisitor;

        impl Visitor<'_> for AngleVisitor {
            type Value = Angle;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("an angle in radians or a string like \"0.5pi\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Angle, E> {
                Ok(Angle(v))
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Angle, E> {
                Ok(Angle(v as f64))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Angle, E> {
                Ok(Angle(v as f64))
            }

            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Angle, E> {
                Angle::parse(v).map_err(E::custom)
            }
        }

        d.deserialize_any(AngleVisitor)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    Direct,
    Cable,
    Chain,
}

/// How rates and frequencies in the file are expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    RadPerS,
    /// Angular values written in Hz (s⁻¹); same numbers as rad/s.
    HzAngular,
    /// Cyclic frequencies in Hz; multiplied by 2π.
    HzCyclic,
}

impl Units {
    pub fn to_rad_per_s(self) -> f64 {
        match self {
            Units::RadPerS | Units::HzAngular => 1.0,
            Units::HzCyclic => TAU,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    FreeDecay,
    Driven,
    SteadyDecay,
    Lindblad,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityConfig {
    pub omega: f64,
    pub kappa_i: f64,
    pub kappa_e: f64,
    #[serde(default)]
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CouplingConfig {
    Direct { g: f64 },
    Cable { theta: Angle, gamma0l0: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub n: usize,
    pub g: f64,
    pub kappa_i: f64,
    pub kappa_e_first: f64,
    pub kappa_e_last: f64,
    pub omega: f64,
    /// Chain lengths visited by the `chain` command; defaults to `2..=n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_values: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    pub port: usize,
    /// `[re, im]` of the input amplitude, arbitrary units.
    #[serde(default = "unit_amplitude")]
    pub amplitude: [f64; 2],
    /// Defaults to the frame frequency.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency: Option<f64>,
}

fn unit_amplitude() -> [f64; 2] {
    [1.0, 0.0]
}

/// Either explicit `[re, im]` amplitudes per mode, or `(α, α·e^{iΔφ})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialStateConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitudes: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_phi: Option<Angle>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LindbladConfig {
    #[serde(default = "default_dim")]
    pub dim_per_mode: usize,
    #[serde(default)]
    pub n_thermal: f64,
    #[serde(default = "default_leakage")]
    pub leakage_threshold: f64,
}

fn default_dim() -> usize {
    DEFAULT_DIM_PER_MODE
}

fn default_leakage() -> f64 {
    DEFAULT_LEAKAGE_THRESHOLD
}

impl Default for LindbladConfig {
    fn default() -> Self {
        Self {
            dim_per_mode: DEFAULT_DIM_PER_MODE,
            n_thermal: 0.0,
            leakage_threshold: DEFAULT_LEAKAGE_THRESHOLD,
        }
    }
}

/// One sweep axis: explicit `values`, or `start`/`stop`/`points`
/// (`endpoint` includes `stop`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    pub param: SweepParam,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<Angle>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Angle>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<Angle>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub endpoint: bool,
}

impl AxisConfig {
    fn expand(&self) -> Result<Vec<f64>> {
        match (&self.values, self.start, self.stop, self.points) {
            (Some(v), None, None, None) => Ok(v.iter().map(|a| a.0).collect()),
            (None, Some(a), Some(b), Some(n)) if n >= 1 => {
                let span = if self.endpoint { (n - 1).max(1) } else { n } as f64;
                Ok((0..n).map(|k| a.0 + (b.0 - a.0) * k as f64 / span).collect())
            }
            _ => Err(Error::InvalidConfig(format!(
                "sweep axis `{}` needs either `values` or `start`, `stop` and `points` >= 1",
                self.param
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axes: Vec<AxisConfig>,
    /// Mode whose lifetime is the sweep target; defaults to the last mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_mode: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGridConfig {
    pub t_max: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default)]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units: Option<Units>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cavities: Vec<CavityConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<CouplingConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<ChainConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_frequency: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drive: Option<DriveConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<InitialStateConfig>,
    pub protocol: ProtocolKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observe_port: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lindblad: Option<LindbladConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_grid: Option<TimeGridConfig>,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Parses, validates and resolves a JSON config.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let raw: ExperimentConfig = serde_json::from_str(text)
        .map_err(|e| Error::InvalidConfig(format!("schema violation: {e}")))?;
    raw.resolve()
}

/// Pretty JSON of a config; `parse_config` reads it back unchanged.
pub fn emit_config(config: &ExperimentConfig) -> String {
    serde_json::to_string_pretty(config).expect("config serializes")
}

fn field(path: &str, reason: impl fmt::Display) -> Error {
    Error::InvalidConfig(format!("`{path}`: {reason}"))
}

impl ExperimentConfig {
    fn has_rates(&self) -> bool {
        !self.cavities.is_empty()
            || self.chain.is_some()
            || matches!(self.coupling, Some(CouplingConfig::Direct { .. }))
            || self.frame_frequency.is_some()
            || self.drive.is_some_and(|d| d.frequency.is_some())
    }

    /// Applies defaults, converts rates to rad/s and validates.
    pub fn resolve(mut self) -> Result<Self> {
        let scale = match (self.units, self.has_rates()) {
            (Some(u), _) => u.to_rad_per_s(),
            (None, true) => {
                return Err(field(
                    "units",
                    "required when rates are given (rad_per_s, hz_angular or hz_cyclic)",
                ))
            }
            (None, false) => 1.0,
        };
        self.units = Some(Units::RadPerS);
        for c in &mut self.cavities {
            c.omega *= scale;
            c.kappa_i *= scale;
            c.kappa_e *= scale;
            c.gamma *= scale;
        }
        if let Some(CouplingConfig::Direct { g }) = &mut self.coupling {
            *g *= scale;
        }
        if let Some(chain) = &mut self.chain {
            chain.g *= scale;
            chain.kappa_i *= scale;
            chain.kappa_e_first *= scale;
            chain.kappa_e_last *= scale;
            chain.omega *= scale;
            if chain.n_values.is_none() {
                chain.n_values = Some((2..=chain.n).collect());
            }
        }
        if let Some(f) = &mut self.frame_frequency {
            *f *= scale;
        }
        if let Some(d) = &mut self.drive {
            if let Some(f) = &mut d.frequency {
                *f *= scale;
            }
        }
        if let Some(sweep) = &mut self.sweep {
            for axis in &mut sweep.axes {
                let factor = if axis.param.is_rate() { scale } else { 1.0 };
                let values = axis.expand()?;
                *axis = AxisConfig {
                    param: axis.param,
                    values: Some(values.into_iter().map(|v| Angle(v * factor)).collect()),
                    start: None,
                    stop: None,
                    points: None,
                    endpoint: false,
                };
            }
        }

        self.check_shape()?;

        let frame = match (self.frame_frequency, self.drive.and_then(|d| d.frequency)) {
            (Some(f), _) => f,
            (None, Some(f)) => f,
            (None, None) => self.natural_frequency(),
        };
        self.frame_frequency = Some(frame);
        if let Some(d) = &mut self.drive {
            d.frequency.get_or_insert(frame);
        }
        if self.protocol == ProtocolKind::Lindblad {
            self.lindblad.get_or_insert_with(LindbladConfig::default);
        } else if self.lindblad.is_some() {
            return Err(field("lindblad", "only valid with the lindblad protocol"));
        }
        if self.time_grid.is_none() {
            self.time_grid = Some(TimeGridConfig {
                t_max: self.default_window(),
                samples: DEFAULT_SAMPLES,
            });
        }
        if self.protocol == ProtocolKind::SteadyDecay && self.observe_port.is_none() {
            self.observe_port = Some(self.mode_count() - 1);
        }
        if let Some(sweep) = &mut self.sweep {
            if sweep.target_mode.is_none() {
                sweep.target_mode = Some(match self.system {
                    SystemKind::Chain => self.chain.as_ref().map_or(1, |c| c.n - 1),
                    _ => self.cavities.len() - 1,
                });
            }
        }

        self.validate()?;
        Ok(self)
    }

    fn check_shape(&self) -> Result<()> {
        match self.system {
            SystemKind::Direct => {
                match (self.cavities.len(), &self.coupling) {
                    (1, None) | (2, Some(CouplingConfig::Direct { .. })) => {}
                    (1, Some(_)) => return Err(field("coupling", "a single cavity takes no coupling")),
                    (2, _) => return Err(field("coupling", "direct systems need {\"type\": \"direct\", \"g\": ...}")),
                    (n, _) => return Err(field("cavities", format!("direct systems take 1 or 2 cavities, got {n}"))),
                }
                if self.chain.is_some() {
                    return Err(field("chain", "only valid for chain systems"));
                }
            }
            SystemKind::Cable => {
                if self.cavities.len() != 2 {
                    return Err(field("cavities", format!("cable systems take 2 cavities, got {}", self.cavities.len())));
                }
                if !matches!(self.coupling, Some(CouplingConfig::Cable { .. })) {
                    return Err(field("coupling", "cable systems need {\"type\": \"cable\", \"theta\": ..., \"gamma0l0\": ...}"));
                }
                if self.chain.is_some() {
                    return Err(field("chain", "only valid for chain systems"));
                }
            }
            SystemKind::Chain => {
                if self.chain.is_none() {
                    return Err(field("chain", "required for chain systems"));
                }
                if !self.cavities.is_empty() || self.coupling.is_some() {
                    return Err(field("cavities", "chain systems are described by the `chain` block only"));
                }
            }
        }
        let (has_init, has_drive) = (self.initial_state.is_some(), self.drive.is_some());
        match self.protocol {
            ProtocolKind::FreeDecay | ProtocolKind::Lindblad => {
                if has_drive {
                    return Err(field("drive", "not used by a decay from an initial state"));
                }
                if !has_init && self.sweep.is_none() {
                    return Err(field("initial_state", "required for this protocol"));
                }
            }
            ProtocolKind::Driven | ProtocolKind::SteadyDecay => {
                if has_init {
                    let why = if self.protocol == ProtocolKind::SteadyDecay {
                        "steady_decay derives its own initial state"
                    } else {
                        "driven runs start from the empty cavity"
                    };
                    return Err(field("initial_state", why));
                }
                if !has_drive {
                    return Err(field("drive", "required for this protocol"));
                }
            }
        }
        if self.observe_port.is_some() && self.protocol != ProtocolKind::SteadyDecay {
            return Err(field("observe_port", "only valid with steady_decay"));
        }
        if self.protocol == ProtocolKind::Lindblad && self.system != SystemKind::Direct {
            return Err(field("protocol", "lindblad covers direct coupling only"));
        }
        Ok(())
    }

    /// Cavity 1 (or chain) resonance.
    fn natural_frequency(&self) -> f64 {
        match &self.chain {
            Some(c) => c.omega,
            None => self.cavities[0].omega,
        }
    }

    fn default_window(&self) -> f64 {
        match &self.chain {
            Some(c) => {
                let n_max = c.n_values.as_ref().and_then(|v| v.iter().copied().max()).unwrap_or(c.n);
                let edge = if n_max > 2 { 0.0 } else { c.kappa_e_first.min(c.kappa_e_last) };
                let slowest = c.kappa_i + edge;
                DEFAULT_WINDOW / slowest * (n_max as f64 / 2.0).max(1.0)
            }
            None => {
                let slowest = self
                    .cavities
                    .iter()
                    .map(|c| c.kappa_i + c.kappa_e)
                    .fold(f64::INFINITY, f64::min);
                DEFAULT_WINDOW / slowest
            }
        }
    }

    pub fn mode_count(&self) -> usize {
        match &self.chain {
            Some(c) => c.n,
            None => self.cavities.len(),
        }
    }

    fn validate(&self) -> Result<()> {
        let base = self.base_system();
        match (&base, self.system) {
            (Err(e), _) => return Err(field("system", e)),
            (Ok(None), SystemKind::Direct) => {
                self.cavity_params()?;
            }
            _ => {}
        }
        self.grid().map_err(|e| field("time_grid", e))?;
        if self.sweep.is_none() && self.protocol != ProtocolKind::Lindblad {
            self.model().map_err(|e| field("system", e))?;
        }
        if let Some(d) = self.drive_spec()? {
            if d.port >= self.mode_count() {
                return Err(field("drive.port", format!("{} is out of range for {} modes", d.port, self.mode_count())));
            }
        }
        if let Some(init) = self.initial_state()? {
            if init.dim() != self.mode_count() {
                return Err(field(
                    "initial_state",
                    format!("{} amplitudes for {} modes", init.dim(), self.mode_count()),
                ));
            }
        }
        if let Some(p) = self.observe_port {
            if p >= self.mode_count() {
                return Err(field("observe_port", format!("{p} is out of range for {} modes", self.mode_count())));
            }
        }
        if self.protocol == ProtocolKind::Lindblad {
            self.quantum_system()?;
            self.fock_config()?;
        } else if self.sweep.is_some() {
            self.sweep_spec()?;
        }
        if let Some(c) = &self.chain {
            if let Some(&bad) = c.n_values.as_ref().and_then(|v| v.iter().find(|&&n| n < 2)) {
                return Err(field("chain.n_values", format!("chain length {bad} is below 2")));
            }
        }
        Ok(())
    }

    pub fn frame(&self) -> f64 {
        self.frame_frequency.unwrap_or_else(|| self.natural_frequency())
    }

    pub fn cavity_params(&self) -> Result<Vec<CavityParams>> {
        self.cavities
            .iter()
            .map(|c| CavityParams::new(c.omega, c.kappa_i, c.kappa_e, c.gamma))
            .collect()
    }

    pub fn coupling_spec(&self) -> Result<Option<CouplingSpec>> {
        self.coupling
            .map(|c| match c {
                CouplingConfig::Direct { g } => CouplingSpec::direct(g),
                CouplingConfig::Cable { theta, gamma0l0 } => CouplingSpec::cable(theta.0, gamma0l0),
            })
            .transpose()
    }

    pub fn chain_spec(&self) -> Result<Option<ChainSpec>> {
        self.chain
            .as_ref()
            .map(|c| ChainSpec::uniform(c.n, c.g, c.kappa_i, c.kappa_e_first, c.kappa_e_last, c.omega))
            .transpose()
    }

    /// Two-cavity or chain system; `None` for a lone cavity.
    pub fn base_system(&self) -> Result<Option<BaseSystem>> {
        if let Some(chain) = self.chain_spec()? {
            return Ok(Some(BaseSystem::Chain(chain)));
        }
        let cavities = self.cavity_params()?;
        match (cavities.as_slice(), self.coupling_spec()?) {
            ([c1, c2], Some(coupling)) => Ok(Some(BaseSystem::Pair {
                cavities: [*c1, *c2],
                coupling,
            })),
            _ => Ok(None),
        }
    }

    pub fn model(&self) -> Result<LinearModel> {
        let frame = self.frame();
        if let Some(chain) = self.chain_spec()? {
            return build_chain_model(&chain, frame);
        }
        let cavities = self.cavity_params()?;
        match (cavities.as_slice(), self.coupling_spec()?) {
            ([c], None) => LinearModel::single_mode(c, frame),
            ([c1, c2], Some(coupling)) => build_pair_model(c1, c2, &coupling, frame),
            _ => Err(Error::InconsistentParams("cavity count and coupling disagree".into())),
        }
    }

    pub fn grid(&self) -> Result<SampleGrid> {
        let g = self.time_grid.ok_or_else(|| field("time_grid", "unresolved"))?;
        SampleGrid::uniform(g.t_max, g.samples)
    }

    pub fn drive_spec(&self) -> Result<Option<DriveSpec>> {
        self.drive
            .map(|d| {
                DriveSpec::new(
                    d.port,
                    C64::new(d.amplitude[0], d.amplitude[1]),
                    d.frequency.unwrap_or_else(|| self.frame()),
                )
            })
            .transpose()
    }

    pub fn initial_state(&self) -> Result<Option<InitialState>> {
        let Some(init) = &self.initial_state else {
            return Ok(None);
        };
        match (&init.amplitudes, init.alpha, init.delta_phi) {
            (Some(a), None, None) => {
                InitialState::new(a.iter().map(|z| C64::new(z[0], z[1])).collect()).map(Some)
            }
            (None, Some(alpha), dphi) => {
                InitialState::coherent_pair(alpha, dphi.unwrap_or_default().0).map(Some)
            }
            _ => Err(field(
                "initial_state",
                "give either `amplitudes` or `alpha` (with optional `delta_phi`)",
            )),
        }
    }

    pub fn fock_config(&self) -> Result<FockConfig> {
        let l = self.lindblad.unwrap_or_default();
        FockConfig::new(l.dim_per_mode, l.n_thermal, self.mode_count())?
            .with_leakage_threshold(l.leakage_threshold)
    }

    pub fn quantum_system(&self) -> Result<QuantumSystem> {
        let g = match self.coupling {
            Some(CouplingConfig::Direct { g }) => g,
            _ => 0.0,
        };
        QuantumSystem::new(self.cavity_params()?, g, self.frame())
    }

    /// Sweep axes with values in rad/s and radians.
    pub fn sweep_axes(&self) -> Result<Vec<SweepAxis>> {
        let sweep = self.sweep.as_ref().ok_or_else(|| field("sweep", "missing"))?;
        sweep
            .axes
            .iter()
            .map(|a| SweepAxis::new(a.param, a.expand()?))
            .collect()
    }

    /// `(α, Δφ)` of a phased coherent-pair initial state.
    pub fn coherent_pair(&self) -> Result<(f64, f64)> {
        match &self.initial_state {
            None => Ok((1.0, 0.0)),
            Some(InitialStateConfig {
                amplitudes: None,
                alpha: Some(alpha),
                delta_phi,
            }) => Ok((*alpha, delta_phi.unwrap_or_default().0)),
            Some(_) => Err(field(
                "initial_state",
                "sweeps start from `alpha`/`delta_phi`, not explicit amplitudes",
            )),
        }
    }

    pub fn sweep_spec(&self) -> Result<SweepSpec> {
        let base = self
            .base_system()?
            .ok_or_else(|| field("sweep", "needs two coupled cavities or a chain"))?;
        let protocol = match self.protocol {
            ProtocolKind::FreeDecay => {
                let (alpha, delta_phi) = self.coherent_pair()?;
                SweepProtocol::FreeDecay { alpha, delta_phi }
            }
            ProtocolKind::SteadyDecay => SweepProtocol::SteadyDecay {
                drive_port: self.drive.map_or(0, |d| d.port),
                observe_port: match self.system {
                    SystemKind::Chain => None,
                    _ => self.observe_port,
                },
            },
            other => {
                return Err(field("protocol", format!("{other:?} runs cannot be swept this way")))
            }
        };
        if let Some(d) = self.drive_spec()? {
            if (d.frequency - self.frame()).abs() > 1e-12 * self.frame().abs().max(1.0) {
                return Err(Error::FrameMismatch {
                    frame: self.frame(),
                    drive: d.frequency,
                });
            }
        }
        let spec = SweepSpec {
            base,
            axes: self.sweep_axes()?,
            protocol,
            grid: self.grid()?,
            frame: self.frame(),
            target_mode: self.sweep.as_ref().and_then(|s| s.target_mode).unwrap_or(0),
        };
        spec.validate()?;
        Ok(spec)
    }
}
