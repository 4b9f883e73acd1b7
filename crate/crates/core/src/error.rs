use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("expected a {expected} coupling, got {found}")]
    VariantMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("inconsistent parameters: {0}")]
    InconsistentParams(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// Round-trip factor of a lossless cable hits 1 (θ = mπ).
    #[error("cable resonance singularity: |1 - e^(2iθ-γ₀L₀)| = {distance:e} is below 1e-9")]
    CableResonance { distance: f64 },

    #[error("cable coupling rate of cavity {cavity} is zero")]
    ZeroCoupling { cavity: usize },

    #[error("chain needs at least 2 cavities, got {0}")]
    ChainSize(usize),

    #[error("invalid sample grid: {0}")]
    InvalidGrid(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("mode index {index} out of range for a {dim}-mode model")]
    ModeOutOfRange { index: usize, dim: usize },

    #[error("port {0} has no external coupling and cannot be driven or observed")]
    UndriveablePort(usize),

    #[error("model frame frequency {frame} does not match drive frequency {drive}")]
    FrameMismatch { frame: f64, drive: f64 },

    #[error("no steady state: {0}")]
    NoSteadyState(String),

    #[error("photon lifetime undefined: initial energy of mode {0} is not positive")]
    UndefinedLifetime(usize),

    #[error("non-positive photon number at t = {time} inside the fit window")]
    NonPositiveSamples { time: f64 },

    #[error("integrator failure at t = {time}: {reason}")]
    Integration { time: f64, reason: String },

    #[error("Fock truncation too small: {0}")]
    DimensionTooSmall(String),

    #[error("invalid sweep: {0}")]
    InvalidSweep(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable code for CLI error reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::VariantMismatch { .. } => "variant_mismatch",
            Error::InconsistentParams(_) => "inconsistent_params",
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::CableResonance { .. } => "cable_resonance_singularity",
            Error::ZeroCoupling { .. } => "zero_coupling",
            Error::ChainSize(_) => "chain_size",
            Error::InvalidGrid(_) => "invalid_grid",
            Error::NonFinite(_) => "non_finite",
            Error::ModeOutOfRange { .. } => "mode_out_of_range",
            Error::UndriveablePort(_) => "undriveable_port",
            Error::FrameMismatch { .. } => "frame_mismatch",
            Error::NoSteadyState(_) => "no_steady_state",
            Error::UndefinedLifetime(_) => "undefined_lifetime",
            Error::NonPositiveSamples { .. } => "non_positive_samples",
            Error::Integration { .. } => "integration_failure",
            Error::DimensionTooSmall(_) => "dimension_too_small",
            Error::InvalidSweep(_) => "invalid_sweep",
            Error::InvalidConfig(_) => "invalid_config",
            Error::Io(_) => "io_error",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
