//! Photon-lifetime extraction, interference classification and parameter sweeps.

mod chain;
mod interference;
mod lifetime;
mod sweep;

pub use chain::{chain_end_lifetime, chain_lifetime_scaling, ChainPoint, ChainScaling, LinearFit};
pub use interference::{
    classify_interference, Cavity, InterferenceVerdict, Verdict, DEFAULT_TOLERANCE, DIRECT_ZETA,
};
pub use lifetime::{
    lifetime_from_series, photon_lifetime, q_from_decay, LifetimeResult,
    FIT_DISCREPANCY_THRESHOLD,
};
pub use sweep::{
    sweep_lifetime, BaseSystem, PointError, PointOutcome, SweepAxis, SweepParam, SweepPoint,
    SweepProtocol, SweepResult, SweepSpec,
};
