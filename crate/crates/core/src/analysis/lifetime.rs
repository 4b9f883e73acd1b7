use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};

/// Relative disagreement between the two Q estimates that gets flagged.
pub const FIT_DISCREPANCY_THRESHOLD: f64 = 0.1;

/// Photon lifetime of one mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifetimeResult {
    /// First time the energy falls to `1/e` of its initial value; `None` when
    /// the trace never gets there within the sampled window.
    pub t_1e: Option<f64>,
    /// `ω·t_1e`.
    pub q_equivalent: Option<f64>,
    /// Log-slope decay rate over a fit window.
    pub fit_kappa: Option<f64>,
    /// `ω / fit_kappa`.
    pub q_from_fit: Option<f64>,
    /// Set when both Q estimates exist and differ by more than 10 %.
    pub fit_disagrees: bool,
}

impl LifetimeResult {
    pub fn crossing_found(&self) -> bool {
        self.t_1e.is_some()
    }
}

fn mode_series(traj: &Trajectory, mode: usize) -> Result<&[f64]> {
    traj.photon_numbers
        .get(mode)
        .map(Vec::as_slice)
        .ok_or(Error::ModeOutOfRange {
            index: mode,
            dim: traj.dim(),
        })
}

/// First `1/e` crossing of an energy trace, interpolated linearly in
/// log-energy between the bracketing samples.
pub fn lifetime_from_series(times: &[f64], energy: &[f64], omega: f64) -> Result<LifetimeResult> {
    let e0 = energy.first().copied().unwrap_or(0.0);
    if !(e0 > 0.0) {
        return Err(Error::UndefinedLifetime(0));
    }
    let threshold = e0 / E;
    let t_1e = energy
        .iter()
        .position(|&e| e <= threshold)
        .map(|k| {
            let (t0, t1) = (times[k - 1], times[k]);
            let (e_hi, e_lo) = (energy[k - 1], energy[k]);
            let frac = if e_lo > 0.0 {
                (threshold.ln() - e_hi.ln()) / (e_lo.ln() - e_hi.ln())
            } else {
                (e_hi - threshold) / (e_hi - e_lo)
            };
            t0 + frac * (t1 - t0)
        });
    Ok(LifetimeResult {
        t_1e,
        q_equivalent: t_1e.map(|t| omega * t),
        fit_kappa: None,
        q_from_fit: None,
        fit_disagrees: false,
    })
}

/// Photon lifetime of `mode`; the Q uses the trajectory's frame frequency.
pub fn photon_lifetime(traj: &Trajectory, mode: usize) -> Result<LifetimeResult> {
    let energy = mode_series(traj, mode)?;
    lifetime_from_series(&traj.times, energy, traj.frame_frequency).map_err(|e| match e {
        Error::UndefinedLifetime(_) => Error::UndefinedLifetime(mode),
        other => other,
    })
}

/// Least-squares slope and intercept of `y` against `x`.
pub(crate) fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - (intercept + slope * a)).powi(2))
        .sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    (slope, intercept, r_squared)
}

/// Ringdown Q from both the first `1/e` crossing and a log-linear fit over
/// `window`, given as fractions of the trace duration.
pub fn q_from_decay(
    traj: &Trajectory,
    mode: usize,
    omega: f64,
    window: (f64, f64),
) -> Result<LifetimeResult> {
    let (lo, hi) = window;
    if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo >= hi {
        return Err(Error::InvalidParameter {
            name: "fit_window",
            reason: format!("({lo}, {hi}) is not an increasing pair of fractions in [0, 1]"),
        });
    }
    let energy = mode_series(traj, mode)?;
    let start = traj.times[0];
    let span = traj.times[traj.len() - 1] - start;
    let (t_lo, t_hi) = (start + lo * span, start + hi * span);

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &e) in traj.times.iter().zip(energy) {
        if t < t_lo || t > t_hi {
            continue;
        }
        if !(e > 0.0) {
            return Err(Error::NonPositiveSamples { time: t });
        }
        xs.push(t);
        ys.push(e.ln());
    }
    if xs.len() < 2 {
        return Err(Error::InvalidParameter {
            name: "fit_window",
            reason: format!("only {} samples fall inside the window", xs.len()),
        });
    }
    let (slope, _, _) = least_squares(&xs, &ys);
    let fit_kappa = -slope;

    let mut result = lifetime_from_series(&traj.times, energy, omega).map_err(|e| match e {
        Error::UndefinedLifetime(_) => Error::UndefinedLifetime(mode),
        other => other,
    })?;
    result.fit_kappa = Some(fit_kappa);
    result.q_from_fit = (fit_kappa > 0.0).then(|| omega / fit_kappa);
    result.fit_disagrees = match (result.q_equivalent, result.q_from_fit) {
        (Some(a), Some(b)) => ((a - b) / b).abs() > FIT_DISCREPANCY_THRESHOLD,
        _ => false,
    };
    Ok(result)
}
