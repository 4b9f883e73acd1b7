//! Time evolution of linear cavity models: free ringdown, driven response,
//! steady states, the drive-then-release measurement protocol and the
//! complex eigenmode spectrum.

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::LinearModel;
use crate::ode::{DormandPrince, Tolerances};
use crate::phase;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Steady-state solves with a 1-norm condition number above this are logged.
pub const CONDITION_WARNING: f64 = 1e12;

/// Coherent input at one port. The drive is constant in a frame rotating at
/// `frequency`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveSpec {
    pub port: usize,
    pub amplitude: C64,
    pub frequency: f64,
}

impl DriveSpec {
    pub fn new(port: usize, amplitude: C64, frequency: f64) -> Result<Self> {
        if !(amplitude.re.is_finite() && amplitude.im.is_finite()) {
            return Err(Error::NonFinite("drive amplitude"));
        }
        if !frequency.is_finite() {
            return Err(Error::NonFinite("drive frequency"));
        }
        Ok(Self {
            port,
            amplitude,
            frequency,
        })
    }

    /// Source vector `s` in `dA/dt = M·A + s`.
    fn source(&self, model: &LinearModel) -> Result<DVector<C64>> {
        model.check_mode(self.port)?;
        let coupling = model.input_couplings()[self.port];
        if coupling == 0.0 {
            return Err(Error::UndriveablePort(self.port));
        }
        let mut s = DVector::from_element(model.dim(), ZERO);
        s[self.port] = -self.amplitude * coupling;
        Ok(s)
    }

    fn check_frame(&self, model: &LinearModel) -> Result<()> {
        let frame = model.frame_frequency();
        let scale = frame.abs().max(self.frequency.abs()).max(1.0);
        if (frame - self.frequency).abs() > 1e-12 * scale {
            return Err(Error::FrameMismatch {
                frame,
                drive: self.frequency,
            });
        }
        Ok(())
    }
}

/// Per-mode coherent amplitudes at `t = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    amplitudes: Vec<C64>,
}

impl InitialState {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite("initial amplitudes"));
        }
        Ok(Self { amplitudes })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            amplitudes: vec![ZERO; dim],
        }
    }

    /// `(α, α·e^{iΔφ})`.
    pub fn coherent_pair(alpha: f64, delta_phi: f64) -> Result<Self> {
        Self::new(vec![
            C64::new(alpha, 0.0),
            C64::from_polar(alpha, delta_phi),
        ])
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    /// `arg(α₂) − arg(α₁)` in `[0, 2π)` for two-mode states.
    pub fn delta_phi(&self) -> Option<f64> {
        match self.amplitudes.as_slice() {
            [a1, a2] => Some(phase::wrap(a2.arg() - a1.arg())),
            _ => None,
        }
    }

    fn to_vector(&self, model: &LinearModel) -> Result<DVector<C64>> {
        if self.dim() != model.dim() {
            return Err(Error::InconsistentParams(format!(
                "initial state has {} modes, model has {}",
                self.dim(),
                model.dim()
            )));
        }
        Ok(DVector::from_column_slice(&self.amplitudes))
    }
}

/// Sample instants; starts at zero and strictly increases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleGrid {
    times: Vec<f64>,
}

impl SampleGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidGrid("empty sample grid".into()));
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidGrid(format!("grid starts at {} instead of 0", times[0])));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidGrid("non-finite sample time".into()));
        }
        if let Some(k) = times.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid(format!(
                "times not strictly increasing at index {}",
                k + 1
            )));
        }
        Ok(Self { times })
    }

    /// `samples` evenly spaced instants covering `[0, t_max]`.
    pub fn uniform(t_max: f64, samples: usize) -> Result<Self> {
        if samples < 2 {
            return Err(Error::InvalidGrid(format!("need at least 2 samples, got {samples}")));
        }
        if !(t_max.is_finite() && t_max > 0.0) {
            return Err(Error::InvalidGrid(format!("t_max must be positive, got {t_max}")));
        }
        let step = t_max / (samples - 1) as f64;
        let mut times: Vec<f64> = (0..samples).map(|k| k as f64 * step).collect();
        times[samples - 1] = t_max;
        Self::new(times)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_max(&self) -> f64 {
        *self.times.last().unwrap()
    }
}

/// Sampled mode envelopes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// `amplitudes[mode][sample]`
    pub amplitudes: Vec<Vec<C64>>,
    /// `photon_numbers[mode][sample] = |amplitudes[mode][sample]|²`
    pub photon_numbers: Vec<Vec<f64>>,
    pub frame_frequency: f64,
}

impl Trajectory {
    fn from_states(grid: &SampleGrid, states: &[DVector<C64>], frame_frequency: f64) -> Self {
        let dim = states.first().map_or(0, |s| s.len());
        let amplitudes: Vec<Vec<C64>> = (0..dim)
            .map(|j| states.iter().map(|s| s[j]).collect())
            .collect();
        let photon_numbers = amplitudes
            .iter()
            .map(|mode| mode.iter().map(|a| a.norm_sqr()).collect())
            .collect();
        Self {
            times: grid.times().to_vec(),
            amplitudes,
            photon_numbers,
            frame_frequency,
        }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Total `Σ_j |A_j|²` per sample.
    pub fn total_energy(&self) -> Vec<f64> {
        (0..self.len())
            .map(|k| self.photon_numbers.iter().map(|n| n[k]).sum())
            .collect()
    }

    /// Largest elementwise amplitude difference relative to the largest amplitude.
    pub fn max_relative_deviation(&self, other: &Trajectory) -> f64 {
        let scale = self
            .amplitudes
            .iter()
            .flatten()
            .map(|a| a.norm())
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        self.amplitudes
            .iter()
            .flatten()
            .zip(other.amplitudes.iter().flatten())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
            / scale
    }
}

/// How a linear time-invariant model is advanced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Propagator {
    /// `exp(M t)` by Padé-13 scaling and squaring, evaluated at every sample.
    MatrixExponential,
    /// Adaptive Dormand–Prince 5(4).
    RungeKutta(Tolerances),
}

impl Default for Propagator {
    fn default() -> Self {
        Propagator::MatrixExponential
    }
}

fn scaled(m: &DMatrix<C64>, t: f64) -> DMatrix<C64> {
    m.map(|z| z * t)
}

fn propagate(
    matrix: &DMatrix<C64>,
    source: Option<&DVector<C64>>,
    initial: DVector<C64>,
    grid: &SampleGrid,
    method: Propagator,
) -> Result<Vec<DVector<C64>>> {
    let n = matrix.nrows();
    match method {
        Propagator::MatrixExponential => {
            let (gen, start) = match source {
                // Augmented generator [[M, s], [0, 0]] acting on (A, 1).
                Some(s) => {
                    let mut aug = DMatrix::from_element(n + 1, n + 1, ZERO);
                    aug.view_mut((0, 0), (n, n)).copy_from(matrix);
                    aug.view_mut((0, n), (n, 1)).copy_from(s);
                    let mut start = DVector::from_element(n + 1, ONE);
                    start.rows_mut(0, n).copy_from(&initial);
                    (aug, start)
                }
                None => (matrix.clone(), initial),
            };
            grid.times()
                .iter()
                .map(|&t| {
                    let state = if t == 0.0 {
                        start.clone()
                    } else {
                        scaled(&gen, t).exp() * &start
                    };
                    let out = state.rows(0, n).into_owned();
                    if out.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
                        return Err(Error::NonFinite("propagated amplitudes"));
                    }
                    Ok(out)
                })
                .collect()
        }
        Propagator::RungeKutta(tol) => {
            let mut rhs = |_t: f64, y: &[C64], dy: &mut [C64]| {
                for r in 0..n {
                    let mut acc = source.map_or(ZERO, |s| s[r]);
                    for c in 0..n {
                        acc += matrix[(r, c)] * y[c];
                    }
                    dy[r] = acc;
                }
            };
            let mut dp = DormandPrince::new(n, tol);
            let mut y: Vec<C64> = initial.iter().copied().collect();
            let mut out = Vec::with_capacity(grid.len());
            let mut t = 0.0;
            for &tk in grid.times() {
                dp.advance(&mut rhs, t, tk, &mut y)?;
                t = tk;
                out.push(DVector::from_column_slice(&y));
            }
            Ok(out)
        }
    }
}

/// Undriven evolution `A(t) = exp(M t)·A(0)`.
pub fn evolve_free(model: &LinearModel, init: &InitialState, grid: &SampleGrid) -> Result<Trajectory> {
    evolve_free_with(model, init, grid, Propagator::default())
}

pub fn evolve_free_with(
    model: &LinearModel,
    init: &InitialState,
    grid: &SampleGrid,
    method: Propagator,
) -> Result<Trajectory> {
    let a0 = init.to_vector(model)?;
    let states = propagate(model.matrix(), None, a0, grid, method)?;
    Ok(Trajectory::from_states(grid, &states, model.frame_frequency()))
}

/// Evolution under a constant coherent drive, `dA/dt = M·A + s`.
pub fn evolve_driven(
    model: &LinearModel,
    init: &InitialState,
    drive: &DriveSpec,
    grid: &SampleGrid,
) -> Result<Trajectory> {
    evolve_driven_with(model, init, drive, grid, Propagator::default())
}

pub fn evolve_driven_with(
    model: &LinearModel,
    init: &InitialState,
    drive: &DriveSpec,
    grid: &SampleGrid,
    method: Propagator,
) -> Result<Trajectory> {
    drive.check_frame(model)?;
    let s = drive.source(model)?;
    let a0 = init.to_vector(model)?;
    let states = propagate(model.matrix(), Some(&s), a0, grid, method)?;
    Ok(Trajectory::from_states(grid, &states, model.frame_frequency()))
}

fn eigenvalues(matrix: &DMatrix<C64>) -> Vec<C64> {
    let n = matrix.nrows();
    if n == 1 {
        return vec![matrix[(0, 0)]];
    }
    let t = Schur::new(matrix.clone()).unpack().1;
    (0..n).map(|k| t[(k, k)]).collect()
}

fn norm1(m: &DMatrix<C64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Driven steady state `A_ss = −M⁻¹·s`.
pub fn steady_state(model: &LinearModel, drive: &DriveSpec) -> Result<InitialState> {
    drive.check_frame(model)?;
    let s = drive.source(model)?;
    let m = model.matrix();
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    if let Some(lambda) = eigenvalues(m).into_iter().find(|l| l.re >= -1e-14 * scale) {
        return Err(Error::NoSteadyState(format!(
            "eigenvalue {lambda} is not strictly damped"
        )));
    }
    let lu = m.clone().lu();
    let solution = lu
        .solve(&(-s))
        .ok_or_else(|| Error::NoSteadyState("singular generator".into()))?;
    if let Some(inv) = lu.try_inverse() {
        let cond = norm1(m) * norm1(&inv);
        if cond > CONDITION_WARNING {
            log::warn!("steady-state solve is ill-conditioned (cond₁ ≈ {cond:e})");
        }
    }
    InitialState::new(solution.iter().copied().collect())
}

/// Result of the drive → steady state → release → ringdown protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayRun {
    pub steady_state: InitialState,
    pub trajectory: Trajectory,
    pub observe_port: usize,
    /// `κ_e·|A_obs(t)|²` in arbitrary units.
    pub output_power: Vec<f64>,
}

/// Drives to steady state, switches the input off instantaneously at `t = 0`
/// and records the free ringdown seen at `observe_port`.
pub fn decay_protocol(
    model: &LinearModel,
    drive: &DriveSpec,
    observe_port: usize,
    grid: &SampleGrid,
) -> Result<DecayRun> {
    model.check_mode(observe_port)?;
    let rate = model.input_couplings()[observe_port].powi(2);
    if rate == 0.0 {
        return Err(Error::UndriveablePort(observe_port));
    }
    let steady = steady_state(model, drive)?;
    let trajectory = evolve_free(model, &steady, grid)?;
    let output_power = trajectory.photon_numbers[observe_port]
        .iter()
        .map(|n| rate * n)
        .collect();
    Ok(DecayRun {
        steady_state: steady,
        trajectory,
        observe_port,
        output_power,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigenmode {
    pub eigenvalue: C64,
    /// `frame − Im λ` (rad/s).
    pub frequency: f64,
    /// Energy decay rate `−2 Re λ` (rad/s).
    pub decay_rate: f64,
    pub q_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSpectrum {
    pub modes: Vec<Eigenmode>,
}

impl ModeSpectrum {
    /// Frequency difference between the two modes of a two-mode spectrum.
    pub fn splitting(&self) -> Option<f64> {
        match self.modes.as_slice() {
            [a, b] => Some(b.frequency - a.frequency),
            _ => None,
        }
    }
}

/// Complex eigenfrequencies of the generator, sorted by frequency.
pub fn eigenmodes(model: &LinearModel) -> ModeSpectrum {
    let frame = model.frame_frequency();
    let mut modes: Vec<Eigenmode> = eigenvalues(model.matrix())
        .into_iter()
        .map(|lambda| {
            let frequency = frame - lambda.im;
            let decay_rate = -2.0 * lambda.re;
            let q_factor = if decay_rate > 0.0 {
                frequency / decay_rate
            } else {
                f64::INFINITY
            };
            Eigenmode {
                eigenvalue: lambda,
                frequency,
                decay_rate,
                q_factor,
            }
        })
        .collect();
    modes.sort_by(|a, b| {
        a.frequency
            .total_cmp(&b.frequency)
            .then(a.decay_rate.total_cmp(&b.decay_rate))
    });
    ModeSpectrum { modes }
}

/// Normal-mode splitting `√(4g² − (κ₁−κ₂)²/4)` of two resonant directly
/// coupled cavities; `None` below the exceptional point.
pub fn resonant_splitting(g: f64, kappa1: f64, kappa2: f64) -> Option<f64> {
    let radicand = 4.0 * g * g - 0.25 * (kappa1 - kappa2).powi(2);
    (radicand > 0.0).then(|| radicand.sqrt())
}
