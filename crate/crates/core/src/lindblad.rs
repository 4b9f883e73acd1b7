//! Master-equation evolution of one or two directly coupled cavities in a
//! truncated Fock space (ħ = 1, rotating frame).
//!
//! The generator is
//!
//! ```text
//! dρ/dt = −i[H, ρ] + Σ_j κ_j (n_th + 1) D[a_j]ρ + Σ_j κ_j n_th D[a_j†]ρ
//! H     = Σ_j (ω_j − ω_f) a_j†a_j + g (a_1†a_2 + a_1 a_2†)
//! D[L]ρ = LρL† − ½{L†L, ρ}
//! ```
//!
//! It is applied matrix-free as `−i(H_eff ρ − ρ H_eff†) + Σ_k r_k L_k ρ L_k†`
//! with `H_eff = H − (i/2) Σ_k r_k L_k†L_k`, so the `D⁴`-element
//! superoperator is never formed during evolution.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{lifetime_from_series, LifetimeResult};
use crate::dynamics::{InitialState, SampleGrid};
use crate::error::{Error, Result};
use crate::model::CavityParams;
use crate::ode::{DormandPrince, Tolerances};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

pub const DEFAULT_DIM_PER_MODE: usize = 10;

/// Top-Fock-level population above which a run aborts.
pub const DEFAULT_LEAKAGE_THRESHOLD: f64 = 1e-5;

/// Hilbert dimension up to which [`Liouvillian::dense_superoperator`] is allowed.
pub const DENSE_SUPEROPERATOR_LIMIT: usize = 64;

pub const INTEGRATOR_TOLERANCES: Tolerances = Tolerances {
    atol: 1e-12,
    rtol: 1e-10,
};

const HBAR: f64 = 1.054_571_817e-34;
const BOLTZMANN: f64 = 1.380_649e-23;

/// Bose–Einstein occupancy of a mode at angular frequency `omega` (rad/s)
/// and temperature `temperature` (K).
pub fn thermal_occupancy(temperature: f64, omega: f64) -> f64 {
    if temperature <= 0.0 {
        return 0.0;
    }
    1.0 / (HBAR * omega / (BOLTZMANN * temperature)).exp_m1()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FockConfig {
    pub dim_per_mode: usize,
    pub n_thermal: f64,
    pub modes: usize,
    pub leakage_threshold: f64,
}

impl FockConfig {
    pub fn new(dim_per_mode: usize, n_thermal: f64, modes: usize) -> Result<Self> {
        let cfg = Self {
            dim_per_mode,
            n_thermal,
            modes,
            leakage_threshold: DEFAULT_LEAKAGE_THRESHOLD,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_leakage_threshold(mut self, threshold: f64) -> Result<Self> {
        self.leakage_threshold = threshold;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim_per_mode < 2 {
            return Err(Error::InvalidParameter {
                name: "dim_per_mode",
                reason: format!("{} is below 2", self.dim_per_mode),
            });
        }
        if !(1..=2).contains(&self.modes) {
            return Err(Error::InvalidParameter {
                name: "modes",
                reason: format!("{} modes requested; 1 or 2 supported", self.modes),
            });
        }
        if !(self.n_thermal.is_finite() && self.n_thermal >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "n_thermal",
                reason: format!("{} must be finite and non-negative", self.n_thermal),
            });
        }
        if !(self.leakage_threshold > 0.0) {
            return Err(Error::InvalidParameter {
                name: "leakage_threshold",
                reason: format!("{} must be positive", self.leakage_threshold),
            });
        }
        Ok(())
    }

    pub fn hilbert_dim(&self) -> usize {
        self.dim_per_mode.pow(self.modes as u32)
    }
}

/// Sparse operator on the product Fock space, as `(row, col, value)` triplets.
#[derive(Debug, Clone, PartialEq)]
struct SparseOp {
    dim: usize,
    entries: Vec<(usize, usize, C64)>,
}

impl SparseOp {
    fn from_dense(m: &DMatrix<C64>) -> Self {
        let mut entries = Vec::new();
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                if m[(r, c)] != ZERO {
                    entries.push((r, c, m[(r, c)]));
                }
            }
        }
        Self {
            dim: m.nrows(),
            entries,
        }
    }

    fn adjoint(&self) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|&(r, c, v)| (c, r, v.conj())).collect(),
        }
    }

    /// `out += coef · (self · rho)`, row-major `dim × dim` buffers.
    fn left_apply(&self, coef: C64, rho: &[C64], out: &mut [C64]) {
        let d = self.dim;
        for &(r, k, v) in &self.entries {
            let w = coef * v;
            let src = &rho[k * d..(k + 1) * d];
            let dst = &mut out[r * d..(r + 1) * d];
            for (o, s) in dst.iter_mut().zip(src) {
                *o += w * s;
            }
        }
    }

    /// `out += coef · (rho · self)`.
    fn right_apply(&self, coef: C64, rho: &[C64], out: &mut [C64]) {
        let d = self.dim;
        for &(k, c, v) in &self.entries {
            let w = coef * v;
            for r in 0..d {
                out[r * d + c] += w * rho[r * d + k];
            }
        }
    }

    /// `Tr(self · rho)`.
    fn expectation(&self, rho: &[C64]) -> C64 {
        let d = self.dim;
        self.entries.iter().map(|&(r, k, v)| v * rho[k * d + r]).sum()
    }
}

fn single_mode_annihilation(d: usize) -> DMatrix<C64> {
    DMatrix::from_fn(d, d, |r, c| {
        if c == r + 1 {
            C64::new((c as f64).sqrt(), 0.0)
        } else {
            ZERO
        }
    })
}

fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    a.kronecker(b)
}

/// Annihilation operator of `mode` on the product space (mode 0 is the
/// most significant index).
fn annihilation(mode: usize, d: usize, modes: usize) -> DMatrix<C64> {
    let a = single_mode_annihilation(d);
    let id = DMatrix::<C64>::identity(d, d);
    match (modes, mode) {
        (1, 0) => a,
        (2, 0) => kron(&a, &id),
        (2, 1) => kron(&id, &a),
        _ => unreachable!("validated mode count"),
    }
}

/// Cavities coupled directly, for the quantum model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumSystem {
    cavities: Vec<CavityParams>,
    g: f64,
    frame: f64,
}

impl QuantumSystem {
    pub fn new(cavities: Vec<CavityParams>, g: f64, frame: f64) -> Result<Self> {
        if !(1..=2).contains(&cavities.len()) {
            return Err(Error::InvalidParameter {
                name: "cavities",
                reason: format!("{} cavities; 1 or 2 supported", cavities.len()),
            });
        }
        if let Some(j) = cavities.iter().position(|c| c.gamma() != 0.0) {
            return Err(Error::InconsistentParams(format!(
                "cavity {} has a cable port; the quantum model covers direct coupling only",
                j + 1
            )));
        }
        if !(g.is_finite() && g >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "g",
                reason: format!("{g} must be finite and non-negative"),
            });
        }
        if cavities.len() == 1 && g != 0.0 {
            return Err(Error::InconsistentParams("coupling given for a single cavity".into()));
        }
        if !frame.is_finite() {
            return Err(Error::NonFinite("frame frequency"));
        }
        Ok(Self { cavities, g, frame })
    }

    pub fn cavities(&self) -> &[CavityParams] {
        &self.cavities
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn frame(&self) -> f64 {
        self.frame
    }

    pub fn with_g(&self, g: f64) -> Result<Self> {
        Self::new(self.cavities.clone(), g, self.frame)
    }

    pub fn modes(&self) -> usize {
        self.cavities.len()
    }
}

/// Matrix-free action of the master-equation generator.
#[derive(Debug, Clone)]
pub struct Liouvillian {
    dim: usize,
    dim_per_mode: usize,
    /// `H − (i/2) Σ r L†L`
    effective_hamiltonian: SparseOp,
    effective_hamiltonian_dag: SparseOp,
    jumps: Vec<(f64, SparseOp, SparseOp)>,
    annihilators: Vec<SparseOp>,
    numbers: Vec<SparseOp>,
}

impl Liouvillian {
    pub fn new(system: &QuantumSystem, config: &FockConfig) -> Result<Self> {
        config.validate()?;
        if system.modes() != config.modes {
            return Err(Error::InconsistentParams(format!(
                "{} cavities but Fock config has {} modes",
                system.modes(),
                config.modes
            )));
        }
        let d = config.dim_per_mode;
        let modes = config.modes;
        let dim = config.hilbert_dim();
        let ops: Vec<DMatrix<C64>> = (0..modes).map(|j| annihilation(j, d, modes)).collect();
        let numbers: Vec<DMatrix<C64>> = ops.iter().map(|a| a.adjoint() * a).collect();

        let mut h = DMatrix::from_element(dim, dim, ZERO);
        for (c, n) in system.cavities().iter().zip(&numbers) {
            h += n * C64::new(c.omega() - system.frame(), 0.0);
        }
        if modes == 2 && system.g() != 0.0 {
            let hop = ops[0].adjoint() * &ops[1];
            h += (&hop + hop.adjoint()) * C64::new(system.g(), 0.0);
        }

        let mut jumps = Vec::new();
        for (c, a) in system.cavities().iter().zip(&ops) {
            let kappa = c.kappa();
            let loss = kappa * (config.n_thermal + 1.0);
            let gain = kappa * config.n_thermal;
            if loss > 0.0 {
                jumps.push((loss, a.clone()));
            }
            if gain > 0.0 {
                jumps.push((gain, a.adjoint()));
            }
        }
        let mut h_eff = h;
        for (rate, l) in &jumps {
            h_eff -= (l.adjoint() * l) * C64::new(0.0, 0.5 * rate);
        }
        let effective_hamiltonian = SparseOp::from_dense(&h_eff);
        Ok(Self {
            dim,
            dim_per_mode: d,
            effective_hamiltonian_dag: effective_hamiltonian.adjoint(),
            effective_hamiltonian,
            jumps: jumps
                .into_iter()
                .map(|(r, l)| {
                    let sparse = SparseOp::from_dense(&l);
                    let dag = sparse.adjoint();
                    (r, sparse, dag)
                })
                .collect(),
            annihilators: ops.iter().map(SparseOp::from_dense).collect(),
            numbers: numbers.iter().map(SparseOp::from_dense).collect(),
        })
    }

    pub fn hilbert_dim(&self) -> usize {
        self.dim
    }

    /// Writes `dρ/dt` into `out`. `scratch` must hold `dim²` entries.
    pub fn apply(&self, rho: &[C64], out: &mut [C64], scratch: &mut [C64]) {
        out.fill(ZERO);
        self.effective_hamiltonian.left_apply(-I, rho, out);
        self.effective_hamiltonian_dag.right_apply(I, rho, out);
        for (rate, l, l_dag) in &self.jumps {
            scratch.fill(ZERO);
            l.left_apply(C64::new(1.0, 0.0), rho, scratch);
            l_dag.right_apply(C64::new(*rate, 0.0), scratch, out);
        }
    }

    /// Dense superoperator acting on row-major `vec(ρ)`; only for small spaces.
    pub fn dense_superoperator(&self) -> Result<DMatrix<C64>> {
        if self.dim > DENSE_SUPEROPERATOR_LIMIT {
            return Err(Error::InvalidParameter {
                name: "hilbert_dim",
                reason: format!(
                    "{} exceeds the dense superoperator limit {DENSE_SUPEROPERATOR_LIMIT}",
                    self.dim
                ),
            });
        }
        let n = self.dim * self.dim;
        let mut sup = DMatrix::from_element(n, n, ZERO);
        let mut basis = vec![ZERO; n];
        let mut out = vec![ZERO; n];
        let mut scratch = vec![ZERO; n];
        for k in 0..n {
            basis[k] = C64::new(1.0, 0.0);
            self.apply(&basis, &mut out, &mut scratch);
            sup.column_mut(k).copy_from_slice(&out);
            basis[k] = ZERO;
        }
        Ok(sup)
    }

    /// `⟨a_j⟩`.
    pub fn mean_field(&self, mode: usize, rho: &[C64]) -> C64 {
        self.annihilators[mode].expectation(rho)
    }

    /// `⟨a_j†a_j⟩`.
    pub fn mean_number(&self, mode: usize, rho: &[C64]) -> f64 {
        self.numbers[mode].expectation(rho).re
    }

    /// Population of the highest retained Fock level of `mode`.
    pub fn top_level_population(&self, mode: usize, rho: &[C64]) -> f64 {
        let d = self.dim_per_mode;
        let modes = self.annihilators.len();
        let stride = d.pow((modes - 1 - mode) as u32);
        (0..self.dim)
            .filter(|i| (i / stride) % d == d - 1)
            .map(|i| rho[i * self.dim + i].re)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityState {
    pub rho: DMatrix<C64>,
    pub time: f64,
}

impl DensityState {
    fn from_row_major(dim: usize, data: &[C64], time: f64) -> Self {
        Self {
            rho: DMatrix::from_row_slice(dim, dim, data),
            time,
        }
    }

    pub fn trace(&self) -> C64 {
        self.rho.trace()
    }

    /// `max |ρ − ρ†|`.
    pub fn hermiticity_error(&self) -> f64 {
        (&self.rho - self.rho.adjoint()).camax()
    }

    /// Smallest eigenvalue of the Hermitian part of ρ.
    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.rho + self.rho.adjoint()) * C64::new(0.5, 0.0);
        h.symmetric_eigenvalues().min()
    }
}

/// Normalized coherent-state coefficients truncated to `d` Fock levels.
pub fn coherent_amplitudes(alpha: C64, d: usize) -> Vec<C64> {
    let mut coeffs = Vec::with_capacity(d);
    let mut term = C64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    for n in 0..d {
        if n > 0 {
            term = term * alpha / (n as f64).sqrt();
        }
        coeffs.push(term);
    }
    let norm = coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    coeffs.iter().map(|c| c / norm).collect()
}

fn product_state(init: &InitialState, d: usize) -> Vec<C64> {
    init.amplitudes()
        .iter()
        .map(|&alpha| coherent_amplitudes(alpha, d))
        .fold(vec![C64::new(1.0, 0.0)], |acc, mode| {
            acc.iter()
                .flat_map(|a| mode.iter().map(move |b| a * b))
                .collect()
        })
}

fn check_truncation(init: &InitialState, config: &FockConfig) -> Result<()> {
    for (j, alpha) in init.amplitudes().iter().enumerate() {
        let a = alpha.norm();
        if a * a + 5.0 * a >= config.dim_per_mode as f64 {
            return Err(Error::DimensionTooSmall(format!(
                "|α_{}|² + 5|α_{}| = {:.3} is not below d = {}",
                j + 1,
                j + 1,
                a * a + 5.0 * a,
                config.dim_per_mode
            )));
        }
    }
    Ok(())
}

/// Product of truncated coherent states as a density matrix.
pub fn coherent_density(init: &InitialState, config: &FockConfig) -> Result<DensityState> {
    if init.dim() != config.modes {
        return Err(Error::InconsistentParams(format!(
            "initial state has {} modes, Fock config has {}",
            init.dim(),
            config.modes
        )));
    }
    let psi = product_state(init, config.dim_per_mode);
    let dim = psi.len();
    Ok(DensityState {
        rho: DMatrix::from_fn(dim, dim, |r, c| psi[r] * psi[c].conj()),
        time: 0.0,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LindbladRun {
    pub times: Vec<f64>,
    /// `⟨a_j⟩` per mode and sample.
    pub mean_field: Vec<Vec<C64>>,
    /// `⟨n_j⟩` per mode and sample.
    pub mean_number: Vec<Vec<f64>>,
    pub max_leakage: f64,
    pub max_trace_error: f64,
    pub max_hermiticity_error: f64,
    pub final_state: DensityState,
}

impl LindbladRun {
    pub fn lifetime(&self, mode: usize, omega: f64) -> Result<LifetimeResult> {
        let series = self.mean_number.get(mode).ok_or(Error::ModeOutOfRange {
            index: mode,
            dim: self.mean_number.len(),
        })?;
        lifetime_from_series(&self.times, series, omega).map_err(|e| match e {
            Error::UndefinedLifetime(_) => Error::UndefinedLifetime(mode),
            other => other,
        })
    }
}

/// Integrates the master equation from a product of coherent states and
/// records first moments and photon numbers at every sample.
pub fn lindblad_evolve(
    system: &QuantumSystem,
    init: &InitialState,
    config: &FockConfig,
    grid: &SampleGrid,
) -> Result<LindbladRun> {
    check_truncation(init, config)?;
    let liouvillian = Liouvillian::new(system, config)?;
    let start = coherent_density(init, config)?;
    let dim = liouvillian.hilbert_dim();
    let modes = config.modes;

    let mut rho: Vec<C64> = (0..dim * dim).map(|k| start.rho[(k / dim, k % dim)]).collect();
    let mut scratch = vec![ZERO; dim * dim];
    let mut rhs = |_t: f64, y: &[C64], dy: &mut [C64]| liouvillian.apply(y, dy, &mut scratch);
    let mut integrator = DormandPrince::new(dim * dim, INTEGRATOR_TOLERANCES);

    let mut mean_field = vec![Vec::with_capacity(grid.len()); modes];
    let mut mean_number = vec![Vec::with_capacity(grid.len()); modes];
    let (mut max_leakage, mut max_trace_error, mut max_herm) = (0.0f64, 0.0f64, 0.0f64);
    let mut t = 0.0;
    for &tk in grid.times() {
        integrator.advance(&mut rhs, t, tk, &mut rho)?;
        t = tk;
        for j in 0..modes {
            let leak = liouvillian.top_level_population(j, &rho);
            max_leakage = max_leakage.max(leak);
            if leak > config.leakage_threshold {
                return Err(Error::DimensionTooSmall(format!(
                    "top Fock level of mode {} holds {leak:e} at t = {tk} (threshold {:e})",
                    j + 1,
                    config.leakage_threshold
                )));
            }
            mean_field[j].push(liouvillian.mean_field(j, &rho));
            mean_number[j].push(liouvillian.mean_number(j, &rho));
        }
        let trace: C64 = (0..dim).map(|i| rho[i * dim + i]).sum();
        max_trace_error = max_trace_error.max((trace - 1.0).norm());
        let mut herm = 0.0f64;
        for r in 0..dim {
            for c in r + 1..dim {
                herm = herm.max((rho[r * dim + c] - rho[c * dim + r].conj()).norm());
            }
            herm = herm.max(rho[r * dim + r].im.abs() * 2.0);
        }
        max_herm = max_herm.max(herm);
    }
    Ok(LindbladRun {
        times: grid.times().to_vec(),
        mean_field,
        mean_number,
        max_leakage,
        max_trace_error,
        max_hermiticity_error: max_herm,
        final_state: DensityState::from_row_major(dim, &rho, t),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LindbladSweep {
    pub delta_phis: Vec<f64>,
    pub gs: Vec<f64>,
    /// `lifetimes[g_index][delta_phi_index][cavity]`
    pub lifetimes: Vec<Vec<[LifetimeResult; 2]>>,
}

impl LindbladSweep {
    /// `t_1e` of `cavity` along the Δφ axis at one coupling.
    pub fn row(&self, g_index: usize, cavity: usize) -> Vec<Option<f64>> {
        self.lifetimes[g_index].iter().map(|p| p[cavity].t_1e).collect()
    }
}

/// Lifetimes of both cavities over a (g, Δφ) grid from the master equation.
pub fn lindblad_lifetime_sweep(
    base: &QuantumSystem,
    delta_phis: &[f64],
    gs: &[f64],
    alpha: f64,
    config: &FockConfig,
    grid: &SampleGrid,
) -> Result<LindbladSweep> {
    if base.modes() != 2 {
        return Err(Error::InvalidSweep("the Lindblad sweep needs two cavities".into()));
    }
    let jobs: Vec<(usize, usize)> = (0..gs.len())
        .flat_map(|gi| (0..delta_phis.len()).map(move |pi| (gi, pi)))
        .collect();
    let results = jobs
        .par_iter()
        .map(|&(gi, pi)| {
            let system = base.with_g(gs[gi])?;
            let init = InitialState::coherent_pair(alpha, delta_phis[pi])?;
            let run = lindblad_evolve(&system, &init, config, grid)?;
            Ok([run.lifetime(0, base.frame())?, run.lifetime(1, base.frame())?])
        })
        .collect::<Result<Vec<_>>>()?;
    let lifetimes = results
        .chunks(delta_phis.len().max(1))
        .map(|row| row.to_vec())
        .collect();
    Ok(LindbladSweep {
        delta_phis: delta_phis.to_vec(),
        gs: gs.to_vec(),
        lifetimes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cav(kappa: f64) -> CavityParams {
        CavityParams::new(5.0, kappa, 0.0, 0.0).unwrap()
    }

    fn random_hermitian(dim: usize, seed: u64) -> Vec<C64> {
        // small LCG; only needs to be deterministic
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut m = vec![ZERO; dim * dim];
        for r in 0..dim {
            for c in r..dim {
                let z = if r == c {
                    C64::new(next(), 0.0)
                } else {
                    C64::new(next(), next())
                };
                m[r * dim + c] = z;
                m[c * dim + r] = z.conj();
            }
        }
        m
    }

    #[test]
    fn config_validation() {
        assert!(FockConfig::new(1, 0.0, 1).is_err());
        assert!(FockConfig::new(4, -0.1, 1).is_err());
        assert!(FockConfig::new(4, 0.0, 3).is_err());
        assert_eq!(FockConfig::new(4, 0.0, 2).unwrap().hilbert_dim(), 16);
    }

    #[test]
    fn one_photon_decays_at_kappa() {
        let cfg = FockConfig::new(4, 0.0, 1).unwrap();
        let sys = QuantumSystem::new(vec![cav(1.0)], 0.0, 5.0).unwrap();
        let l = Liouvillian::new(&sys, &cfg).unwrap();
        let d = 4;
        let mut rho = vec![ZERO; d * d];
        rho[d + 1] = C64::new(1.0, 0.0);
        let mut out = vec![ZERO; d * d];
        let mut scratch = vec![ZERO; d * d];
        l.apply(&rho, &mut out, &mut scratch);
        assert!((l.mean_number(0, &out) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn generator_is_trace_free() {
        let cfg = FockConfig::new(3, 0.4, 2).unwrap();
        let sys = QuantumSystem::new(vec![cav(0.7), cav(1.3)], 0.4, 5.2).unwrap();
        let l = Liouvillian::new(&sys, &cfg).unwrap();
        let dim = l.hilbert_dim();
        for seed in 0..5 {
            let rho = random_hermitian(dim, seed);
            let mut out = vec![ZERO; dim * dim];
            let mut scratch = vec![ZERO; dim * dim];
            l.apply(&rho, &mut out, &mut scratch);
            let tr: C64 = (0..dim).map(|i| out[i * dim + i]).sum();
            assert!(tr.norm() < 1e-13, "{tr}");
        }
    }

    #[test]
    fn uncoupled_generator_is_sum_of_single_mode_generators() {
        let d = 3;
        let cfg2 = FockConfig::new(d, 0.2, 2).unwrap();
        let cfg1 = FockConfig::new(d, 0.2, 1).unwrap();
        let (c1, c2) = (cav(0.7), CavityParams::new(5.3, 0.4, 0.1, 0.0).unwrap());
        let pair = Liouvillian::new(&QuantumSystem::new(vec![c1, c2], 0.0, 5.0).unwrap(), &cfg2)
            .unwrap()
            .dense_superoperator()
            .unwrap();
        let l1 = Liouvillian::new(&QuantumSystem::new(vec![c1], 0.0, 5.0).unwrap(), &cfg1)
            .unwrap()
            .dense_superoperator()
            .unwrap();
        let l2 = Liouvillian::new(&QuantumSystem::new(vec![c2], 0.0, 5.0).unwrap(), &cfg1)
            .unwrap()
            .dense_superoperator()
            .unwrap();
        // Row-major vec(ρ) of a product space: index (i1, i2, j1, j2).
        let perm = |i1: usize, i2: usize, j1: usize, j2: usize| ((i1 * d + i2) * d + j1) * d + j2;
        let single = |i: usize, j: usize| i * d + j;
        let n = d.pow(4);
        let mut sum = DMatrix::from_element(n, n, ZERO);
        for (i1, i2, j1, j2) in itertools(d) {
            for (k1, k2, l1_, l2_) in itertools(d) {
                let row = perm(i1, i2, j1, j2);
                let col = perm(k1, k2, l1_, l2_);
                let mut v = ZERO;
                if i2 == k2 && j2 == l2_ {
                    v += l1[(single(i1, j1), single(k1, l1_))];
                }
                if i1 == k1 && j1 == l1_ {
                    v += l2[(single(i2, j2), single(k2, l2_))];
                }
                sum[(row, col)] = v;
            }
        }
        assert!((&pair - &sum).camax() < 1e-14);
    }

    fn itertools(d: usize) -> impl Iterator<Item = (usize, usize, usize, usize)> {
        (0..d.pow(4)).map(move |k| (k / d.pow(3), (k / d.pow(2)) % d, (k / d) % d, k % d))
    }

    #[test]
    fn matrix_free_matches_dense_superoperator() {
        let cfg = FockConfig::new(3, 0.1, 2).unwrap();
        let sys = QuantumSystem::new(vec![cav(0.5), cav(0.9)], 0.3, 5.1).unwrap();
        let l = Liouvillian::new(&sys, &cfg).unwrap();
        let sup = l.dense_superoperator().unwrap();
        let dim = l.hilbert_dim();
        let rho = random_hermitian(dim, 42);
        let mut out = vec![ZERO; dim * dim];
        let mut scratch = vec![ZERO; dim * dim];
        l.apply(&rho, &mut out, &mut scratch);
        let dense = &sup * nalgebra::DVector::from_column_slice(&rho);
        let diff = out.iter().zip(dense.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(diff < 1e-14);
    }

    #[test]
    fn dense_superoperator_is_limited() {
        let cfg = FockConfig::new(10, 0.0, 2).unwrap();
        let sys = QuantumSystem::new(vec![cav(1.0), cav(1.0)], 0.3, 5.0).unwrap();
        let l = Liouvillian::new(&sys, &cfg).unwrap();
        assert!(l.dense_superoperator().is_err());
    }

    #[test]
    fn coherent_state_decay() {
        let cfg = FockConfig::new(10, 0.0, 1).unwrap();
        let sys = QuantumSystem::new(vec![cav(1.0)], 0.0, 5.0).unwrap();
        let grid = SampleGrid::uniform(3.0, 31).unwrap();
        let init = InitialState::new(vec![C64::new(1.0, 0.0)]).unwrap();
        let run = lindblad_evolve(&sys, &init, &cfg, &grid).unwrap();
        // pure loss keeps ⟨n⟩ exponential even in the truncated space
        let n0 = run.mean_number[0][0];
        assert!((n0 - 1.0).abs() < 2e-6);
        for (k, &t) in grid.times().iter().enumerate() {
            assert!((run.mean_number[0][k] - n0 * (-t).exp()).abs() < 1e-9);
        }
        assert!(run.max_trace_error < 1e-8);
        assert!(run.max_hermiticity_error < 1e-10);
    }

    #[test]
    fn coherent_state_decays_as_exponential() {
        let cfg = FockConfig::new(12, 0.0, 1).unwrap();
        let sys = QuantumSystem::new(vec![cav(1.0)], 0.0, 5.0).unwrap();
        let grid = SampleGrid::uniform(3.0, 31).unwrap();
        let init = InitialState::new(vec![C64::new(1.0, 0.0)]).unwrap();
        let run = lindblad_evolve(&sys, &init, &cfg, &grid).unwrap();
        for (k, &t) in grid.times().iter().enumerate() {
            assert!((run.mean_number[0][k] - (-t).exp()).abs() < 1e-7);
        }
    }

    #[test]
    fn truncation_margin_is_enforced() {
        let cfg = FockConfig::new(6, 0.0, 1).unwrap();
        let sys = QuantumSystem::new(vec![cav(1.0)], 0.0, 5.0).unwrap();
        let grid = SampleGrid::uniform(1.0, 3).unwrap();
        let init = InitialState::new(vec![C64::new(1.0, 0.0)]).unwrap();
        assert!(matches!(
            lindblad_evolve(&sys, &init, &cfg, &grid),
            Err(Error::DimensionTooSmall(_))
        ));
    }

    #[test]
    fn leakage_monitor_aborts() {
        let cfg = FockConfig::new(8, 0.0, 1)
            .unwrap()
            .with_leakage_threshold(1e-6)
            .unwrap();
        let sys = QuantumSystem::new(vec![cav(1.0)], 0.0, 5.0).unwrap();
        let grid = SampleGrid::uniform(1.0, 3).unwrap();
        let init = InitialState::new(vec![C64::new(1.0, 0.0)]).unwrap();
        let err = lindblad_evolve(&sys, &init, &cfg, &grid).unwrap_err();
        assert!(matches!(err, Error::DimensionTooSmall(ref m) if m.contains("top Fock level")));
    }

    #[test]
    fn thermal_occupancy_limits() {
        assert_eq!(thermal_occupancy(0.0, 1e10), 0.0);
        let omega = 2.0 * std::f64::consts::PI * 1.3e9;
        assert!(thermal_occupancy(0.010, omega) < 1e-2);
        // high-temperature limit kT/ħω
        let hot = thermal_occupancy(300.0, omega);
        let classical = BOLTZMANN * 300.0 / (HBAR * omega);
        assert!((hot - classical).abs() / classical < 1e-3);
    }

    #[test]
    fn coherent_amplitudes_are_normalized() {
        let c = coherent_amplitudes(C64::new(0.6, -0.8), 12);
        let norm: f64 = c.iter().map(|z| z.norm_sqr()).sum();
        assert!((norm - 1.0).abs() < 1e-15);
    }
}
