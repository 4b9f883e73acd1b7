//! Cavity and coupling descriptions, and their reduction to a single linear
//! generator acting on rotating-frame mode envelopes.
//!
//! Every model produced here has the form `dA/dt = M·A + s`, where `A` holds
//! the complex envelopes `A_j = a_j e^{iω_f t}` in a frame rotating at
//! `frame_frequency`, and `s_j = -√κ_ej · a_in,j` is the port drive.
//! Direct coupling contributes `-ig` off-diagonals. A cable contributes a
//! complex self-shift `δω_j` on the diagonal and an effective coupling `g_eff`
//! off the diagonal after its two junction fields are eliminated.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Below this distance from 1 the cable round-trip factor is treated as singular.
pub const CABLE_RESONANCE_THRESHOLD: f64 = 1e-9;

fn check_rate(name: &'static str, value: f64) -> Result<()> {
    if !value.is_finite() {
        return Err(Error::InvalidParameter {
            name,
            reason: format!("{value} is not finite"),
        });
    }
    if value < 0.0 {
        return Err(Error::InvalidParameter {
            name,
            reason: format!("{value} is negative"),
        });
    }
    Ok(())
}

/// One cavity mode. All rates are angular (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityParams {
    omega: f64,
    kappa_i: f64,
    kappa_e: f64,
    gamma: f64,
}

impl CavityParams {
    pub fn new(omega: f64, kappa_i: f64, kappa_e: f64, gamma: f64) -> Result<Self> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::InvalidParameter {
                name: "omega",
                reason: format!("{omega} must be positive and finite"),
            });
        }
        check_rate("kappa_i", kappa_i)?;
        check_rate("kappa_e", kappa_e)?;
        check_rate("gamma", gamma)?;
        Ok(Self {
            omega,
            kappa_i,
            kappa_e,
            gamma,
        })
    }

    /// A cavity without a cable port.
    pub fn uncabled(omega: f64, kappa_i: f64, kappa_e: f64) -> Result<Self> {
        Self::new(omega, kappa_i, kappa_e, 0.0)
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn kappa_i(&self) -> f64 {
        self.kappa_i
    }

    pub fn kappa_e(&self) -> f64 {
        self.kappa_e
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Total loss rate `κ_i + κ_e + γ`.
    pub fn kappa(&self) -> f64 {
        self.kappa_i + self.kappa_e + self.gamma
    }

    /// Loss rate of the cavity with its cable port removed.
    pub fn bare_kappa(&self) -> f64 {
        self.kappa_i + self.kappa_e
    }
}

/// A single-mode transmission line joining two cavities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CableSpec {
    /// One-way phase shift, stored unreduced.
    pub theta: f64,
    /// One-way attenuation exponent γ₀L₀ (field picks up `e^{-γ₀L₀/2}`).
    pub gamma0l0: f64,
}

impl CableSpec {
    pub fn new(theta: f64, gamma0l0: f64) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::NonFinite("theta"));
        }
        check_rate("gamma0l0", gamma0l0)?;
        Ok(Self { theta, gamma0l0 })
    }

    /// One-way propagation factor `e^{iθ - γ₀L₀/2}`.
    pub fn one_way(&self) -> C64 {
        C64::from_polar((-0.5 * self.gamma0l0).exp(), phase::wrap(self.theta))
    }

    /// Round-trip factor `e^{2iθ - γ₀L₀}`.
    pub fn round_trip(&self) -> C64 {
        C64::from_polar((-self.gamma0l0).exp(), phase::wrap(2.0 * phase::wrap(self.theta)))
    }

    /// `1 - e^{2iθ-γ₀L₀}`, or an error when it vanishes.
    fn resonance_denominator(&self) -> Result<C64> {
        let denom = C64::new(1.0, 0.0) - self.round_trip();
        let distance = denom.norm();
        if distance < CABLE_RESONANCE_THRESHOLD {
            return Err(Error::CableResonance { distance });
        }
        Ok(denom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CouplingSpec {
    Direct { g: f64 },
    Cable(CableSpec),
}

impl CouplingSpec {
    pub fn direct(g: f64) -> Result<Self> {
        check_rate("g", g)?;
        Ok(CouplingSpec::Direct { g })
    }

    pub fn cable(theta: f64, gamma0l0: f64) -> Result<Self> {
        CableSpec::new(theta, gamma0l0).map(CouplingSpec::Cable)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CouplingSpec::Direct { .. } => "direct",
            CouplingSpec::Cable(_) => "cable",
        }
    }
}

/// Reduced-model parameters obtained by eliminating the cable fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveCoupling {
    pub delta_omega: [C64; 2],
    pub g_eff: C64,
    /// Tunneling phase `3π/2 + arg(g_eff)` in `[0, 2π)`.
    pub zeta: f64,
    pub kappa_eff: [f64; 2],
}

impl EffectiveCoupling {
    /// Effective detunings `Δ_j = ω_drive − ω_j − Re δω_j`.
    pub fn detunings(&self, c1: &CavityParams, c2: &CavityParams, drive_frequency: f64) -> [f64; 2] {
        [
            drive_frequency - c1.omega() - self.delta_omega[0].re,
            drive_frequency - c2.omega() - self.delta_omega[1].re,
        ]
    }
}

/// Junction fields at the two cable ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CableFields {
    pub b1: C64,
    pub b2: C64,
}

/// Rotating-frame generator of a set of coupled modes.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    matrix: DMatrix<C64>,
    input_couplings: Vec<f64>,
    frame_frequency: f64,
    labels: Vec<String>,
}

impl LinearModel {
    pub fn new(
        matrix: DMatrix<C64>,
        input_couplings: Vec<f64>,
        frame_frequency: f64,
        labels: Vec<String>,
    ) -> Result<Self> {
        let dim = matrix.nrows();
        if dim == 0 || matrix.ncols() != dim {
            return Err(Error::InconsistentParams(format!(
                "generator must be square and non-empty, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if input_couplings.len() != dim || labels.len() != dim {
            return Err(Error::InconsistentParams(format!(
                "{dim} modes but {} input couplings and {} labels",
                input_couplings.len(),
                labels.len()
            )));
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("generator matrix"));
        }
        if !frame_frequency.is_finite() {
            return Err(Error::NonFinite("frame frequency"));
        }
        for (j, &c) in input_couplings.iter().enumerate() {
            if !(c.is_finite() && c >= 0.0) {
                return Err(Error::InvalidParameter {
                    name: "input_couplings",
                    reason: format!("entry {j} = {c}"),
                });
            }
        }
        let scale = matrix.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
        for j in 0..dim {
            if matrix[(j, j)].re > 1e-12 * scale {
                return Err(Error::InconsistentParams(format!(
                    "diagonal entry {j} has positive real part {} (gain)",
                    matrix[(j, j)].re
                )));
            }
        }
        if dim == 2 && (matrix[(0, 1)] - matrix[(1, 0)]).norm() > 1e-12 * scale {
            return Err(Error::InconsistentParams(
                "two-mode generator must have equal off-diagonal entries".into(),
            ));
        }
        Ok(Self {
            matrix,
            input_couplings,
            frame_frequency,
            labels,
        })
    }

    /// One decoupled mode.
    pub fn single_mode(cavity: &CavityParams, frame: f64) -> Result<Self> {
        let m = DMatrix::from_element(1, 1, diagonal_entry(cavity.omega(), cavity.kappa(), frame));
        Self::new(m, vec![cavity.kappa_e().sqrt()], frame, vec!["cavity1".into()])
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn input_couplings(&self) -> &[f64] {
        &self.input_couplings
    }

    pub fn frame_frequency(&self) -> f64 {
        self.frame_frequency
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Same physics expressed in a frame rotating at `frame`.
    pub fn with_frame(&self, frame: f64) -> Self {
        let shift = I * (frame - self.frame_frequency);
        let mut matrix = self.matrix.clone();
        for j in 0..self.dim() {
            matrix[(j, j)] += shift;
        }
        Self {
            matrix,
            input_couplings: self.input_couplings.clone(),
            frame_frequency: frame,
            labels: self.labels.clone(),
        }
    }

    pub fn check_mode(&self, index: usize) -> Result<()> {
        if index >= self.dim() {
            return Err(Error::ModeOutOfRange {
                index,
                dim: self.dim(),
            });
        }
        Ok(())
    }
}

fn diagonal_entry(omega: f64, kappa: f64, frame: f64) -> C64 {
    C64::new(-0.5 * kappa, -(omega - frame))
}

fn two_mode_labels() -> Vec<String> {
    vec!["cavity1".into(), "cavity2".into()]
}

/// Two cavities coupled through field overlap with strength `g`.
pub fn build_direct_model(
    c1: &CavityParams,
    c2: &CavityParams,
    coupling: &CouplingSpec,
    frame: f64,
) -> Result<LinearModel> {
    let g = match *coupling {
        CouplingSpec::Direct { g } => g,
        CouplingSpec::Cable(_) => {
            return Err(Error::VariantMismatch {
                expected: "direct",
                found: "cable",
            })
        }
    };
    for (j, c) in [c1, c2].into_iter().enumerate() {
        if c.gamma() != 0.0 {
            return Err(Error::InconsistentParams(format!(
                "cavity {} has cable rate {} in a directly coupled model",
                j + 1,
                c.gamma()
            )));
        }
    }
    let off = -I * g;
    let m = DMatrix::from_row_slice(
        2,
        2,
        &[
            diagonal_entry(c1.omega(), c1.kappa(), frame),
            off,
            off,
            diagonal_entry(c2.omega(), c2.kappa(), frame),
        ],
    );
    LinearModel::new(
        m,
        vec![c1.kappa_e().sqrt(), c2.kappa_e().sqrt()],
        frame,
        two_mode_labels(),
    )
}

fn cable_of(coupling: &CouplingSpec) -> Result<&CableSpec> {
    match coupling {
        CouplingSpec::Cable(c) => Ok(c),
        CouplingSpec::Direct { .. } => Err(Error::VariantMismatch {
            expected: "cable",
            found: "direct",
        }),
    }
}

/// Solves the junction relations
/// `b1 = b2·p + √γ1·a1`, `b2 = b1·p + √γ2·a2` with `p = e^{iθ-γ₀L₀/2}`.
pub fn eliminate_cable(
    a1: C64,
    a2: C64,
    gamma1: f64,
    gamma2: f64,
    cable: &CableSpec,
) -> Result<CableFields> {
    check_rate("gamma1", gamma1)?;
    check_rate("gamma2", gamma2)?;
    let denom = cable.resonance_denominator()?;
    let p = cable.one_way();
    let s1 = a1 * gamma1.sqrt();
    let s2 = a2 * gamma2.sqrt();
    Ok(CableFields {
        b1: (s1 + p * s2) / denom,
        b2: (s2 + p * s1) / denom,
    })
}

/// Complex self-shifts, effective coupling and tunneling phase of a cable link.
pub fn effective_coupling(
    c1: &CavityParams,
    c2: &CavityParams,
    coupling: &CouplingSpec,
) -> Result<EffectiveCoupling> {
    let cable = cable_of(coupling)?;
    let denom = cable.resonance_denominator()?;
    for (j, c) in [c1, c2].into_iter().enumerate() {
        if c.gamma() == 0.0 {
            return Err(Error::ZeroCoupling { cavity: j + 1 });
        }
    }
    let r = cable.round_trip();
    let p = cable.one_way();
    let shift = -I * r / denom;
    let delta_omega = [shift * c1.gamma(), shift * c2.gamma()];
    let g_eff = -I * (c1.gamma() * c2.gamma()).sqrt() * p / denom;
    let zeta = phase::wrap(1.5 * PI + g_eff.arg());
    let kappa_eff = [
        c1.kappa() - 2.0 * delta_omega[0].im,
        c2.kappa() - 2.0 * delta_omega[1].im,
    ];
    Ok(EffectiveCoupling {
        delta_omega,
        g_eff,
        zeta,
        kappa_eff,
    })
}

/// Two cavities coupled through a cable, with the junction fields eliminated.
pub fn build_cable_model(
    c1: &CavityParams,
    c2: &CavityParams,
    coupling: &CouplingSpec,
    frame: f64,
) -> Result<LinearModel> {
    let eff = effective_coupling(c1, c2, coupling)?;
    let off = -I * eff.g_eff;
    let m = DMatrix::from_row_slice(
        2,
        2,
        &[
            diagonal_entry(c1.omega(), c1.kappa(), frame) - I * eff.delta_omega[0],
            off,
            off,
            diagonal_entry(c2.omega(), c2.kappa(), frame) - I * eff.delta_omega[1],
        ],
    );
    LinearModel::new(
        m,
        vec![c1.kappa_e().sqrt(), c2.kappa_e().sqrt()],
        frame,
        two_mode_labels(),
    )
}

/// Dispatches on the coupling variant.
pub fn build_pair_model(
    c1: &CavityParams,
    c2: &CavityParams,
    coupling: &CouplingSpec,
    frame: f64,
) -> Result<LinearModel> {
    match coupling {
        CouplingSpec::Direct { .. } => build_direct_model(c1, c2, coupling, frame),
        CouplingSpec::Cable(_) => build_cable_model(c1, c2, coupling, frame),
    }
}

/// A linear chain of identical-frequency cavities with nearest-neighbour coupling;
/// only the two end cavities have ports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    n: usize,
    g: f64,
    kappa_i: Vec<f64>,
    kappa_e_first: f64,
    kappa_e_last: f64,
    omega: f64,
}

impl ChainSpec {
    pub fn new(
        g: f64,
        kappa_i: Vec<f64>,
        kappa_e_first: f64,
        kappa_e_last: f64,
        omega: f64,
    ) -> Result<Self> {
        let n = kappa_i.len();
        if n < 2 {
            return Err(Error::ChainSize(n));
        }
        check_rate("g", g)?;
        check_rate("kappa_e_first", kappa_e_first)?;
        check_rate("kappa_e_last", kappa_e_last)?;
        for &k in &kappa_i {
            check_rate("kappa_i", k)?;
        }
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::InvalidParameter {
                name: "omega",
                reason: format!("{omega} must be positive and finite"),
            });
        }
        Ok(Self {
            n,
            g,
            kappa_i,
            kappa_e_first,
            kappa_e_last,
            omega,
        })
    }

    pub fn uniform(
        n: usize,
        g: f64,
        kappa_i: f64,
        kappa_e_first: f64,
        kappa_e_last: f64,
        omega: f64,
    ) -> Result<Self> {
        Self::new(g, vec![kappa_i; n], kappa_e_first, kappa_e_last, omega)
    }

    /// Same chain with `n` cavities; needs a uniform internal rate.
    pub fn resized(&self, n: usize) -> Result<Self> {
        let k0 = self.kappa_i[0];
        if self.kappa_i.iter().any(|&k| k != k0) {
            return Err(Error::InconsistentParams(
                "only chains with a uniform internal rate can be resized".into(),
            ));
        }
        Self::uniform(n, self.g, k0, self.kappa_e_first, self.kappa_e_last, self.omega)
    }

    pub fn with_g(&self, g: f64) -> Result<Self> {
        Self::new(
            g,
            self.kappa_i.clone(),
            self.kappa_e_first,
            self.kappa_e_last,
            self.omega,
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn kappa_i(&self) -> &[f64] {
        &self.kappa_i
    }

    pub fn kappa_e_first(&self) -> f64 {
        self.kappa_e_first
    }

    pub fn kappa_e_last(&self) -> f64 {
        self.kappa_e_last
    }

    /// External rate of cavity `j`; zero for interior cavities.
    pub fn kappa_e(&self, j: usize) -> f64 {
        if j == 0 {
            self.kappa_e_first
        } else if j + 1 == self.n {
            self.kappa_e_last
        } else {
            0.0
        }
    }

    /// Total loss rate of cavity `j`.
    pub fn kappa(&self, j: usize) -> f64 {
        self.kappa_i[j] + self.kappa_e(j)
    }
}

pub fn build_chain_model(spec: &ChainSpec, frame: f64) -> Result<LinearModel> {
    let n = spec.n();
    if n < 2 {
        return Err(Error::ChainSize(n));
    }
    let off = -I * spec.g();
    let m = DMatrix::from_fn(n, n, |r, c| {
        if r == c {
            diagonal_entry(spec.omega(), spec.kappa(r), frame)
        } else if r.abs_diff(c) == 1 {
            off
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let couplings = (0..n).map(|j| spec.kappa_e(j).sqrt()).collect();
    let labels = (1..=n).map(|j| format!("cavity{j}")).collect();
    LinearModel::new(m, couplings, frame, labels)
}
