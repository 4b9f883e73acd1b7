use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use proptest::prelude::*;

use coupled_cavity::dynamics::{
    evolve_free, evolve_free_with, steady_state, DriveSpec, InitialState, Propagator, SampleGrid,
};
use coupled_cavity::model::{
    build_cable_model, build_direct_model, effective_coupling, CavityParams, CouplingSpec,
    LinearModel,
};
use coupled_cavity::ode::Tolerances;
use coupled_cavity::phase;

const FRAME: f64 = 10.0;

/// `M = −iH − diag(κ)/2` with `H` real symmetric.
#[derive(Debug, Clone)]
struct Passive {
    h: Vec<f64>,
    kappa: Vec<f64>,
    init: Vec<(f64, f64)>,
}

impl Passive {
    fn dim(&self) -> usize {
        self.kappa.len()
    }

    fn model(&self) -> LinearModel {
        let n = self.dim();
        let m = DMatrix::from_fn(n, n, |r, c| {
            let h = if r <= c { self.h[r * n + c] } else { self.h[c * n + r] };
            let decay = if r == c { 0.5 * self.kappa[r] } else { 0.0 };
            C64::new(-decay, -h)
        });
        let couplings = self.kappa.iter().map(|k| (0.5 * k).sqrt()).collect();
        let labels = (1..=n).map(|j| format!("cavity{j}")).collect();
        LinearModel::new(m, couplings, FRAME, labels).unwrap()
    }

    fn initial(&self) -> InitialState {
        InitialState::new(self.init.iter().map(|&(re, im)| C64::new(re, im)).collect()).unwrap()
    }

    fn min_kappa(&self) -> f64 {
        self.kappa.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn passive() -> impl Strategy<Value = Passive> {
    (2usize..=8).prop_flat_map(|n| {
        (
            prop::collection::vec(-2.0..2.0f64, n * n),
            prop::collection::vec(0.2..2.0f64, n),
            prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), n),
        )
            .prop_map(|(h, kappa, init)| Passive { h, kappa, init })
    })
}

fn direct_pair() -> impl Strategy<Value = (CavityParams, CavityParams, f64)> {
    (
        9.0..11.0f64,
        9.0..11.0f64,
        0.05..1.5f64,
        0.05..1.5f64,
        0.0..0.5f64,
        0.0..0.5f64,
        0.0..2.0f64,
    )
        .prop_map(|(w1, w2, k1, k2, e1, e2, g)| {
            (
                CavityParams::uncabled(w1, k1, e1).unwrap(),
                CavityParams::uncabled(w2, k2, e2).unwrap(),
                g,
            )
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn integrator_agrees_with_matrix_exponential(sys in passive()) {
        let model = sys.model();
        let grid = SampleGrid::uniform(10.0 / sys.min_kappa(), 200).unwrap();
        let exact = evolve_free(&model, &sys.initial(), &grid).unwrap();
        let rk = evolve_free_with(
            &model,
            &sys.initial(),
            &grid,
            Propagator::RungeKutta(Tolerances { atol: 1e-12, rtol: 1e-10 }),
        )
        .unwrap();
        let dev = exact.max_relative_deviation(&rk);
        prop_assert!(dev < 1e-8, "relative deviation {:e}", dev);
    }

    #[test]
    fn steady_state_solves_the_linear_system(
        sys in passive(),
        port_pick in 0usize..8,
        re in -2.0..2.0f64,
        im in -2.0..2.0f64,
    ) {
        let model = sys.model();
        let port = port_pick % sys.dim();
        let a_in = C64::new(re, im);
        let drive = DriveSpec::new(port, a_in, FRAME).unwrap();
        let a = DVector::from_column_slice(steady_state(&model, &drive).unwrap().amplitudes());
        let mut s = DVector::from_element(sys.dim(), C64::new(0.0, 0.0));
        s[port] = -a_in * model.input_couplings()[port];
        let residual = (model.matrix() * &a + &s).norm();
        let scale = model.matrix().norm() * a.norm() + s.norm();
        prop_assert!(residual <= 1e-12 * scale, "residual {:e} of scale {:e}", residual, scale);
    }

    #[test]
    fn steady_state_phase_equals_zeta_at_zero_mode_two_detuning(
        theta in 0.05 * PI..0.95 * PI,
        gamma0l0 in 0.0..3.0f64,
        gamma1 in 0.01..1.0f64,
        gamma2 in 0.01..1.0f64,
        w1 in 9.5..10.5f64,
        w2 in 9.5..10.5f64,
        ke1 in 0.05..0.5f64,
    ) {
        let c1 = CavityParams::new(w1, 0.5, ke1, gamma1).unwrap();
        let c2 = CavityParams::new(w2, 0.4, 0.2, gamma2).unwrap();
        let coupling = CouplingSpec::cable(theta, gamma0l0).unwrap();
        let eff = effective_coupling(&c1, &c2, &coupling).unwrap();
        let drive_frequency = w2 + eff.delta_omega[1].re;
        prop_assert!(eff.detunings(&c1, &c2, drive_frequency)[1].abs() < 1e-12);
        let model = build_cable_model(&c1, &c2, &coupling, drive_frequency).unwrap();
        let drive = DriveSpec::new(0, C64::new(1.0, 0.0), drive_frequency).unwrap();
        let a = steady_state(&model, &drive).unwrap();
        let ratio = a.amplitudes()[1] / a.amplitudes()[0];
        let miss = phase::distance(ratio.arg(), eff.zeta);
        prop_assert!(miss < 1e-9, "arg(A2/A1) misses zeta by {:e}", miss);
    }

    #[test]
    fn free_decay_energy_never_increases(
        (c1, c2, g) in direct_pair(),
        re1 in -1.0..1.0f64, im1 in -1.0..1.0f64,
        re2 in -1.0..1.0f64, im2 in -1.0..1.0f64,
    ) {
        let model = build_direct_model(&c1, &c2, &CouplingSpec::direct(g).unwrap(), FRAME).unwrap();
        let init = InitialState::new(vec![C64::new(re1, im1), C64::new(re2, im2)]).unwrap();
        let grid = SampleGrid::uniform(8.0 / c1.kappa().min(c2.kappa()), 500).unwrap();
        let energy = evolve_free(&model, &init, &grid).unwrap().total_energy();
        for w in energy.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-13), "energy rose from {} to {}", w[0], w[1]);
        }
    }

    #[test]
    fn frame_shift_only_rotates_amplitudes(
        (c1, c2, g) in direct_pair(),
        delta in -5.0..5.0f64,
        dphi in 0.0..2.0 * PI,
    ) {
        let model = build_direct_model(&c1, &c2, &CouplingSpec::direct(g).unwrap(), FRAME).unwrap();
        let shifted = model.with_frame(FRAME + delta);
        let init = InitialState::coherent_pair(1.0, dphi).unwrap();
        let grid = SampleGrid::uniform(6.0, 300).unwrap();
        let a = evolve_free(&model, &init, &grid).unwrap();
        let b = evolve_free(&shifted, &init, &grid).unwrap();
        for j in 0..2 {
            for (k, &t) in grid.times().iter().enumerate() {
                let back = b.amplitudes[j][k] * C64::from_polar(1.0, -delta * t);
                prop_assert!((back - a.amplitudes[j][k]).norm() < 1e-10);
                prop_assert!((b.photon_numbers[j][k] - a.photon_numbers[j][k]).abs() < 1e-10);
            }
        }
    }
}
