use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use proptest::prelude::*;

use coupled_cavity::dynamics::eigenmodes;
use coupled_cavity::model::{
    build_cable_model, build_chain_model, build_direct_model, effective_coupling, eliminate_cable,
    CableSpec, CavityParams, ChainSpec, CouplingSpec, LinearModel,
};
use coupled_cavity::phase;

fn cavity() -> impl Strategy<Value = (f64, f64, f64)> {
    (5.0..15.0f64, 0.0..2.0f64, 0.0..2.0f64)
}

fn swapped(m: &LinearModel) -> nalgebra::DMatrix<C64> {
    let a = m.matrix();
    nalgebra::DMatrix::from_fn(2, 2, |r, c| a[(1 - r, 1 - c)])
}

fn hermitian_part_max_eig(m: &LinearModel) -> f64 {
    let a = m.matrix();
    let h = (a + a.adjoint()).map(|z| z * 0.5);
    h.symmetric_eigenvalues().iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn eliminated_fields_satisfy_junction_relations(
        theta in 0.05 * PI..0.95 * PI,
        gamma0l0 in 0.0..1.0f64,
        gamma1 in 1e-3..1.0f64,
        gamma2 in 1e-3..1.0f64,
        re1 in -2.0..2.0f64, im1 in -2.0..2.0f64,
        re2 in -2.0..2.0f64, im2 in -2.0..2.0f64,
    ) {
        let cable = CableSpec::new(theta, gamma0l0).unwrap();
        let (a1, a2) = (C64::new(re1, im1), C64::new(re2, im2));
        let f = eliminate_cable(a1, a2, gamma1, gamma2, &cable).unwrap();
        let p = cable.one_way();
        let r1 = f.b1 - (p * f.b2 + a1 * gamma1.sqrt());
        let r2 = f.b2 - (p * f.b1 + a2 * gamma2.sqrt());
        let scale = 1.0 + f.b1.norm().max(f.b2.norm());
        prop_assert!(r1.norm() < 1e-10 * scale, "b1 residual {}", r1.norm());
        prop_assert!(r2.norm() < 1e-10 * scale, "b2 residual {}", r2.norm());
    }

    #[test]
    fn zeta_matches_effective_coupling_phase(
        theta in 0.05 * PI..1.95 * PI,
        gamma0l0 in 0.0..3.0f64,
        g1 in 0.01..2.0f64,
        g2 in 0.01..2.0f64,
    ) {
        let c1 = CavityParams::new(10.0, 0.5, 0.2, g1).unwrap();
        let c2 = CavityParams::new(11.0, 0.3, 0.1, g2).unwrap();
        let eff = effective_coupling(&c1, &c2, &CouplingSpec::cable(theta, gamma0l0).unwrap()).unwrap();
        prop_assert_eq!(eff.zeta, phase::wrap(1.5 * PI + eff.g_eff.arg()));
        prop_assert!((0.0..2.0 * PI).contains(&eff.zeta));
    }

    #[test]
    fn direct_model_is_passive(
        (w1, ki1, ke1) in cavity(),
        (w2, ki2, ke2) in cavity(),
        g in 0.0..3.0f64,
        frame in 5.0..15.0f64,
    ) {
        let c1 = CavityParams::uncabled(w1, ki1, ke1).unwrap();
        let c2 = CavityParams::uncabled(w2, ki2, ke2).unwrap();
        let m = build_direct_model(&c1, &c2, &CouplingSpec::direct(g).unwrap(), frame).unwrap();
        prop_assert!(hermitian_part_max_eig(&m) <= 1e-12);
        for mode in eigenmodes(&m).modes {
            prop_assert!(mode.eigenvalue.re <= 1e-12);
        }
    }

    #[test]
    fn cable_model_is_passive(
        (w1, ki1, ke1) in cavity(),
        (w2, ki2, ke2) in cavity(),
        gamma1 in 0.01..1.0f64,
        gamma2 in 0.01..1.0f64,
        theta in 0.05 * PI..0.95 * PI,
        gamma0l0 in 0.0..2.0f64,
    ) {
        let c1 = CavityParams::new(w1, ki1, ke1, gamma1).unwrap();
        let c2 = CavityParams::new(w2, ki2, ke2, gamma2).unwrap();
        let m = build_cable_model(&c1, &c2, &CouplingSpec::cable(theta, gamma0l0).unwrap(), 10.0).unwrap();
        for mode in eigenmodes(&m).modes {
            prop_assert!(mode.eigenvalue.re <= 1e-12, "growing mode {}", mode.eigenvalue);
        }
    }

    #[test]
    fn chain_model_is_passive(
        n in 2usize..10,
        g in 0.0..2.0f64,
        ki in 0.0..2.0f64,
        ke_first in 0.0..1.0f64,
        ke_last in 0.0..1.0f64,
    ) {
        let spec = ChainSpec::uniform(n, g, ki, ke_first, ke_last, 10.0).unwrap();
        let m = build_chain_model(&spec, 10.0).unwrap();
        prop_assert!(hermitian_part_max_eig(&m) <= 1e-12);
    }

    #[test]
    fn swapping_cavities_permutes_direct_generator(
        (w1, ki1, ke1) in cavity(),
        (w2, ki2, ke2) in cavity(),
        g in 0.0..3.0f64,
    ) {
        let c1 = CavityParams::uncabled(w1, ki1, ke1).unwrap();
        let c2 = CavityParams::uncabled(w2, ki2, ke2).unwrap();
        let coupling = CouplingSpec::direct(g).unwrap();
        let m12 = build_direct_model(&c1, &c2, &coupling, 10.0).unwrap();
        let m21 = build_direct_model(&c2, &c1, &coupling, 10.0).unwrap();
        prop_assert_eq!(m21.matrix(), &swapped(&m12));
    }

    #[test]
    fn swapping_cavities_permutes_cable_generator(
        (w1, ki1, ke1) in cavity(),
        (w2, ki2, ke2) in cavity(),
        gamma1 in 0.01..1.0f64,
        gamma2 in 0.01..1.0f64,
        theta in 0.05 * PI..0.95 * PI,
        gamma0l0 in 0.0..2.0f64,
    ) {
        let c1 = CavityParams::new(w1, ki1, ke1, gamma1).unwrap();
        let c2 = CavityParams::new(w2, ki2, ke2, gamma2).unwrap();
        let coupling = CouplingSpec::cable(theta, gamma0l0).unwrap();
        let m12 = build_cable_model(&c1, &c2, &coupling, 10.0).unwrap();
        let m21 = build_cable_model(&c2, &c1, &coupling, 10.0).unwrap();
        let diff = (m21.matrix() - swapped(&m12)).map(|z| z.norm()).max();
        prop_assert!(diff < 1e-14, "{}", diff);
    }
}

#[test]
fn lossless_cable_round_trip_resonance_is_rejected() {
    let c = CavityParams::new(10.0, 0.5, 0.2, 0.2).unwrap();
    let coupling = CouplingSpec::cable(0.0, 0.0).unwrap();
    assert!(build_cable_model(&c, &c, &coupling, 10.0).is_err());
}
