//! Randomized invariants over positive trigonometric densities.

use euler_align::diagnostics::{
    ck_bracket, dissipation, dissipation_lower_check, entropy, l2_deviation_sq, near_diagonal_energy,
    poincare_constant_auto,
};
use euler_align::grid::integrate;
use euler_align::kernels::l_psi;
use euler_align::oracle::TrigPoly;
use euler_align::{Field, FlockState, KernelSpec, Solver, SolverConfig, TorusGrid};
use proptest::prelude::*;

/// Positive density: mean in [0.2, 3], relative amplitude below 0.95.
fn density() -> impl Strategy<Value = TrigPoly> {
    (
        0.2f64..3.0,
        0.0f64..0.95,
        prop::collection::vec((1u32..12, -1.0f64..1.0, -1.0f64..1.0), 1..8),
    )
        .prop_map(|(mean, rel, mut modes)| {
            let total: f64 = modes.iter().map(|&(_, a, b)| a.abs() + b.abs()).sum::<f64>().max(1e-12);
            for m in &mut modes {
                m.1 *= rel * mean / total;
                m.2 *= rel * mean / total;
            }
            TrigPoly { mean, modes }
        })
}

fn kernels() -> [KernelSpec; 3] {
    [
        KernelSpec::plateau(1.0, 1.0),
        KernelSpec::geometric(1.0, 1.0, 0.5),
        KernelSpec::topological(1.0, 1.0, 0.5, 0.5),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn csiszar_kullback_chain(p in density()) {
        let rho = p.sample(TorusGrid::new(128).unwrap());
        let b = ck_bracket(&rho).unwrap();
        prop_assert!(b.lower <= b.middle + 1e-10 * b.upper.max(1e-300));
        prop_assert!(b.middle <= b.upper + 1e-10 * b.upper.max(1e-300));
    }

    #[test]
    fn near_diagonal_poincare(p in density(), r0 in 0.2f64..3.0) {
        let rho = p.sample(TorusGrid::new(128).unwrap());
        let c = poincare_constant_auto(r0).unwrap().c_rigorous;
        let lhs = near_diagonal_energy(&rho, r0);
        let rhs = c * l2_deviation_sq(&rho);
        prop_assert!(lhs - rhs >= -1e-10 * lhs.max(rhs));
    }

    #[test]
    fn dissipation_bounded_below(p in density()) {
        let rho = p.sample(TorusGrid::new(64).unwrap());
        for k in kernels() {
            let d = dissipation_lower_check(&rho, &k).unwrap();
            prop_assert!(d.dissipation >= 0.0);
            prop_assert!(d.dissipation >= d.lower_bound * (1.0 - 1e-10));
        }
    }

    #[test]
    fn entropy_is_homogeneous(p in density(), c in 0.1f64..10.0) {
        let rho = p.sample(TorusGrid::new(64).unwrap());
        let scaled = rho.map(|v| c * v);
        let (h, hc) = (entropy(&rho).unwrap(), entropy(&scaled).unwrap());
        prop_assert!((hc - c * h).abs() <= 1e-12 * (c * h).abs().max(1e-300) + 1e-15);
    }

    #[test]
    fn l_psi_conserves_and_annihilates_constants(p in density(), f in density()) {
        let g = TorusGrid::new(64).unwrap();
        let rho = p.sample(g);
        let f = f.sample(g);
        for k in kernels() {
            let lf = l_psi(&k, &rho, &f).unwrap();
            prop_assert!(integrate(&lf).abs() <= 1e-10 * lf.l1_norm().max(1e-300));
            let lc = l_psi(&k, &rho, &g.constant(2.5)).unwrap();
            prop_assert_eq!(lc.sup_abs(), 0.0);
        }
    }

    #[test]
    fn dissipation_vanishes_only_at_uniform(mean in 0.2f64..3.0) {
        let g = TorusGrid::new(32).unwrap();
        for k in kernels() {
            prop_assert_eq!(dissipation(&g.constant(mean), &k).unwrap(), 0.0);
        }
    }

    #[test]
    fn solver_conserves_mass_and_stays_positive(p in density(), v in density()) {
        let g = TorusGrid::new(64).unwrap();
        let u = Field::new(g, v.sample(g).values().iter().map(|x| x - v.mean).collect()).unwrap();
        let state = FlockState::new(p.sample(g), u, 0.0).unwrap();
        let config = SolverConfig { t_end: 0.5, record_every: 0.25, ..SolverConfig::default() };
        let traj = Solver::new(KernelSpec::plateau(1.0, 1.0), g).unwrap().run(&state, &config);
        prop_assert!(traj.error.is_none());
        let m0 = state.mass();
        prop_assert!((traj.final_state.mass() - m0).abs() <= 1e-12 * m0);
        prop_assert!(traj.final_state.rho.min() > 0.0);
    }
}
