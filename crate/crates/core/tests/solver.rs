mod common;

use common::*;
use varsbp::action::{Family, SolverState};
use varsbp::error::Error;
use varsbp::problems::reference_for;
use varsbp::sbp::Order;
use varsbp::solver::{
    even_odd_separation, kinetic_spectrum, kkt_spectrum, path_gap, solve, solve_naive, SolverConfig,
};

fn cfg() -> SolverConfig {
    SolverConfig::default()
}

#[test]
fn gravity_reaches_final_position() {
    let p = problem(Family::IvpGravity, Order::Sbp42, 32);
    let r = solve(&p, &cfg(), None).unwrap();
    assert!((r.state.x1()[31] - 0.8).abs() <= 1e-10);
    let g = p.action_gradient(&r.state).unwrap();
    assert!(varsbp::linalg::norm_inf(&g) <= 1e-9);
}

#[test]
fn exponential_growth_at_fine_grid() {
    let p = problem(Family::IvpExponential, Order::Sbp42, 512);
    let r = solve(&p, &cfg(), None).unwrap();
    assert!((r.state.x1()[511] - 2.5f64.exp()).abs() <= 1e-5);
}

#[test]
fn quadratic_families_are_start_independent() {
    let mut rg = rng(10);
    for family in Family::ALL.into_iter().filter(|f| f.is_quadratic()) {
        for order in Order::ALL {
            let p = problem(family, order, 40);
            let zero = solve(&p, &cfg(), Some(&SolverState::zeros(p.layout()))).unwrap();
            let rand = solve(&p, &cfg(), Some(&random_state(&p, &mut rg))).unwrap();
            assert_eq!(zero.iterations, 1, "{family} {order}");
            assert_eq!(rand.iterations, 1, "{family} {order}");
            let d = max_abs_diff(zero.state.unknowns(), rand.state.unknowns());
            assert!(d <= 1e-9, "{family} {order}: {d:e}");
        }
    }
}

#[test]
fn physical_limit_and_constraints() {
    for family in Family::IVP {
        for order in Order::ALL {
            for nt in [16, 64, 256] {
                let p = problem(family, order, nt);
                let r = solve(&p, &cfg(), None).unwrap();
                let x1 = r.state.x1();
                let bound = 1e-8 * (1.0 + varsbp::linalg::norm_inf(x1));
                assert!(path_gap(&r.state) <= bound, "{family} {order} {nt}");
                let c = p.constraint_residuals(&r.state).unwrap();
                assert!(c.iter().all(|v| v.abs() <= 1e-10), "{family} {order} {nt}: {c:?}");
                assert!(r.final_grad_norm <= r.tolerance);
            }
        }
    }
}

#[test]
fn solves_are_bitwise_deterministic() {
    for family in [Family::IvpCubic, Family::IvpDampedHo] {
        let p = problem(family, Order::Sbp42, 64);
        let a = solve(&p, &cfg(), None).unwrap();
        let b = solve(&p, &cfg(), None).unwrap();
        assert_eq!(a.state.unknowns(), b.state.unknowns());
        assert_eq!(a.iterations, b.iterations);
    }
}

#[test]
fn solved_gravity_satisfies_discrete_equation_of_motion() {
    let p = problem(Family::IvpGravity, Order::Sbp21, 32);
    let r = solve(&p, &cfg(), None).unwrap();
    let res = p.discrete_eom_residual(&r.state).unwrap();
    for k in p.operator().interior_rows(2) {
        assert!(res[k].abs() <= 1e-8, "row {k}: {:e}", res[k]);
    }
}

#[test]
fn naive_functional_is_contaminated() {
    let p = problem(Family::IvpGravity, Order::Sbp21, 32);
    let reference = reference_for(&p).unwrap();
    let exact: Vec<f64> = reference
        .eval_many(&p.grid().nodes())
        .unwrap()
        .into_iter()
        .map(|e| e.0)
        .collect();
    match solve_naive(&p, &cfg()) {
        Err(Error::SingularKkt { .. }) => {}
        Ok(naive) => {
            assert!(even_odd_separation(naive.state.x1()) > 0.1);
            assert!(max_abs_diff(naive.state.x1(), &exact) > 0.1);
        }
        Err(e) => panic!("unexpected failure {e}"),
    }
    let reg = solve(&p, &cfg(), None).unwrap();
    assert!(max_abs_diff(reg.state.x1(), &exact) < 1e-3);
    assert!(even_odd_separation(reg.state.x1()) < 1e-3);
}

#[test]
fn naive_kinetic_block_has_null_mode() {
    let p = problem(Family::IvpGravity, Order::Sbp21, 32);
    let naive = p.naive().unwrap();
    let ns = kinetic_spectrum(&naive).unwrap();
    let rs = kinetic_spectrum(&p).unwrap();
    assert!(ns.min_modulus() < 1e-8 * ns.spectral_radius());
    assert!(rs.min_modulus() > 1e-6 * rs.spectral_radius());

    let rk = kkt_spectrum(&p, &p.initial_state()).unwrap();
    assert!(rk.min_modulus() > 1e-6 * rk.spectral_radius());
}

#[test]
fn naive_rejects_other_families() {
    let p = problem(Family::IvpCubic, Order::Sbp21, 16);
    assert!(matches!(solve_naive(&p, &cfg()), Err(Error::Unsupported(_))));
}

#[test]
fn fallback_path_converges() {
    let p = problem(Family::IvpCubic, Order::Sbp21, 32);
    let eager = SolverConfig {
        stall_window: 1,
        damping: 0.05,
        ..cfg()
    };
    let r = solve(&p, &eager, None).unwrap();
    assert!(r.used_fallback);
    let plain = solve(&p, &cfg(), None).unwrap();
    assert!(max_abs_diff(r.state.x1(), plain.state.x1()) < 1e-9);
}

#[test]
fn iteration_budget_is_enforced() {
    let p = problem(Family::IvpCubic, Order::Sbp42, 32);
    let tight = SolverConfig {
        max_newton_iters: 2,
        fallback_enabled: false,
        ..cfg()
    };
    assert!(matches!(
        solve(&p, &tight, None),
        Err(Error::NoConvergence { iterations: 2, .. })
    ));
}

#[test]
fn looser_tolerance_leaves_endpoints_unchanged() {
    let loose = SolverConfig {
        grad_tol: 1e-10,
        ..cfg()
    };
    for family in Family::IVP {
        for order in Order::ALL {
            let p = problem(family, order, 128);
            let a = solve(&p, &cfg(), None).unwrap();
            let b = solve(&p, &loose, None).unwrap();
            let d = (a.state.x1()[127] - b.state.x1()[127]).abs();
            assert!(d <= 1e-10, "{family} {order}: {d:e}");
        }
    }
}
