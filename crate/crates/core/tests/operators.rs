use proptest::prelude::*;
use varsbp::affine::{build_affine, InitialData};
use varsbp::linalg::{self, eigenvalues, Lu};
use varsbp::sbp::{build_sbp, Grid, Order};

fn order_strategy() -> impl Strategy<Value = Order> {
    prop_oneof![Just(Order::Sbp21), Just(Order::Sbp42)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sbp_identity_any_size(order in order_strategy(), nt in 8usize..=512) {
        let op = build_sbp(Grid::unit(nt).unwrap(), order).unwrap();
        prop_assert!(op.sbp_defect() <= 1e-13);
        let d1 = op.apply(&vec![1.0; nt]).unwrap();
        prop_assert!(linalg::norm_inf(&d1) <= 1e-12 / op.grid().dt());
        prop_assert!(op.h_diag().iter().all(|&h| h > 0.0));
    }

    #[test]
    fn integration_by_parts(
        order in order_strategy(),
        nt in 8usize..=128,
        seed in prop::collection::vec(-1.0f64..1.0, 256),
    ) {
        let op = build_sbp(Grid::new(-1.0, 2.5, nt).unwrap(), order).unwrap();
        let u = &seed[..nt];
        let v = &seed[128..128 + nt];
        let du = op.apply(u).unwrap();
        let dv = op.apply(v).unwrap();
        let scale: f64 = (0..nt)
            .map(|k| op.h_diag()[k] * (u[k] * dv[k]).abs() + op.h_diag()[k] * (du[k] * v[k]).abs())
            .sum::<f64>()
            .max(1.0);
        prop_assert!(op.ibp_defect(u, v).unwrap().abs() <= 1e-10 * scale);
    }

    #[test]
    fn affine_matches_penalty_form(
        order in order_strategy(),
        nt in 8usize..=96,
        x0 in -3.0f64..3.0,
        seed in prop::collection::vec(-2.0f64..2.0, 96),
    ) {
        let op = build_sbp(Grid::unit(nt).unwrap(), order).unwrap();
        let a = build_affine(&op, InitialData::second_order(x0, 0.5).unwrap());
        let x = &seed[..nt];
        let lhs = a.apply(x).unwrap();
        let mut rhs = op.apply(x).unwrap();
        // D x − σ₀ H⁻¹ E₀ (x − g)
        rhs[0] -= a.sigma0() / op.h_diag()[0] * (x[0] - x0);
        for (p, q) in lhs.iter().zip(&rhs) {
            prop_assert!((p - q).abs() <= 1e-12 * (1.0 + q.abs()));
        }
    }
}

#[test]
fn sbp21_zero_eigenvalue_multiplicities() {
    for nt in [8, 16, 32, 64, 128] {
        let op = build_sbp(Grid::unit(nt).unwrap(), Order::Sbp21).unwrap();
        let spectrum = eigenvalues(op.d()).unwrap();
        assert_eq!(spectrum.count_below(1e-10), 2, "algebraic, nt={nt}");
        assert_eq!(op.null_space_dimension(), 1, "geometric, nt={nt}");
    }
}

#[test]
fn left_null_vector_is_oscillatory() {
    for nt in [9, 16, 33, 64] {
        let op = build_sbp(Grid::unit(nt).unwrap(), Order::Sbp21).unwrap();
        let v = op.left_null_vector().unwrap();
        let residual = op.d().tr_matvec(&v).unwrap();
        assert!(linalg::norm_inf(&residual) < 1e-9);
        for k in 1..nt - 2 {
            assert!(v[k] * v[k + 1] < 0.0, "nt={nt} k={k}");
        }
    }
}

#[test]
fn dbar_nonsingular_all_sizes() {
    for order in Order::ALL {
        for nt in [8, 16, 32, 64, 128, 256, 512] {
            let op = build_sbp(Grid::unit(nt).unwrap(), order).unwrap();
            let a = build_affine(&op, InitialData::second_order(1.0, 0.3).unwrap());
            let lu = Lu::factor(&a.dbar()).unwrap();
            assert!(lu.pivot_ratio() > 1e-10, "{order} nt={nt}");
        }
    }
}

#[test]
fn regularized_gram_is_positive_semidefinite() {
    for order in Order::ALL {
        for nt in [8, 16, 32, 64, 128] {
            let op = build_sbp(Grid::unit(nt).unwrap(), order).unwrap();
            let a = build_affine(&op, InitialData::position(1.0).unwrap());
            let spectrum = eigenvalues(&a.path_gram()).unwrap();
            assert!(spectrum.eigenvalues.iter().all(|e| e.re >= -1e-10), "{order} nt={nt}");
        }
    }
}

#[test]
fn dbar_spectrum_without_zero_modes() {
    for order in Order::ALL {
        let op = build_sbp(Grid::unit(32).unwrap(), order).unwrap();
        let a = build_affine(&op, InitialData::second_order(1.0, 0.3).unwrap());
        let spectrum = eigenvalues(&a.dbar()).unwrap();
        assert_eq!(spectrum.count_below(1e-6), 0, "{order}");
        assert!(spectrum.count_near(1.0, 0.0, 1e-8) >= 1, "{order}");
    }
}
