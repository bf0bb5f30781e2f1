//! One test per acceptance criterion; each prints a PASS/FAIL line.

mod common;

use std::time::Instant;

use common::*;
use rand::Rng;
use varsbp::action::Family;
use varsbp::affine::{build_affine, InitialData};
use varsbp::convergence::{long_time_study, run_default_ladder, ConvergenceReport, DEFAULT_NTS};
use varsbp::error::Error;
use varsbp::linalg::{eigenvalues, norm_inf};
use varsbp::problems::{default_data, default_params, reference, reference_for, ReferenceKind, ORACLE_DT};
use varsbp::sbp::{build_sbp, Grid, Order};
use varsbp::solver::{even_odd_separation, path_gap, solve, solve_naive, SolverConfig};

fn within(value: Option<f64>, target: f64, tol: f64) -> bool {
    value.is_some_and(|v| (v - target).abs() <= tol)
}

fn slopes(r: &ConvergenceReport) -> String {
    format!(
        "{} {}: value slope {:?}, derivative slope {:?}",
        r.family,
        r.order,
        r.value_slope(),
        r.deriv_slope()
    )
}

fn exact_path(p: &varsbp::action::ActionProblem) -> Vec<f64> {
    reference_for(p)
        .unwrap()
        .eval_many(&p.grid().nodes())
        .unwrap()
        .into_iter()
        .map(|e| e.0)
        .collect()
}

#[test]
fn criterion_01_sbp_algebra() {
    let start = Instant::now();
    let mut r = rng(101);
    let mut worst_defect = 0.0f64;
    let mut worst_ibp = 0.0f64;
    for order in Order::ALL {
        for nt in [8, 16, 32, 64, 128, 256, 512] {
            let op = build_sbp(Grid::unit(nt).unwrap(), order).unwrap();
            worst_defect = worst_defect.max(op.sbp_defect());
            for _ in 0..100 {
                let u: Vec<f64> = (0..nt).map(|_| r.gen_range(-1.0..1.0)).collect();
                let v: Vec<f64> = (0..nt).map(|_| r.gen_range(-1.0..1.0)).collect();
                let du = op.apply(&u).unwrap();
                let dv = op.apply(&v).unwrap();
                let scale: f64 = (0..nt)
                    .map(|k| op.h_diag()[k] * ((u[k] * dv[k]).abs() + (du[k] * v[k]).abs()))
                    .sum::<f64>()
                    .max(1.0);
                worst_ibp = worst_ibp.max(op.ibp_defect(&u, &v).unwrap().abs() / scale);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst_defect <= 1e-13 && worst_ibp <= 1e-10 && secs < 5.0;
    verdict(
        1,
        pass,
        &format!("SBP defect {worst_defect:.1e}, IBP defect {worst_ibp:.1e}, {secs:.2} s"),
    );
    assert!(pass);
}

#[test]
fn criterion_02_null_space() {
    let start = Instant::now();
    let op = build_sbp(Grid::unit(32).unwrap(), Order::Sbp21).unwrap();
    let spec = eigenvalues(op.d()).unwrap();
    let zeros = spec.count_below(1e-10);
    let geometric = op.null_space_dimension();
    let v = op.left_null_vector().unwrap();
    let alternates = (1..30).all(|k| v[k] * v[k + 1] < 0.0);
    let dbar = build_affine(&op, InitialData::second_order(1.0, 0.3).unwrap()).dbar();
    let bspec = eigenvalues(&dbar).unwrap();
    let small = bspec.count_below(1e-6);
    let unit = bspec.count_near(1.0, 0.0, 1e-8);
    let secs = start.elapsed().as_secs_f64();
    let pass = zeros == 2 && geometric == 1 && alternates && small == 0 && unit >= 1 && secs < 2.0;
    verdict(
        2,
        pass,
        &format!(
            "D: {zeros} zero eigenvalues, kernel dim {geometric}, alternating {alternates}; \
             Dbar: {small} below 1e-6, min |v| {:.2e}, {unit} at 1; {secs:.2} s",
            bspec.min_modulus()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_03_failure_mode() {
    let start = Instant::now();
    let p = problem(Family::IvpGravity, Order::Sbp21, 32);
    let exact = exact_path(&p);
    let (naive_ok, naive_detail) = match solve_naive(&p, &SolverConfig::default()) {
        Err(Error::SingularKkt { .. }) => (true, "naive KKT singular".to_string()),
        Ok(r) => {
            let sep = even_odd_separation(r.state.x1());
            (sep > 0.1, format!("naive even/odd separation {sep:.3}"))
        }
        Err(e) => (false, format!("naive solve failed: {e}")),
    };
    let reg = solve(&p, &SolverConfig::default(), None).unwrap();
    let err = max_abs_diff(reg.state.x1(), &exact);
    let secs = start.elapsed().as_secs_f64();
    let pass = naive_ok && err < 1e-3 && secs < 2.0;
    verdict(
        3,
        pass,
        &format!("{naive_detail}; regularized max error {err:.2e}; {secs:.2} s"),
    );
    assert!(pass);
}

#[test]
fn criterion_04_gravity_exactness() {
    let start = Instant::now();
    let exact = run_default_ladder(Family::IvpGravity, Order::Sbp42, &DEFAULT_NTS).unwrap();
    let worst_x = exact.value_errors.iter().fold(0.0f64, |m, &e| m.max(e));
    let worst_v = exact.deriv_errors.iter().fold(0.0f64, |m, &e| m.max(e));
    let low = run_default_ladder(Family::IvpGravity, Order::Sbp21, &DEFAULT_NTS).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let pass = worst_x <= 1e-10 && worst_v <= 1e-10 && within(low.value_slope(), 2.03, 0.15) && secs < 60.0;
    verdict(
        4,
        pass,
        &format!(
            "sbp42 max |x(1) - 0.8| {worst_x:.1e}, max |v(1) + 0.7| {worst_v:.1e}; {}; {secs:.2} s",
            slopes(&low)
        ),
    );
    assert!(pass);
}

fn slope_criterion(family: Family, targets: [(f64, f64, f64, f64); 2]) -> (bool, String) {
    let mut pass = true;
    let mut detail = Vec::new();
    for (order, (v, vt, d, dt)) in Order::ALL.into_iter().zip(targets) {
        let r = run_default_ladder(family, order, &DEFAULT_NTS).unwrap();
        pass &= within(r.value_slope(), v, vt) && within(r.deriv_slope(), d, dt);
        detail.push(slopes(&r));
    }
    (pass, detail.join("; "))
}

#[test]
fn criterion_05_cubic() {
    let start = Instant::now();
    let family = Family::IvpCubic;
    let reference = reference(family, &default_params(family), default_data(family)).unwrap();
    let ts: Vec<f64> = (1..=10).map(|k| k as f64 / 10.0).collect();
    let delta = reference.richardson_delta(&ts).unwrap();
    let oracle_ok = reference.kind() == ReferenceKind::Oracle && ORACLE_DT <= 1e-5 && delta < 1e-10;
    let (slopes_ok, detail) =
        slope_criterion(family, [(2.12, 0.25, 1.06, 0.25), (3.35, 0.35, 1.87, 0.3)]);
    let secs = start.elapsed().as_secs_f64();
    let pass = oracle_ok && slopes_ok && secs < 300.0;
    verdict(5, pass, &format!("{detail}; oracle Richardson delta {delta:.1e}; {secs:.2} s"));
    assert!(pass);
}

#[test]
fn criterion_06_exponential() {
    let (pass, detail) = slope_criterion(
        Family::IvpExponential,
        [(2.03, 0.2, 1.06, 0.25), (2.95, 0.3, 1.99, 0.25)],
    );
    verdict(6, pass, &detail);
    assert!(pass);
}

#[test]
fn criterion_07_damped_short_run() {
    let (pass, detail) = slope_criterion(
        Family::IvpDampedHo,
        [(2.03, 0.2, 1.01, 0.25), (3.04, 0.3, 2.06, 0.3)],
    );
    verdict(7, pass, &detail);
    assert!(pass);
}

#[test]
fn criterion_08_damped_long_run() {
    let start = Instant::now();
    let family = Family::IvpDampedHo;
    let runs = long_time_study(
        &default_params(family),
        default_data(family),
        Order::Sbp42,
        204.8,
        &[513, 1025, 2049],
        &SolverConfig::default(),
    )
    .unwrap();
    let bounded = runs.iter().all(|r| r.max_abs_x1 <= 1.01);
    let decreasing = runs
        .windows(2)
        .all(|w| w[1].max_energy_deviation < w[0].max_energy_deviation);
    let secs = start.elapsed().as_secs_f64();
    let pass = bounded && decreasing && secs < 600.0;
    let detail: Vec<String> = runs
        .iter()
        .map(|r| {
            format!(
                "dt {:.1}: max|x1| {:.4}, energy deviation {:.3e}",
                r.dt, r.max_abs_x1, r.max_energy_deviation
            )
        })
        .collect();
    verdict(8, pass, &format!("{}; {secs:.1} s", detail.join("; ")));
    assert!(pass);
}

#[test]
fn criterion_09_physical_limit() {
    let mut worst_gap = 0.0f64;
    let mut worst_constraint = 0.0f64;
    let mut pass = true;
    for family in Family::IVP {
        for order in Order::ALL {
            for nt in DEFAULT_NTS {
                let p = problem(family, order, nt);
                let r = solve(&p, &SolverConfig::default(), None).unwrap();
                let gap = path_gap(&r.state);
                let bound = 1e-8 * (1.0 + norm_inf(r.state.x1()));
                let c = norm_inf(&p.constraint_residuals(&r.state).unwrap());
                pass &= gap <= bound && c <= 1e-10;
                worst_gap = worst_gap.max(gap);
                worst_constraint = worst_constraint.max(c);
            }
        }
    }
    verdict(
        9,
        pass,
        &format!("max |x1 - x2| {worst_gap:.1e}, max constraint residual {worst_constraint:.1e}"),
    );
    assert!(pass);
}

#[test]
fn criterion_10_differentiation() {
    let mut r = rng(110);
    let mut worst_g = 0.0f64;
    let mut worst_h = 0.0f64;
    for family in Family::ALL {
        let p = problem(family, Order::Sbp42, 10);
        for _ in 0..10 {
            let s = random_state(&p, &mut r);
            worst_g = worst_g.max(gradient_fd_error(&p, &s));
            worst_h = worst_h.max(hessian_fd_error(&p, &s));
        }
    }
    let pass = worst_g <= 1e-6 && worst_h <= 1e-5;
    verdict(
        10,
        pass,
        &format!("gradient rel. error {worst_g:.1e}, Hessian rel. error {worst_h:.1e}"),
    );
    assert!(pass);
}

#[test]
fn criterion_11_bvp() {
    let p = problem(Family::BvpGravity, Order::Sbp21, 32);
    let r = solve(&p, &SolverConfig::default(), None).unwrap();
    let err = max_abs_diff(r.state.x1(), &exact_path(&p));
    let ivp = run_default_ladder(Family::IvpGravity, Order::Sbp21, &[32]).unwrap();
    let bound = ivp.value_errors[0];
    let pass = err <= bound;
    verdict(
        11,
        pass,
        &format!("max error {err:.2e} against the IVP value error {bound:.2e}"),
    );
    assert!(pass);
}

#[test]
fn criterion_12_convexity() {
    let mut worst = f64::INFINITY;
    for nt in [16, 32, 64] {
        let p = problem(Family::IvpGravity, Order::Sbp21, nt);
        let gram = p.affine().unwrap().path_gram();
        let spec = eigenvalues(&gram).unwrap();
        worst = spec.eigenvalues.iter().map(|e| e.re).fold(worst, f64::min);
    }
    let pass = worst >= -1e-10;
    verdict(12, pass, &format!("smallest eigenvalue {worst:.2e}"));
    assert!(pass);
}
