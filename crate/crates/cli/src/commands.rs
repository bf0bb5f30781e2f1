use serde_json::{json, Value};
use varsbp::action::{ActionProblem, Family, Params, ProblemSetup, SolverState};
use varsbp::affine::{build_affine, InitialData};
use varsbp::convergence::{long_time_study, run_ladder};
use varsbp::linalg::eigenvalues;
use varsbp::problems::{default_data, default_params, DEFAULT_BVP_END};
use varsbp::sbp::{build_sbp, Grid};
use varsbp::solver::{even_odd_separation, solve_naive, SolveResult, SolverConfig};
use varsbp::Error;

use crate::output::{columns_csv, emit, matrix_csv, spectrum_csv, vector_csv, write_dir};
use crate::{ConvergeArgs, Failure, LongtimeArgs, NaiveArgs, OperatorsArgs, SolveArgs};

const MAX_SPECTRUM_NT: usize = 128;

fn classify(e: Error) -> Failure {
    match e {
        Error::Ladder { nt, source } => match classify(*source) {
            Failure::Usage(m) => Failure::Usage(format!("nt={nt}: {m}")),
            Failure::Solve(m) => Failure::Solve(format!("nt={nt}: {m}")),
        },
        Error::SingularKkt { .. }
        | Error::NoConvergence { .. }
        | Error::SingularMatrix { .. }
        | Error::EigenNoConvergence { .. }
        | Error::NonFinite { .. } => Failure::Solve(e.to_string()),
        other => Failure::Usage(other.to_string()),
    }
}

fn parse_family(name: &str) -> Result<Family, Failure> {
    name.parse().map_err(|e: Error| Failure::Usage(e.to_string()))
}

/// Registry defaults of `family` with the `--param` overrides applied.
fn merged_params(family: Family, overrides: &[(String, f64)]) -> Result<(Params, Option<f64>), Failure> {
    let mut params = default_params(family);
    let mut xf = None;
    for (name, value) in overrides {
        if family == Family::BvpGravity && name == "xf" {
            xf = Some(*value);
        } else if family.required_params().contains(&name.as_str()) {
            params.set(name, *value);
        } else {
            let mut known = family.required_params().join(", ");
            if family == Family::BvpGravity {
                known.push_str(", xf");
            }
            return Err(Failure::Usage(format!(
                "unknown parameter `{name}` for {family}; expected one of {known}"
            )));
        }
    }
    Ok((params, xf))
}

fn trajectory_csv(grid: &Grid, state: &SolverState) -> String {
    let t = grid.nodes();
    columns_csv(&["t", "x1", "x2"], &[&t, state.x1(), state.x2()])
}

fn solve_json(family: Family, setup: &ProblemSetup, r: &SolveResult) -> Value {
    json!({
        "family": family.name(),
        "order": setup.order.name(),
        "nt": setup.grid.nt(),
        "iterations": r.iterations,
        "final_grad_norm": r.final_grad_norm,
        "tolerance": r.tolerance,
        "used_fallback": r.used_fallback,
        "lambda": r.state.lambda(),
    })
}

pub fn operators(a: OperatorsArgs) -> Result<(), Failure> {
    if a.nt > MAX_SPECTRUM_NT {
        return Err(Failure::Usage(format!(
            "--nt {} exceeds the spectrum limit {MAX_SPECTRUM_NT}",
            a.nt
        )));
    }
    let grid = Grid::unit(a.nt).map_err(classify)?;
    let op = build_sbp(grid, a.order).map_err(classify)?;
    let data = InitialData::second_order(a.x0, a.v0).map_err(classify)?;
    let aop = build_affine(&op, data);
    let dbar = aop.dbar();
    let spec_d = eigenvalues(op.d()).map_err(classify)?;
    let spec_dbar = eigenvalues(&dbar).map_err(classify)?;
    let null = op
        .left_null_vector()
        .ok_or_else(|| Failure::Solve("D has no left null vector".into()))?;
    let files = vec![
        ("H.csv".to_string(), matrix_csv(op.h())),
        ("D.csv".to_string(), matrix_csv(op.d())),
        ("Dbar.csv".to_string(), matrix_csv(&dbar)),
        ("spectrum_D.csv".to_string(), spectrum_csv(&spec_d.sorted())),
        ("spectrum_Dbar.csv".to_string(), spectrum_csv(&spec_dbar.sorted())),
        ("left_nullvec_D.csv".to_string(), vector_csv(&null)),
    ];
    write_dir(&a.out, &files)
}

fn solve_setup(a: &SolveArgs, family: Family) -> Result<ProblemSetup, Failure> {
    let (params, xf) = merged_params(family, &a.params)?;
    let data = match (family.is_ivp() && family.is_second_order(), a.v0) {
        (true, Some(v0)) => InitialData::second_order(a.x0, v0),
        (true, None) => return Err(Failure::Usage(format!("--v0 is required for {family}"))),
        (false, None) => InitialData::position(a.x0),
        (false, Some(_)) => return Err(Failure::Usage(format!("--v0 is not used by {family}"))),
    }
    .map_err(classify)?;
    Ok(ProblemSetup {
        family,
        params,
        data,
        bvp_end: (family == Family::BvpGravity).then(|| xf.unwrap_or(DEFAULT_BVP_END)),
        grid: Grid::new(a.t1, a.t2, a.nt).map_err(classify)?,
        order: a.order,
    })
}

pub fn solve(a: SolveArgs) -> Result<(), Failure> {
    let family = parse_family(&a.problem)?;
    let setup = solve_setup(&a, family)?;
    let problem = ActionProblem::new(setup.clone()).map_err(classify)?;
    let r = varsbp::solver::solve(&problem, &SolverConfig::default(), None).map_err(classify)?;
    let mut out = trajectory_csv(&setup.grid, &r.state);
    out.push_str(&format!("# {}\n", solve_json(family, &setup, &r)));
    emit(a.out.as_deref(), &out)
}

pub fn naive(a: NaiveArgs) -> Result<(), Failure> {
    let family = Family::IvpGravity;
    let (params, _) = merged_params(family, &a.params)?;
    let setup = ProblemSetup {
        family,
        params,
        data: InitialData::second_order(a.x0, a.v0).map_err(classify)?,
        bvp_end: None,
        grid: Grid::unit(a.nt).map_err(classify)?,
        order: a.order,
    };
    let problem = ActionProblem::new(setup.clone())
        .and_then(|p| p.naive())
        .map_err(classify)?;
    let r = solve_naive(&problem, &SolverConfig::default()).map_err(classify)?;
    let mut summary = solve_json(family, &setup, &r);
    summary["even_odd_separation"] = json!(even_odd_separation(r.state.x1()));
    let mut out = trajectory_csv(&setup.grid, &r.state);
    out.push_str(&format!("# {summary}\n"));
    emit(a.out.as_deref(), &out)
}

fn slope_value(s: Option<f64>) -> Value {
    match s {
        Some(v) => json!(v),
        None => json!("floor"),
    }
}

pub fn converge(a: ConvergeArgs) -> Result<(), Failure> {
    let family = parse_family(&a.problem)?;
    let (params, _) = merged_params(family, &a.params)?;
    if family == Family::BvpGravity && a.params.iter().any(|(k, _)| k == "xf") {
        return Err(Failure::Usage("xf is fixed for convergence ladders".into()));
    }
    let report = run_ladder(family, &params, default_data(family), a.order, &a.nts).map_err(classify)?;
    let s = report.summary();
    let summary = json!({
        "family": family.name(),
        "order": a.order.name(),
        "value_slope": slope_value(s.value_slope),
        "deriv_slope": slope_value(s.deriv_slope),
        "value_residual": s.residuals.value,
        "deriv_residual": s.residuals.deriv,
    });
    emit(a.out.as_deref(), &report.to_csv())?;
    println!("{summary}");
    Ok(())
}

pub fn longtime(a: LongtimeArgs) -> Result<(), Failure> {
    let family = Family::IvpDampedHo;
    let (params, _) = merged_params(family, &a.params)?;
    let runs = long_time_study(
        &params,
        default_data(family),
        a.order,
        a.t2,
        &a.nts,
        &SolverConfig::default(),
    )
    .map_err(classify)?;
    let files: Vec<(String, String)> = runs
        .iter()
        .map(|r| {
            let t = &r.trace;
            let csv = columns_csv(
                &["t", "x1", "energy", "noether_sum", "noether_diff"],
                &[&t.times, &r.x1, &t.energy, &t.noether_sum, &t.noether_diff],
            );
            (format!("longtime_nt{}.csv", r.nt), csv)
        })
        .collect();
    write_dir(&a.out, &files)?;
    for r in &runs {
        let line = json!({
            "nt": r.nt,
            "dt": r.dt,
            "max_energy_deviation": r.max_energy_deviation,
            "max_abs_x1": r.max_abs_x1,
            "max_position_error": r.max_position_error,
            "phase_shift": r.phase_shift,
        });
        println!("{line}");
    }
    Ok(())
}
