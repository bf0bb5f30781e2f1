//! Grid-refinement studies.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::action::{ActionProblem, Family, Params, ProblemSetup};
use crate::affine::InitialData;
use crate::error::{Error, Result};
use crate::linalg::lstsq_line;
use crate::problems::{default_params, default_data, energy_trace, reference_for, EnergyTrace, DEFAULT_BVP_END};
use crate::sbp::{Grid, Order};
use crate::solver::{path_gap, solve, SolverConfig};

/// Errors below this are treated as rounding and left out of fits.
pub const ERROR_FLOOR: f64 = 1e-11;

pub const DEFAULT_NTS: [usize; 6] = [16, 32, 64, 128, 256, 512];

/// Least-squares power law `err ≈ C·dtᵖ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OrderFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
    pub points: usize,
}

pub fn fit_order(dts: &[f64], errs: &[f64]) -> Result<OrderFit> {
    if dts.len() != errs.len() {
        return Err(Error::LengthMismatch {
            expected: dts.len(),
            actual: errs.len(),
        });
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = dts
        .iter()
        .zip(errs)
        .filter(|(d, e)| **d > 0.0 && e.is_finite() && **e >= ERROR_FLOOR)
        .map(|(d, e)| (d.ln(), e.ln()))
        .unzip();
    if xs.len() < 3 {
        return Err(Error::TooFewPoints {
            needed: 3,
            have: xs.len(),
        });
    }
    let fit = lstsq_line(&xs, &ys)?;
    Ok(OrderFit {
        slope: fit.slope,
        intercept: fit.intercept,
        residual: fit.residual,
        points: xs.len(),
    })
}

#[derive(Clone, Debug)]
pub struct ConvergenceReport {
    pub family: Family,
    pub order: Order,
    pub nts: Vec<usize>,
    pub dts: Vec<f64>,
    /// `|x₁(t₂) − x(t₂)|`.
    pub value_errors: Vec<f64>,
    /// `|(Dx₁)(t₂) − ẋ(t₂)|`.
    pub deriv_errors: Vec<f64>,
    /// `max_k |x₁(t_k) − x(t_k)|`, supplementary.
    pub path_errors: Vec<f64>,
    /// Newton iterations per grid.
    pub iterations: Vec<usize>,
    /// `None` when fewer than three errors lie above the rounding floor.
    pub value_fit: Option<OrderFit>,
    pub deriv_fit: Option<OrderFit>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FitResiduals {
    pub value: Option<f64>,
    pub deriv: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConvergenceSummary {
    pub family: Family,
    pub order: Order,
    pub value_slope: Option<f64>,
    pub deriv_slope: Option<f64>,
    pub residuals: FitResiduals,
}

fn optional_fit(dts: &[f64], errs: &[f64]) -> Result<Option<OrderFit>> {
    match fit_order(dts, errs) {
        Ok(f) => Ok(Some(f)),
        Err(Error::TooFewPoints { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

impl ConvergenceReport {
    /// Builds a report from externally computed errors.
    pub fn from_errors(
        family: Family,
        order: Order,
        nts: Vec<usize>,
        dts: Vec<f64>,
        value_errors: Vec<f64>,
        deriv_errors: Vec<f64>,
    ) -> Result<ConvergenceReport> {
        for len in [dts.len(), value_errors.len(), deriv_errors.len()] {
            if len != nts.len() {
                return Err(Error::LengthMismatch {
                    expected: nts.len(),
                    actual: len,
                });
            }
        }
        let value_fit = optional_fit(&dts, &value_errors)?;
        let deriv_fit = optional_fit(&dts, &deriv_errors)?;
        Ok(ConvergenceReport {
            family,
            order,
            path_errors: vec![f64::NAN; nts.len()],
            iterations: vec![0; nts.len()],
            nts,
            dts,
            value_errors,
            deriv_errors,
            value_fit,
            deriv_fit,
        })
    }

    pub fn value_slope(&self) -> Option<f64> {
        self.value_fit.map(|f| f.slope)
    }

    pub fn deriv_slope(&self) -> Option<f64> {
        self.deriv_fit.map(|f| f.slope)
    }

    pub fn summary(&self) -> ConvergenceSummary {
        ConvergenceSummary {
            family: self.family,
            order: self.order,
            value_slope: self.value_slope(),
            deriv_slope: self.deriv_slope(),
            residuals: FitResiduals {
                value: self.value_fit.map(|f| f.residual),
                deriv: self.deriv_fit.map(|f| f.residual),
            },
        }
    }

    /// `family,order,nt,dt,value_error,deriv_error` with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("family,order,nt,dt,value_error,deriv_error\n");
        for i in 0..self.nts.len() {
            let _ = writeln!(
                out,
                "{},{},{},{:.16e},{:.16e},{:.16e}",
                self.family,
                self.order,
                self.nts[i],
                self.dts[i],
                self.value_errors[i],
                self.deriv_errors[i]
            );
        }
        out
    }
}

/// Whether `errs` decreases along the list, tolerating `allowance` increases
/// between points that are both within a factor 100 of the rounding floor.
pub fn is_monotone_decreasing(errs: &[f64], allowance: usize) -> bool {
    let mut used = 0;
    for w in errs.windows(2) {
        if w[1] < w[0] {
            continue;
        }
        if w[0].max(w[1]) < 100.0 * ERROR_FLOOR && used < allowance {
            used += 1;
            continue;
        }
        return false;
    }
    true
}

fn check_ladder(order: Order, nts: &[usize]) -> Result<()> {
    if nts.is_empty() {
        return Err(Error::InvalidParameter {
            name: "nts".into(),
            reason: "ladder is empty".into(),
        });
    }
    if nts.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter {
            name: "nts".into(),
            reason: "grid sizes must be strictly ascending".into(),
        });
    }
    let min = order.min_points().max(8);
    if let Some(&nt) = nts.iter().find(|&&nt| nt < min) {
        return Err(Error::GridTooSmall { nt, min });
    }
    Ok(())
}

struct Entry {
    dt: f64,
    value_error: f64,
    deriv_error: f64,
    path_error: f64,
    iterations: usize,
}

fn ladder_entry(setup: ProblemSetup, cfg: &SolverConfig) -> Result<Entry> {
    let p = ActionProblem::new(setup)?;
    let r = solve(&p, cfg, None)?;
    let reference = reference_for(&p)?;
    let nodes = p.grid().nodes();
    let exact = reference.eval_many(&nodes)?;
    let x1 = r.state.x1();
    let last = nodes.len() - 1;
    Ok(Entry {
        dt: p.grid().dt(),
        value_error: (x1[last] - exact[last].0).abs(),
        deriv_error: (p.final_derivative(x1) - exact[last].1).abs(),
        path_error: x1
            .iter()
            .zip(&exact)
            .map(|(a, e)| (a - e.0).abs())
            .fold(0.0, f64::max),
        iterations: r.iterations,
    })
}

/// Ladder on `[0, 1]` with the default solver settings.
pub fn run_ladder(
    family: Family,
    params: &Params,
    data: InitialData,
    order: Order,
    nts: &[usize],
) -> Result<ConvergenceReport> {
    run_ladder_on(family, params, data, order, nts, (0.0, 1.0), &SolverConfig::default())
}

/// Ladder with the registry defaults of `family`.
pub fn run_default_ladder(family: Family, order: Order, nts: &[usize]) -> Result<ConvergenceReport> {
    run_ladder(family, &default_params(family), default_data(family), order, nts)
}

pub fn run_ladder_on(
    family: Family,
    params: &Params,
    data: InitialData,
    order: Order,
    nts: &[usize],
    (t1, t2): (f64, f64),
    cfg: &SolverConfig,
) -> Result<ConvergenceReport> {
    check_ladder(order, nts)?;
    let entries: Vec<Result<Entry>> = nts
        .par_iter()
        .map(|&nt| {
            let setup = ProblemSetup {
                family,
                params: params.clone(),
                data,
                bvp_end: (family == Family::BvpGravity).then_some(DEFAULT_BVP_END),
                grid: Grid::new(t1, t2, nt)?,
                order,
            };
            ladder_entry(setup, cfg).map_err(|e| Error::Ladder {
                nt,
                source: Box::new(e),
            })
        })
        .collect();
    let entries: Vec<Entry> = entries.into_iter().collect::<Result<_>>()?;
    let dts: Vec<f64> = entries.iter().map(|e| e.dt).collect();
    let value_errors: Vec<f64> = entries.iter().map(|e| e.value_error).collect();
    let deriv_errors: Vec<f64> = entries.iter().map(|e| e.deriv_error).collect();
    let mut report = ConvergenceReport::from_errors(
        family,
        order,
        nts.to_vec(),
        dts,
        value_errors,
        deriv_errors,
    )?;
    report.path_errors = entries.iter().map(|e| e.path_error).collect();
    report.iterations = entries.iter().map(|e| e.iterations).collect();
    Ok(report)
}

/// One grid of the long damped-oscillator run.
#[derive(Clone, Debug)]
pub struct LongTimeRun {
    pub nt: usize,
    pub dt: f64,
    pub x1: Vec<f64>,
    pub trace: EnergyTrace,
    pub reference_x: Vec<f64>,
    pub reference_energy: Vec<f64>,
    pub max_abs_x1: f64,
    pub max_energy_deviation: f64,
    pub max_position_error: f64,
    /// Last zero crossing of `x₁` minus the nearest zero of the reference;
    /// positive means the numerical solution lags. `None` without crossings.
    pub phase_shift: Option<f64>,
    pub path_gap: f64,
}

fn last_crossing(t: &[f64], x: &[f64]) -> Option<f64> {
    (1..x.len()).rev().find_map(|k| {
        let (a, b) = (x[k - 1], x[k]);
        (a != b && a * b <= 0.0).then(|| t[k - 1] + (t[k] - t[k - 1]) * a / (a - b))
    })
}

/// Damped oscillator over `[0, t2]` at each grid size.
pub fn long_time_study(
    params: &Params,
    data: InitialData,
    order: Order,
    t2: f64,
    nts: &[usize],
    cfg: &SolverConfig,
) -> Result<Vec<LongTimeRun>> {
    check_ladder(order, nts)?;
    let runs: Vec<Result<LongTimeRun>> = nts
        .par_iter()
        .map(|&nt| {
            long_time_run(params, data, order, t2, nt, cfg).map_err(|e| Error::Ladder {
                nt,
                source: Box::new(e),
            })
        })
        .collect();
    runs.into_iter().collect()
}

fn long_time_run(
    params: &Params,
    data: InitialData,
    order: Order,
    t2: f64,
    nt: usize,
    cfg: &SolverConfig,
) -> Result<LongTimeRun> {
    let p = ActionProblem::new(ProblemSetup {
        family: Family::IvpDampedHo,
        params: params.clone(),
        data,
        bvp_end: None,
        grid: Grid::new(0.0, t2, nt)?,
        order,
    })?;
    let reference = reference_for(&p)?;
    let r = solve(&p, cfg, None)?;
    let trace = energy_trace(&p, &r.state)?;
    let exact = reference.eval_many(&trace.times)?;
    let reference_energy = reference.energy(&trace.times)?;
    let x1 = r.state.x1().to_vec();
    let reference_x: Vec<f64> = exact.iter().map(|e| e.0).collect();
    let max_energy_deviation = trace
        .energy
        .iter()
        .zip(&reference_energy)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let max_position_error = x1
        .iter()
        .zip(&reference_x)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let phase_shift = last_crossing(&trace.times, &x1).map(|tc| {
        // Newton on the closed form from the numerical crossing
        let mut t = tc;
        for _ in 0..8 {
            let Ok((x, v)) = reference.eval(t) else { break };
            if v == 0.0 {
                break;
            }
            t -= x / v;
        }
        tc - t
    });
    Ok(LongTimeRun {
        nt,
        dt: p.grid().dt(),
        max_abs_x1: x1.iter().map(|v| v.abs()).fold(0.0, f64::max),
        path_gap: path_gap(&r.state),
        x1,
        trace,
        reference_x,
        reference_energy,
        max_energy_deviation,
        max_position_error,
        phase_shift,
    })
}
