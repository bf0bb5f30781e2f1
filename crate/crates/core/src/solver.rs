//! Stationary points of constrained actions.
//!
//! Newton's method on the full gradient (the stationary point is a saddle, so
//! the KKT matrix is factored with pivoted LU), globalized by backtracking on
//! `½‖∇S‖²`. When Newton stalls, a few Levenberg–Marquardt steps on the same
//! merit take over before Newton resumes.

use crate::action::{ActionProblem, SolverState};
use crate::error::{Error, Result};
use crate::linalg::{self, eigenvalues, DenseMatrix, Lu, Spectrum};

const REFINEMENT_SWEEPS: usize = 2;

/// A Newton step that keeps more than this fraction of the merit counts as stalled.
const STALL_RATIO: f64 = 0.9;

/// Levenberg–Marquardt steps per fallback phase.
const FALLBACK_STEPS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub max_newton_iters: usize,
    /// Base gradient tolerance; see [`SolverConfig::tolerance_for`].
    pub grad_tol: f64,
    pub fallback_enabled: bool,
    /// Initial step length of each Newton line search.
    pub damping: f64,
    pub ls_shrink: f64,
    pub ls_max: usize,
    /// Consecutive stalled Newton steps before the fallback engages.
    pub stall_window: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_newton_iters: 50,
            grad_tol: 1e-11,
            fallback_enabled: true,
            damping: 1.0,
            ls_shrink: 0.5,
            ls_max: 30,
            stall_window: 5,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str, reason: &str| {
            Err(Error::InvalidParameter {
                name: name.into(),
                reason: reason.into(),
            })
        };
        if !(self.grad_tol > 0.0 && self.grad_tol.is_finite()) {
            return bad("grad_tol", "must be positive");
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return bad("damping", "must lie in (0, 1]");
        }
        if !(self.ls_shrink > 0.0 && self.ls_shrink < 1.0) {
            return bad("ls_shrink", "must lie in (0, 1)");
        }
        if self.max_newton_iters == 0 {
            return bad("max_newton_iters", "must be at least 1");
        }
        Ok(())
    }

    /// Gradient tolerance for a problem with `unknowns` entries: the base
    /// tolerance grows with the square root of the size once it exceeds 128,
    /// tracking the rounding floor of the assembled gradient.
    pub fn tolerance_for(&self, unknowns: usize) -> f64 {
        self.grad_tol * (unknowns as f64 / 128.0).sqrt().max(1.0)
    }
}

#[derive(Clone, Debug)]
pub struct SolveResult {
    pub state: SolverState,
    /// Newton plus fallback steps taken.
    pub iterations: usize,
    pub final_grad_norm: f64,
    pub used_fallback: bool,
    /// Tolerance the gradient was driven below.
    pub tolerance: f64,
}

fn kkt_error(e: Error) -> Error {
    match e {
        Error::SingularMatrix { step, pivot } => Error::SingularKkt { step, pivot },
        other => other,
    }
}

fn merit(g: &[f64]) -> f64 {
    0.5 * g.iter().map(|v| v * v).sum::<f64>()
}

fn trial(z: &SolverState, dir: &[f64], alpha: f64) -> SolverState {
    let mut t = z.clone();
    for (v, d) in t.unknowns_mut().iter_mut().zip(dir) {
        *v += alpha * d;
    }
    t
}

struct Iterate {
    state: SolverState,
    grad: Vec<f64>,
    merit: f64,
}

/// LU solve followed by iterative refinement with compensated residuals.
fn refined_solve(a: &DenseMatrix, lu: &Lu, rhs: &[f64]) -> Result<Vec<f64>> {
    let mut x = lu.solve(rhs)?;
    for _ in 0..REFINEMENT_SWEEPS {
        let r = a.residual_compensated(&x, rhs)?;
        let dx = lu.solve(&r)?;
        for (xi, d) in x.iter_mut().zip(&dx) {
            *xi += d;
        }
    }
    Ok(x)
}

/// Backtracking on the merit; returns the accepted iterate and its step length.
fn line_search(
    p: &ActionProblem,
    cfg: &SolverConfig,
    cur: &Iterate,
    dir: &[f64],
    slope: f64,
) -> Result<Option<(Iterate, f64)>> {
    let mut alpha = cfg.damping;
    for _ in 0..=cfg.ls_max {
        let state = trial(&cur.state, dir, alpha);
        let grad = p.action_gradient(&state)?;
        let m = merit(&grad);
        if m.is_finite() && m <= cur.merit + 1e-4 * alpha * slope {
            return Ok(Some((Iterate { state, grad, merit: m }, alpha)));
        }
        alpha *= cfg.ls_shrink;
    }
    Ok(None)
}

/// One Levenberg–Marquardt pass on `½‖∇S‖²`, Jacobian `A = ∇²S`.
fn gauss_newton(
    p: &ActionProblem,
    cfg: &SolverConfig,
    mut cur: Iterate,
    steps: usize,
) -> Result<(Iterate, usize)> {
    let mut taken = 0;
    let mut mu: Option<f64> = None;
    while taken < steps {
        let a = p.action_hessian(&cur.state)?;
        let ata = a.transpose().matmul(&a)?;
        let atg = a.tr_matvec(&cur.grad)?;
        let scale = ata.diagonal().into_iter().fold(0.0, f64::max).max(1e-300);
        let mut damping = mu.unwrap_or(1e-6 * scale);
        let mut improved = None;
        for _ in 0..cfg.ls_max {
            let mut m = ata.clone();
            for i in 0..m.rows() {
                m[(i, i)] += damping;
            }
            let Ok(lu) = Lu::factor_owned(m) else {
                damping *= 10.0;
                continue;
            };
            let rhs: Vec<f64> = atg.iter().map(|v| -v).collect();
            let dir = lu.solve(&rhs)?;
            let state = trial(&cur.state, &dir, 1.0);
            let grad = p.action_gradient(&state)?;
            let mer = merit(&grad);
            if mer.is_finite() && mer < cur.merit {
                improved = Some(Iterate { state, grad, merit: mer });
                break;
            }
            damping *= 10.0;
        }
        taken += 1;
        match improved {
            Some(next) => {
                cur = next;
                mu = Some(damping / 10.0);
            }
            None => break,
        }
    }
    Ok((cur, taken))
}

/// Drives `‖∇S‖∞` below [`SolverConfig::tolerance_for`].
pub fn solve(
    p: &ActionProblem,
    cfg: &SolverConfig,
    init: Option<&SolverState>,
) -> Result<SolveResult> {
    cfg.validate()?;
    let state = match init {
        Some(s) => {
            if s.layout() != p.layout() {
                return Err(Error::LayoutMismatch {
                    expected: p.layout().len(),
                    actual: s.unknowns().len(),
                });
            }
            s.clone()
        }
        None => p.initial_state(),
    };
    let tol = cfg.tolerance_for(p.layout().len());
    let grad = p.action_gradient(&state)?;
    let mut cur = Iterate {
        merit: merit(&grad),
        state,
        grad,
    };
    let mut iterations = 0;
    let mut stalls = 0;
    let mut used_fallback = false;

    while iterations < cfg.max_newton_iters {
        if linalg::norm_inf(&cur.grad) <= tol {
            break;
        }
        let a = p.action_hessian(&cur.state)?;
        let lu = Lu::factor(&a).map_err(kkt_error)?;
        let rhs: Vec<f64> = cur.grad.iter().map(|v| -v).collect();
        let dir = refined_solve(&a, &lu, &rhs)?;
        iterations += 1;
        let before = cur.merit;
        match line_search(p, cfg, &cur, &dir, -2.0 * cur.merit)? {
            Some((next, _)) => {
                let stalled = next.merit > STALL_RATIO * before;
                cur = next;
                stalls = if stalled { stalls + 1 } else { 0 };
            }
            None => stalls += 1,
        }
        if stalls >= cfg.stall_window && cfg.fallback_enabled {
            let budget = FALLBACK_STEPS.min(cfg.max_newton_iters - iterations);
            let (next, taken) = gauss_newton(p, cfg, cur, budget)?;
            used_fallback = true;
            iterations += taken;
            let progressed = next.merit < before;
            cur = next;
            stalls = 0;
            if !progressed || taken == 0 {
                break;
            }
        }
    }

    let final_grad_norm = linalg::norm_inf(&cur.grad);
    if final_grad_norm <= tol {
        Ok(SolveResult {
            state: cur.state,
            iterations,
            final_grad_norm,
            used_fallback,
            tolerance: tol,
        })
    } else {
        Err(Error::NoConvergence {
            iterations,
            grad_norm: final_grad_norm,
        })
    }
}

/// Solves the unregularized counterpart of a gravity IVP.
///
/// Either fails with [`Error::SingularKkt`] or returns a state carrying the
/// grid-frequency contamination of the unregularized operator.
pub fn solve_naive(p: &ActionProblem, cfg: &SolverConfig) -> Result<SolveResult> {
    let naive = p.naive()?;
    solve(&naive, cfg, None)
}

/// Gap between the even- and odd-indexed sub-sequences of a path.
///
/// Uses third differences, which vanish on quadratics and equal `±8a` on
/// `a(−1)ᵏ`; a smooth path plus `a(−1)ᵏ` therefore gives `2|a|` up to a
/// third-derivative term.
pub fn even_odd_separation(x: &[f64]) -> f64 {
    x.windows(4)
        .map(|w| (w[3] - 3.0 * w[2] + 3.0 * w[1] - w[0]).abs() / 4.0)
        .fold(0.0, f64::max)
}

/// Spectrum of the KKT matrix at `s` (small problems only).
pub fn kkt_spectrum(p: &ActionProblem, s: &SolverState) -> Result<Spectrum> {
    eigenvalues(&p.action_hessian(s)?)
}

/// Spectrum of the kinetic path block of the Hessian.
pub fn kinetic_spectrum(p: &ActionProblem) -> Result<Spectrum> {
    eigenvalues(&p.kinetic_gram())
}

/// `‖x₁ − x₂‖∞`.
pub fn path_gap(s: &SolverState) -> f64 {
    s.x1()
        .iter()
        .zip(s.x2())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::{Family, Params, ProblemSetup};
    use crate::affine::InitialData;
    use crate::sbp::{Grid, Order};

    fn gravity(nt: usize, order: Order) -> ActionProblem {
        ActionProblem::new(ProblemSetup {
            family: Family::IvpGravity,
            params: Params::new().with("m", 1.0).with("g", 1.0),
            data: InitialData::second_order(1.0, 0.3).unwrap(),
            bvp_end: None,
            grid: Grid::unit(nt).unwrap(),
            order,
        })
        .unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let c = SolverConfig {
            ls_shrink: 1.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = SolverConfig {
            grad_tol: 0.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        assert_eq!(SolverConfig::default().tolerance_for(68), 1e-11);
        assert!(SolverConfig::default().tolerance_for(512) > 1e-11);
    }

    #[test]
    fn gravity_sbp42_endpoint() {
        let p = gravity(32, Order::Sbp42);
        let r = solve(&p, &SolverConfig::default(), None).unwrap();
        assert_eq!(r.iterations, 1);
        assert!(!r.used_fallback);
        assert!((r.state.x1()[31] - 0.8).abs() <= 1e-10);
        assert!(path_gap(&r.state) <= 1e-10);
    }

    #[test]
    fn separation_metric() {
        let smooth: Vec<f64> = (0..20).map(|k| 1.0 + 0.1 * k as f64 - 0.01 * (k * k) as f64).collect();
        assert!(even_odd_separation(&smooth) < 1e-14);
        let pi: Vec<f64> = smooth
            .iter()
            .enumerate()
            .map(|(k, v)| v + if k % 2 == 0 { 0.05 } else { -0.05 })
            .collect();
        assert!((even_odd_separation(&pi) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn layout_mismatch_on_init() {
        let p = gravity(16, Order::Sbp21);
        let q = gravity(17, Order::Sbp21);
        let s = q.initial_state();
        assert!(matches!(
            solve(&p, &SolverConfig::default(), Some(&s)),
            Err(Error::LayoutMismatch { .. })
        ));
    }
}
