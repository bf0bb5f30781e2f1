//! Model problems: registry defaults, reference solutions and diagnostics.

use crate::action::{ActionProblem, Coefficients, Family, Params, ProblemSetup, SolverState};
use crate::affine::InitialData;
use crate::error::{Error, Result};
use crate::sbp::{Grid, Order};

/// Final position of the registry boundary value problem.
pub const DEFAULT_BVP_END: f64 = 0.8;

/// Default fine step of the RK4 oracle.
pub const ORACLE_DT: f64 = 1e-5;

pub fn default_params(family: Family) -> Params {
    match family {
        Family::BvpGravity | Family::IvpGravity => Params::new().with("m", 1.0).with("g", 1.0),
        Family::IvpCubic => Params::new().with("kappa", 20.0),
        Family::IvpExponential => Params::new().with("kappa", 2.5),
        Family::IvpDampedHo => Params::new()
            .with("mu", 0.5)
            .with("kappa", 1.0)
            .with("xi", 0.00071),
    }
}

pub fn default_data(family: Family) -> InitialData {
    let (x0, v0) = match family {
        Family::BvpGravity | Family::IvpExponential => (1.0, None),
        Family::IvpGravity | Family::IvpCubic => (1.0, Some(0.3)),
        Family::IvpDampedHo => (1.0, Some(0.0)),
    };
    InitialData { x0, v0 }
}

/// Registry problem on `grid` with the default parameters and data.
pub fn canonical_setup(family: Family, order: Order, grid: Grid) -> ProblemSetup {
    ProblemSetup {
        family,
        params: default_params(family),
        data: default_data(family),
        bvp_end: (family == Family::BvpGravity).then_some(DEFAULT_BVP_END),
        grid,
        order,
    }
}

pub fn canonical_problem(family: Family, order: Order, grid: Grid) -> Result<ActionProblem> {
    ActionProblem::new(canonical_setup(family, order, grid))
}

impl Coefficients {
    /// `ℒ(x, v)` of a single path.
    pub fn lagrangian(&self, x: f64, v: f64) -> f64 {
        match *self {
            Coefficients::Gravity { m, g } => 0.5 * m * v * v - m * g * x,
            Coefficients::Cubic { kappa } => 0.5 * v * v - 0.25 * kappa * x.powi(4),
            Coefficients::Exponential { kappa } => -0.5 * kappa * x * x,
            Coefficients::DampedHo { mu, kappa, .. } => 0.5 * mu * v * v - 0.5 * kappa * x * x,
        }
    }

    /// Legendre transform `πv − ℒ` with the kinetic momentum.
    pub fn hamiltonian(&self, x: f64, v: f64) -> f64 {
        self.momentum(v) * v - self.lagrangian(x, v)
    }

    /// Right-hand side of the governing first-order system in `(x, v)`.
    fn rhs(&self, x: f64, v: f64) -> (f64, f64) {
        match *self {
            Coefficients::Gravity { g, .. } => (v, -g),
            Coefficients::Cubic { kappa } => (v, -kappa * x * x * x),
            Coefficients::Exponential { kappa } => (kappa * x, kappa * kappa * x),
            Coefficients::DampedHo { mu, kappa, xi } => (v, -(xi * v + kappa * x) / mu),
        }
    }
}

fn rk4_step(c: &Coefficients, (x, v): (f64, f64), h: f64) -> (f64, f64) {
    let k1 = c.rhs(x, v);
    let k2 = c.rhs(x + 0.5 * h * k1.0, v + 0.5 * h * k1.1);
    let k3 = c.rhs(x + 0.5 * h * k2.0, v + 0.5 * h * k2.1);
    let k4 = c.rhs(x + h * k3.0, v + h * k3.1);
    (
        x + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        v + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
    )
}

fn start_velocity(c: &Coefficients, data: InitialData) -> f64 {
    match c {
        Coefficients::Exponential { kappa } => kappa * data.x0,
        _ => data.v0.unwrap_or(0.0),
    }
}

/// Classical RK4 on the governing equation, evaluated at each `t_eval`.
///
/// Each interval between successive targets is split into equal steps no
/// longer than `fine_dt`. Targets must be non-decreasing and not before `t1`.
pub fn rk_oracle(
    c: Coefficients,
    data: InitialData,
    t1: f64,
    t_eval: &[f64],
    fine_dt: f64,
) -> Result<Vec<(f64, f64)>> {
    let t_end = t_eval.iter().copied().fold(t1, f64::max);
    let span = t_end - t1;
    if !(fine_dt > 0.0) || (span > 0.0 && fine_dt > 1e-4 * span) {
        return Err(Error::InvalidParameter {
            name: "fine_dt".into(),
            reason: format!("must be positive and at most 1e-4 of the span {span}"),
        });
    }
    let mut y = (data.x0, start_velocity(&c, data));
    let mut t = t1;
    let mut out = Vec::with_capacity(t_eval.len());
    for &target in t_eval {
        if target < t {
            return Err(Error::InvalidParameter {
                name: "t_eval".into(),
                reason: "times must be non-decreasing and not before the start".into(),
            });
        }
        let steps = ((target - t) / fine_dt).ceil() as usize;
        if steps > 0 {
            let h = (target - t) / steps as f64;
            for _ in 0..steps {
                y = rk4_step(&c, y, h);
            }
        }
        t = target;
        out.push(y);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReferenceKind {
    Closed,
    Oracle,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Evaluator {
    Parabola { x0: f64, v0: f64, g: f64 },
    Exponential { x0: f64, kappa: f64 },
    Underdamped { a: f64, b: f64, gamma: f64, omega: f64 },
    Oracle { fine_dt: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReferenceSolution {
    coefficients: Coefficients,
    data: InitialData,
    t1: f64,
    eval: Evaluator,
}

impl ReferenceSolution {
    pub fn kind(&self) -> ReferenceKind {
        match self.eval {
            Evaluator::Oracle { .. } => ReferenceKind::Oracle,
            _ => ReferenceKind::Closed,
        }
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    /// `(x, ẋ)` at `t ≥ t1`.
    pub fn eval(&self, t: f64) -> Result<(f64, f64)> {
        Ok(self.eval_many(&[t])?[0])
    }

    /// `(x, ẋ)` at each time; the oracle integrates once through the sorted
    /// times.
    pub fn eval_many(&self, ts: &[f64]) -> Result<Vec<(f64, f64)>> {
        let tau = |t: f64| t - self.t1;
        match self.eval {
            Evaluator::Parabola { x0, v0, g } => Ok(ts
                .iter()
                .map(|&t| {
                    let s = tau(t);
                    (x0 + v0 * s - 0.5 * g * s * s, v0 - g * s)
                })
                .collect()),
            Evaluator::Exponential { x0, kappa } => Ok(ts
                .iter()
                .map(|&t| {
                    let x = x0 * (kappa * tau(t)).exp();
                    (x, kappa * x)
                })
                .collect()),
            Evaluator::Underdamped { a, b, gamma, omega } => Ok(ts
                .iter()
                .map(|&t| {
                    let s = tau(t);
                    let decay = (-gamma * s).exp();
                    let (sn, cs) = (omega * s).sin_cos();
                    (
                        decay * (a * cs + b * sn),
                        decay * ((omega * b - gamma * a) * cs - (gamma * b + omega * a) * sn),
                    )
                })
                .collect()),
            Evaluator::Oracle { fine_dt } => {
                let mut order: Vec<usize> = (0..ts.len()).collect();
                order.sort_by(|&i, &j| ts[i].total_cmp(&ts[j]));
                let sorted: Vec<f64> = order.iter().map(|&i| ts[i]).collect();
                let vals = rk_oracle(self.coefficients, self.data, self.t1, &sorted, fine_dt)?;
                let mut out = vec![(0.0, 0.0); ts.len()];
                for (k, &i) in order.iter().enumerate() {
                    out[i] = vals[k];
                }
                Ok(out)
            }
        }
    }

    /// Largest change of the oracle output when its step is halved; zero for
    /// closed forms.
    pub fn richardson_delta(&self, ts: &[f64]) -> Result<f64> {
        let Evaluator::Oracle { fine_dt } = self.eval else {
            return Ok(0.0);
        };
        let coarse = self.eval_many(ts)?;
        let mut half = *self;
        half.eval = Evaluator::Oracle { fine_dt: 0.5 * fine_dt };
        let fine = half.eval_many(ts)?;
        Ok(coarse
            .iter()
            .zip(&fine)
            .map(|(a, b)| (a.0 - b.0).abs().max((a.1 - b.1).abs()))
            .fold(0.0, f64::max))
    }

    /// Energy of the reference at each time.
    pub fn energy(&self, ts: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .eval_many(ts)?
            .into_iter()
            .map(|(x, v)| self.coefficients.energy(x, v))
            .collect())
    }
}

fn build_reference(
    family: Family,
    c: Coefficients,
    data: InitialData,
    t1: f64,
    bvp: Option<(f64, f64)>,
) -> Result<ReferenceSolution> {
    let eval = match (family, c) {
        (Family::BvpGravity, Coefficients::Gravity { g, .. }) => {
            let (xf, t2) = bvp.ok_or(Error::MissingParameter {
                family: family.name(),
                name: "xf",
            })?;
            let span = t2 - t1;
            let v0 = (xf - data.x0 + 0.5 * g * span * span) / span;
            Evaluator::Parabola { x0: data.x0, v0, g }
        }
        (_, Coefficients::Gravity { g, .. }) => Evaluator::Parabola {
            x0: data.x0,
            v0: data.v0.unwrap_or(0.0),
            g,
        },
        (_, Coefficients::Exponential { kappa }) => Evaluator::Exponential { x0: data.x0, kappa },
        (_, Coefficients::DampedHo { mu, kappa, xi }) => {
            if xi * xi >= 4.0 * mu * kappa {
                return Err(Error::OverdampedUnsupported);
            }
            let gamma = xi / (2.0 * mu);
            let omega = (kappa / mu - gamma * gamma).sqrt();
            let a = data.x0;
            let b = (data.v0.unwrap_or(0.0) + gamma * a) / omega;
            Evaluator::Underdamped { a, b, gamma, omega }
        }
        (_, Coefficients::Cubic { .. }) => Evaluator::Oracle { fine_dt: ORACLE_DT },
    };
    Ok(ReferenceSolution {
        coefficients: c,
        data,
        t1,
        eval,
    })
}

/// Reference trajectory starting at `t = 0`.
pub fn reference(family: Family, params: &Params, data: InitialData) -> Result<ReferenceSolution> {
    let c = Coefficients::from_params(family, params)?;
    build_reference(family, c, data, 0.0, None)
}

/// Reference trajectory for a compiled problem on its own grid.
pub fn reference_for(p: &ActionProblem) -> Result<ReferenceSolution> {
    let setup = p.setup();
    let grid = p.grid();
    build_reference(
        setup.family,
        p.coefficients(),
        setup.data,
        grid.t1(),
        setup.bvp_end.map(|xf| (xf, grid.t2())),
    )
}

#[derive(Clone, Debug, PartialEq)]
pub struct EnergyTrace {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    /// `H(x₁) + H(x₂)` per node.
    pub noether_sum: Vec<f64>,
    /// `H(x₁) − H(x₂)` per node.
    pub noether_diff: Vec<f64>,
}

/// Energy of the forward path and the Noether charges of both paths, with
/// `Dx` standing in for the velocity.
pub fn energy_trace(p: &ActionProblem, s: &SolverState) -> Result<EnergyTrace> {
    if s.layout() != p.layout() {
        return Err(Error::LayoutMismatch {
            expected: p.layout().len(),
            actual: s.unknowns().len(),
        });
    }
    let c = p.coefficients();
    let (x1, x2) = (s.x1(), s.x2());
    let (v1, v2) = (p.derivative(x1)?, p.derivative(x2)?);
    let n = x1.len();
    let mut trace = EnergyTrace {
        times: p.grid().nodes(),
        energy: Vec::with_capacity(n),
        noether_sum: Vec::with_capacity(n),
        noether_diff: Vec::with_capacity(n),
    };
    for k in 0..n {
        let h1 = c.hamiltonian(x1[k], v1[k]);
        let h2 = c.hamiltonian(x2[k], v2[k]);
        trace.energy.push(c.energy(x1[k], v1[k]));
        trace.noether_sum.push(h1 + h2);
        trace.noether_diff.push(h1 - h2);
    }
    Ok(trace)
}
