//! Discretized action functionals with doubled degrees of freedom.
//!
//! Unknowns are laid out as `[x₁ | x₂ | λ]` for initial value problems and
//! `[x | λ]` for the boundary value problem. Every functional is assembled
//! from the same few pieces: a kinetic form `½K(x)ᵀHK(x)` with
//! `K(x) = D̃x + b`, diagonal-quadrature potentials, an optional coupling
//! term between the two paths, and linear constraints with multipliers.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::Serialize;

use crate::affine::{build_affine, AffineOperator, InitialData};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::sbp::{build_sbp, Grid, Order, SbpOperator};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// `ẍ = −g` with both endpoints fixed.
    BvpGravity,
    /// `ẍ = −g`.
    IvpGravity,
    /// `ẍ + κx³ = 0`.
    IvpCubic,
    /// `ẋ = κx`.
    IvpExponential,
    /// `μẍ + ξẋ + κx = 0`.
    IvpDampedHo,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::BvpGravity,
        Family::IvpGravity,
        Family::IvpCubic,
        Family::IvpExponential,
        Family::IvpDampedHo,
    ];

    pub const IVP: [Family; 4] = [
        Family::IvpGravity,
        Family::IvpCubic,
        Family::IvpExponential,
        Family::IvpDampedHo,
    ];

    /// Registry name.
    pub fn name(&self) -> &'static str {
        match self {
            Family::BvpGravity => "gravity-bvp",
            Family::IvpGravity => "gravity",
            Family::IvpCubic => "cubic",
            Family::IvpExponential => "exponential",
            Family::IvpDampedHo => "damped-ho",
        }
    }

    pub fn required_params(&self) -> &'static [&'static str] {
        match self {
            Family::BvpGravity | Family::IvpGravity => &["m", "g"],
            Family::IvpCubic | Family::IvpExponential => &["kappa"],
            Family::IvpDampedHo => &["mu", "kappa", "xi"],
        }
    }

    pub fn constraint_count(&self) -> usize {
        match self {
            Family::BvpGravity | Family::IvpExponential => 2,
            _ => 4,
        }
    }

    pub fn paths(&self) -> usize {
        match self {
            Family::BvpGravity => 1,
            _ => 2,
        }
    }

    pub fn is_ivp(&self) -> bool {
        *self != Family::BvpGravity
    }

    pub fn is_second_order(&self) -> bool {
        *self != Family::IvpExponential
    }

    /// Whether the action is quadratic in the unknowns.
    pub fn is_quadratic(&self) -> bool {
        *self != Family::IvpCubic
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Family> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::UnknownProblem(s.to_string()))
    }
}

/// Named scalar parameters.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Params(BTreeMap<String, f64>);

impl Params {
    pub fn new() -> Params {
        Params::default()
    }

    pub fn with(mut self, name: &str, value: f64) -> Params {
        self.set(name, value);
        self
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.0.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

/// Typed model coefficients extracted from [`Params`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Coefficients {
    Gravity { m: f64, g: f64 },
    Cubic { kappa: f64 },
    Exponential { kappa: f64 },
    DampedHo { mu: f64, kappa: f64, xi: f64 },
}

impl Coefficients {
    pub fn from_params(family: Family, params: &Params) -> Result<Coefficients> {
        let get = |name: &'static str| -> Result<f64> {
            let v = params.get(name).ok_or(Error::MissingParameter {
                family: family.name(),
                name,
            })?;
            if !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name: name.into(),
                    reason: "must be finite".into(),
                });
            }
            Ok(v)
        };
        let positive = |name: &'static str| -> Result<f64> {
            let v = get(name)?;
            if v <= 0.0 {
                return Err(Error::InvalidParameter {
                    name: name.into(),
                    reason: "must be positive".into(),
                });
            }
            Ok(v)
        };
        Ok(match family {
            Family::BvpGravity | Family::IvpGravity => Coefficients::Gravity {
                m: positive("m")?,
                g: get("g")?,
            },
            Family::IvpCubic => Coefficients::Cubic {
                kappa: get("kappa")?,
            },
            Family::IvpExponential => Coefficients::Exponential {
                kappa: get("kappa")?,
            },
            Family::IvpDampedHo => Coefficients::DampedHo {
                mu: positive("mu")?,
                kappa: get("kappa")?,
                xi: get("xi")?,
            },
        })
    }

    /// Energy at one instant: `½mv² + mgx`, `½v² + κx⁴/4`, `½κx²` and
    /// `½μv² + κx²` respectively.
    pub fn energy(&self, x: f64, v: f64) -> f64 {
        match *self {
            Coefficients::Gravity { m, g } => 0.5 * m * v * v + m * g * x,
            Coefficients::Cubic { kappa } => 0.5 * v * v + 0.25 * kappa * x.powi(4),
            Coefficients::Exponential { kappa } => 0.5 * kappa * x * x,
            Coefficients::DampedHo { mu, kappa, .. } => 0.5 * mu * v * v + kappa * x * x,
        }
    }

    /// Momentum `∂ℒ/∂ẋ`.
    pub fn momentum(&self, v: f64) -> f64 {
        match *self {
            Coefficients::Gravity { m, .. } => m * v,
            Coefficients::Cubic { .. } => v,
            Coefficients::Exponential { .. } => 0.0,
            Coefficients::DampedHo { mu, .. } => mu * v,
        }
    }
}

/// Declarative description of one variational problem.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSetup {
    pub family: Family,
    pub params: Params,
    pub data: InitialData,
    /// Final position, boundary value problem only.
    pub bvp_end: Option<f64>,
    pub grid: Grid,
    pub order: Order,
}

/// Index layout of the unknown vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    pub nt: usize,
    pub paths: usize,
    pub constraints: usize,
}

impl Layout {
    pub fn len(&self) -> usize {
        self.nt * self.paths + self.constraints
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn x1(&self) -> Range<usize> {
        0..self.nt
    }

    pub fn x2(&self) -> Option<Range<usize>> {
        (self.paths == 2).then(|| self.nt..2 * self.nt)
    }

    pub fn lambda(&self) -> Range<usize> {
        self.nt * self.paths..self.len()
    }
}

/// Unknown vector of one problem.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverState {
    layout: Layout,
    unknowns: Vec<f64>,
}

impl SolverState {
    pub fn new(layout: Layout, unknowns: Vec<f64>) -> Result<SolverState> {
        if unknowns.len() != layout.len() {
            return Err(Error::LayoutMismatch {
                expected: layout.len(),
                actual: unknowns.len(),
            });
        }
        Ok(SolverState { layout, unknowns })
    }

    pub fn zeros(layout: Layout) -> SolverState {
        SolverState {
            layout,
            unknowns: vec![0.0; layout.len()],
        }
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn unknowns(&self) -> &[f64] {
        &self.unknowns
    }

    pub fn unknowns_mut(&mut self) -> &mut [f64] {
        &mut self.unknowns
    }

    pub fn into_unknowns(self) -> Vec<f64> {
        self.unknowns
    }

    pub fn x1(&self) -> &[f64] {
        &self.unknowns[self.layout.x1()]
    }

    /// Backward path; the forward path again for a single-path layout.
    pub fn x2(&self) -> &[f64] {
        match self.layout.x2() {
            Some(r) => &self.unknowns[r],
            None => self.x1(),
        }
    }

    pub fn x2_mut(&mut self) -> Option<&mut [f64]> {
        let r = self.layout.x2()?;
        Some(&mut self.unknowns[r])
    }

    pub fn x1_mut(&mut self) -> &mut [f64] {
        let r = self.layout.x1();
        &mut self.unknowns[r]
    }

    pub fn lambda(&self) -> &[f64] {
        &self.unknowns[self.layout.lambda()]
    }

    pub fn lambda_mut(&mut self) -> &mut [f64] {
        let r = self.layout.lambda();
        &mut self.unknowns[r]
    }
}

/// Row-compressed copy of a banded operator.
#[derive(Clone, Debug)]
struct SparseRows {
    rows: Vec<Vec<(usize, f64)>>,
}

impl SparseRows {
    fn from_dense(m: &DenseMatrix) -> SparseRows {
        let rows = (0..m.rows())
            .map(|i| {
                m.row(i)
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(j, v)| (j, *v))
                    .collect()
            })
            .collect();
        SparseRows { rows }
    }

    fn matvec(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&(j, v)| v * x[j]).sum())
            .collect()
    }

    fn tr_matvec(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; y.len()];
        for (r, &yi) in self.rows.iter().zip(y) {
            for &(j, v) in r {
                out[j] += v * yi;
            }
        }
        out
    }

    fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        self.rows[i].iter().map(|&(j, v)| v * x[j]).sum()
    }
}

#[derive(Clone, Debug)]
struct Constraint {
    terms: Vec<(usize, f64)>,
    target: f64,
}

impl Constraint {
    fn residual(&self, z: &[f64]) -> f64 {
        self.terms.iter().map(|&(i, c)| c * z[i]).sum::<f64>() - self.target
    }
}

/// A compiled variational problem.
#[derive(Clone, Debug)]
pub struct ActionProblem {
    setup: ProblemSetup,
    coefficients: Coefficients,
    op: SbpOperator,
    affine: Option<AffineOperator>,
    regularized: bool,
    kinetic: SparseRows,
    shift: Vec<f64>,
    d: SparseRows,
    constraints: Vec<Constraint>,
    layout: Layout,
}

impl ActionProblem {
    pub fn new(setup: ProblemSetup) -> Result<ActionProblem> {
        ActionProblem::compile(setup, true)
    }

    fn compile(setup: ProblemSetup, regularized: bool) -> Result<ActionProblem> {
        let family = setup.family;
        let coefficients = Coefficients::from_params(family, &setup.params)?;
        if family.is_ivp() && family.is_second_order() && setup.data.v0.is_none() {
            return Err(Error::MissingParameter {
                family: family.name(),
                name: "v0",
            });
        }
        let xf = match (family, setup.bvp_end) {
            (Family::BvpGravity, None) => {
                return Err(Error::MissingParameter {
                    family: family.name(),
                    name: "xf",
                })
            }
            (Family::BvpGravity, Some(xf)) if !xf.is_finite() => {
                return Err(Error::InvalidParameter {
                    name: "xf".into(),
                    reason: "must be finite".into(),
                })
            }
            (_, xf) => xf,
        };
        let op = build_sbp(setup.grid, setup.order)?;
        let n = op.nt();
        let d = SparseRows::from_dense(op.d());

        let affine = family.is_ivp().then(|| build_affine(&op, setup.data));
        let (kinetic, shift) = match (&affine, regularized) {
            (Some(a), true) => (SparseRows::from_dense(a.dtilde()), a.shift().to_vec()),
            _ => (d.clone(), vec![0.0; n]),
        };

        let layout = Layout {
            nt: n,
            paths: family.paths(),
            constraints: family.constraint_count(),
        };
        let last = n - 1;
        let x1 = |k: usize| k;
        let x2 = |k: usize| n + k;
        let d_row = |row: usize, offset: usize, sign: f64| -> Vec<(usize, f64)> {
            d.rows[row].iter().map(|&(j, v)| (offset + j, sign * v)).collect()
        };
        let xi = setup.data.x0;
        let constraints = match family {
            Family::BvpGravity => vec![
                Constraint {
                    terms: vec![(x1(0), 1.0)],
                    target: xi,
                },
                Constraint {
                    terms: vec![(x1(last), 1.0)],
                    target: xf.unwrap_or_default(),
                },
            ],
            Family::IvpExponential => vec![
                Constraint {
                    terms: vec![(x1(0), 1.0)],
                    target: xi,
                },
                Constraint {
                    terms: vec![(x1(last), 1.0), (x2(last), -1.0)],
                    target: 0.0,
                },
            ],
            _ => {
                let mut matching = d_row(last, 0, 1.0);
                matching.extend(d_row(last, n, -1.0));
                vec![
                    Constraint {
                        terms: vec![(x1(0), 1.0)],
                        target: xi,
                    },
                    Constraint {
                        terms: d_row(0, 0, 1.0),
                        target: setup.data.v0.unwrap_or_default(),
                    },
                    Constraint {
                        terms: vec![(x1(last), 1.0), (x2(last), -1.0)],
                        target: 0.0,
                    },
                    Constraint {
                        terms: matching,
                        target: 0.0,
                    },
                ]
            }
        };

        Ok(ActionProblem {
            setup,
            coefficients,
            op,
            affine,
            regularized,
            kinetic,
            shift,
            d,
            constraints,
            layout,
        })
    }

    /// The same gravity problem with the unregularized operator in the
    /// kinetic terms.
    pub fn naive(&self) -> Result<ActionProblem> {
        if self.setup.family != Family::IvpGravity {
            return Err(Error::Unsupported(
                "the unregularized functional is only provided for the gravity IVP",
            ));
        }
        ActionProblem::compile(self.setup.clone(), false)
    }

    pub fn setup(&self) -> &ProblemSetup {
        &self.setup
    }

    pub fn family(&self) -> Family {
        self.setup.family
    }

    pub fn order(&self) -> Order {
        self.setup.order
    }

    pub fn grid(&self) -> &Grid {
        &self.setup.grid
    }

    pub fn data(&self) -> InitialData {
        self.setup.data
    }

    pub fn coefficients(&self) -> Coefficients {
        self.coefficients
    }

    pub fn operator(&self) -> &SbpOperator {
        &self.op
    }

    pub fn affine(&self) -> Option<&AffineOperator> {
        self.affine.as_ref()
    }

    pub fn is_regularized(&self) -> bool {
        self.regularized && self.affine.is_some()
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    /// Default start: both paths at the initial position, multipliers zero.
    pub fn initial_state(&self) -> SolverState {
        let mut s = SolverState::zeros(self.layout);
        let n = self.layout.nt * self.layout.paths;
        s.unknowns[..n].fill(self.setup.data.x0);
        s
    }

    fn check(&self, s: &SolverState) -> Result<()> {
        if s.layout != self.layout {
            return Err(Error::LayoutMismatch {
                expected: self.layout.len(),
                actual: s.unknowns.len(),
            });
        }
        Ok(())
    }

    fn kin_weight(&self) -> f64 {
        match self.coefficients {
            Coefficients::Gravity { m, .. } => m,
            Coefficients::Cubic { .. } => 1.0,
            Coefficients::Exponential { .. } => 0.0,
            Coefficients::DampedHo { mu, .. } => mu,
        }
    }

    fn quad_kappa(&self) -> f64 {
        match self.coefficients {
            Coefficients::Exponential { kappa } | Coefficients::DampedHo { kappa, .. } => kappa,
            _ => 0.0,
        }
    }

    fn coupling(&self) -> f64 {
        match self.coefficients {
            Coefficients::Exponential { .. } => 1.0,
            Coefficients::DampedHo { xi, .. } => -xi,
            _ => 0.0,
        }
    }

    /// `K(x) = D̃x + b` (or `Dx` without regularization).
    fn k_of(&self, x: &[f64]) -> Vec<f64> {
        let mut k = self.kinetic.matvec(x);
        for (ki, si) in k.iter_mut().zip(&self.shift) {
            *ki += si;
        }
        k
    }

    fn h(&self) -> &[f64] {
        self.op.h_diag()
    }

    fn quad_form(&self, a: &[f64], b: &[f64]) -> f64 {
        self.h()
            .iter()
            .zip(a.iter().zip(b))
            .map(|(w, (p, q))| w * p * q)
            .sum()
    }

    /// Action without the multiplier terms.
    pub fn bulk_value(&self, s: &SolverState) -> Result<f64> {
        self.check(s)?;
        let h = self.h();
        let x1 = s.x1();
        let w = self.kin_weight();
        let k1 = self.k_of(x1);
        if self.layout.paths == 1 {
            let Coefficients::Gravity { m, g } = self.coefficients else {
                unreachable!("single-path layout is gravity only")
            };
            let pot: f64 = h.iter().zip(x1).map(|(a, b)| a * b).sum();
            return Ok(0.5 * m * self.quad_form(&k1, &k1) - m * g * pot);
        }
        let x2 = s.x2();
        let mut value = 0.0;
        if w != 0.0 {
            let k2 = self.k_of(x2);
            value += 0.5 * w * (self.quad_form(&k1, &k1) - self.quad_form(&k2, &k2));
        }
        match self.coefficients {
            Coefficients::Gravity { m, g } => {
                let diff: f64 = (0..self.layout.nt).map(|k| h[k] * (x1[k] - x2[k])).sum();
                value -= m * g * diff;
            }
            Coefficients::Cubic { kappa } => {
                let c: f64 = (0..self.layout.nt)
                    .map(|k| {
                        let p = 0.5 * (x1[k] + x2[k]);
                        h[k] * p * p * p * (x1[k] - x2[k])
                    })
                    .sum();
                value -= kappa * c;
            }
            _ => {}
        }
        let kq = self.quad_kappa();
        if kq != 0.0 {
            value -= 0.5 * kq * (self.quad_form(x1, x1) - self.quad_form(x2, x2));
        }
        let c = self.coupling();
        if c != 0.0 {
            let (sum, diff) = sum_diff(x1, x2);
            let mut big_s = self.kinetic.matvec(&sum);
            for (v, b) in big_s.iter_mut().zip(&self.shift) {
                *v += 2.0 * b;
            }
            value += 0.5 * c * self.quad_form(&big_s, &diff);
        }
        Ok(value)
    }

    /// Constraint residuals `c_i(x)` in multiplier order.
    pub fn constraint_residuals(&self, s: &SolverState) -> Result<Vec<f64>> {
        self.check(s)?;
        Ok(self
            .constraints
            .iter()
            .map(|c| c.residual(&s.unknowns))
            .collect())
    }

    pub fn action_value(&self, s: &SolverState) -> Result<f64> {
        let bulk = self.bulk_value(s)?;
        let r = self.constraint_residuals(s)?;
        Ok(bulk + s.lambda().iter().zip(&r).map(|(l, c)| l * c).sum::<f64>())
    }

    pub fn action_gradient(&self, s: &SolverState) -> Result<Vec<f64>> {
        self.check(s)?;
        let n = self.layout.nt;
        let h = self.h();
        let mut grad = vec![0.0; self.layout.len()];
        let x1 = s.x1();
        let w = self.kin_weight();

        if self.layout.paths == 1 {
            let Coefficients::Gravity { m, g } = self.coefficients else {
                unreachable!("single-path layout is gravity only")
            };
            let hk = weighted(h, &self.k_of(x1));
            let kin = self.kinetic.tr_matvec(&hk);
            for k in 0..n {
                grad[k] = m * kin[k] - m * g * h[k];
            }
        } else {
            let x2 = s.x2();
            let (g1, g2) = grad.split_at_mut(n);
            let g2 = &mut g2[..n];
            if w != 0.0 {
                let a1 = self.kinetic.tr_matvec(&weighted(h, &self.k_of(x1)));
                let a2 = self.kinetic.tr_matvec(&weighted(h, &self.k_of(x2)));
                for k in 0..n {
                    g1[k] += w * a1[k];
                    g2[k] -= w * a2[k];
                }
            }
            match self.coefficients {
                Coefficients::Gravity { m, g } => {
                    for k in 0..n {
                        g1[k] -= m * g * h[k];
                        g2[k] += m * g * h[k];
                    }
                }
                Coefficients::Cubic { kappa } => {
                    for k in 0..n {
                        let p = 0.5 * (x1[k] + x2[k]);
                        let q = x1[k] - x2[k];
                        let a = 1.5 * p * p * q;
                        let b = p * p * p;
                        g1[k] -= kappa * h[k] * (a + b);
                        g2[k] -= kappa * h[k] * (a - b);
                    }
                }
                _ => {}
            }
            let kq = self.quad_kappa();
            if kq != 0.0 {
                for k in 0..n {
                    g1[k] -= kq * h[k] * x1[k];
                    g2[k] += kq * h[k] * x2[k];
                }
            }
            let c = self.coupling();
            if c != 0.0 {
                let (sum, diff) = sum_diff(x1, x2);
                let mut big_s = self.kinetic.matvec(&sum);
                for (v, b) in big_s.iter_mut().zip(&self.shift) {
                    *v += 2.0 * b;
                }
                let kt_hm = self.kinetic.tr_matvec(&weighted(h, &diff));
                for k in 0..n {
                    let hs = h[k] * big_s[k];
                    g1[k] += 0.5 * c * (kt_hm[k] + hs);
                    g2[k] += 0.5 * c * (kt_hm[k] - hs);
                }
            }
        }

        let lam_off = self.layout.lambda().start;
        let lambda = s.lambda();
        for (ci, con) in self.constraints.iter().enumerate() {
            for &(i, coef) in &con.terms {
                grad[i] += lambda[ci] * coef;
            }
            grad[lam_off + ci] = con.residual(&s.unknowns);
        }
        Ok(grad)
    }

    pub fn action_hessian(&self, s: &SolverState) -> Result<DenseMatrix> {
        self.check(s)?;
        let n = self.layout.nt;
        let h = self.h();
        let mut a = DenseMatrix::zeros(self.layout.len(), self.layout.len());
        let w = self.kin_weight();
        let o2 = n;

        let add_gram = |a: &mut DenseMatrix, off: usize, factor: f64| {
            for (k, row) in self.kinetic.rows.iter().enumerate() {
                let wk = factor * h[k];
                for &(i, vi) in row {
                    for &(j, vj) in row {
                        a[(off + i, off + j)] += wk * vi * vj;
                    }
                }
            }
        };

        if self.layout.paths == 1 {
            add_gram(&mut a, 0, w);
        } else {
            if w != 0.0 {
                add_gram(&mut a, 0, w);
                add_gram(&mut a, o2, -w);
            }
            let kq = self.quad_kappa();
            if kq != 0.0 {
                for k in 0..n {
                    a[(k, k)] -= kq * h[k];
                    a[(o2 + k, o2 + k)] += kq * h[k];
                }
            }
            if let Coefficients::Cubic { kappa } = self.coefficients {
                let (x1, x2) = (s.x1(), s.x2());
                for k in 0..n {
                    let p = 0.5 * (x1[k] + x2[k]);
                    let q = x1[k] - x2[k];
                    let pm = 1.5 * p * q;
                    let pp = 3.0 * p * p;
                    let f = kappa * h[k];
                    a[(k, k)] -= f * (pm + pp);
                    a[(o2 + k, o2 + k)] -= f * (pm - pp);
                    a[(k, o2 + k)] -= f * pm;
                    a[(o2 + k, k)] -= f * pm;
                }
            }
            let c = self.coupling();
            if c != 0.0 {
                let half = 0.5 * c;
                for (k, row) in self.kinetic.rows.iter().enumerate() {
                    for &(j, v) in row {
                        let e = half * h[k] * v;
                        a[(k, j)] += e;
                        a[(j, k)] += e;
                        a[(o2 + k, o2 + j)] -= e;
                        a[(o2 + j, o2 + k)] -= e;
                        a[(k, o2 + j)] += e;
                        a[(j, o2 + k)] -= e;
                        a[(o2 + j, k)] += e;
                        a[(o2 + k, j)] -= e;
                    }
                }
            }
        }

        let lam_off = self.layout.lambda().start;
        for (ci, con) in self.constraints.iter().enumerate() {
            for &(i, coef) in &con.terms {
                a[(i, lam_off + ci)] += coef;
                a[(lam_off + ci, i)] += coef;
            }
        }
        Ok(a)
    }

    /// Path block `K̃ᵀHK̃` of the kinetic form (unit mass).
    pub fn kinetic_gram(&self) -> DenseMatrix {
        let n = self.layout.nt;
        let h = self.h();
        let mut a = DenseMatrix::zeros(n, n);
        for (k, row) in self.kinetic.rows.iter().enumerate() {
            for &(i, vi) in row {
                for &(j, vj) in row {
                    a[(i, j)] += h[k] * vi * vj;
                }
            }
        }
        a
    }

    /// `DDx₊ + g·1` with the unregularized operator, where `x₊` is the path
    /// midpoint. Only rows in [`SbpOperator::interior_rows`]`(2)` are free of
    /// boundary and multiplier contributions.
    pub fn discrete_eom_residual(&self, s: &SolverState) -> Result<Vec<f64>> {
        self.check(s)?;
        let Coefficients::Gravity { g, .. } = self.coefficients else {
            return Err(Error::Unsupported(
                "the discrete equation of motion check is defined for gravity only",
            ));
        };
        let (sum, _) = sum_diff(s.x1(), s.x2());
        let xp: Vec<f64> = sum.iter().map(|v| 0.5 * v).collect();
        let dd = self.d.matvec(&self.d.matvec(&xp));
        Ok(dd.into_iter().map(|v| v + g).collect())
    }

    /// `(Dx)_k` with the unregularized operator.
    pub fn derivative(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.layout.nt {
            return Err(Error::LengthMismatch {
                expected: self.layout.nt,
                actual: x.len(),
            });
        }
        Ok(self.d.matvec(x))
    }

    /// `(Dx)` at the final node.
    pub fn final_derivative(&self, x: &[f64]) -> f64 {
        self.d.row_dot(self.layout.nt - 1, x)
    }

    /// Exchanges the two paths and flips the multipliers of the final-time
    /// matching conditions.
    pub fn swap_paths(&self, s: &SolverState) -> Result<SolverState> {
        self.check(s)?;
        let mut out = s.clone();
        let Some(r2) = self.layout.x2() else {
            return Ok(out);
        };
        let n = self.layout.nt;
        out.unknowns[..n].copy_from_slice(&s.unknowns[r2.clone()]);
        out.unknowns[r2].copy_from_slice(&s.unknowns[..n]);
        let matching: &[usize] = match self.setup.family {
            Family::IvpExponential => &[1],
            _ => &[2, 3],
        };
        let lam = out.lambda_mut();
        for &i in matching {
            lam[i] = -lam[i];
        }
        Ok(out)
    }
}

fn sum_diff(a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<f64>) {
    a.iter().zip(b).map(|(p, q)| (p + q, p - q)).unzip()
}

fn weighted(h: &[f64], v: &[f64]) -> Vec<f64> {
    h.iter().zip(v).map(|(a, b)| a * b).collect()
}

/// Value of the action at `s`.
pub fn action_value(p: &ActionProblem, s: &SolverState) -> Result<f64> {
    p.action_value(s)
}

/// Gradient of the action with respect to every unknown.
pub fn action_gradient(p: &ActionProblem, s: &SolverState) -> Result<Vec<f64>> {
    p.action_gradient(s)
}

/// Hessian of the action.
pub fn action_hessian(p: &ActionProblem, s: &SolverState) -> Result<DenseMatrix> {
    p.action_hessian(s)
}

pub fn discrete_eom_residual(p: &ActionProblem, s: &SolverState) -> Result<Vec<f64>> {
    p.discrete_eom_residual(s)
}
