//! Diagonal-norm summation-by-parts operators on a uniform time grid.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix};

/// Uniform grid `t_k = t1 + k·dt`, `k = 0..nt`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    t1: f64,
    t2: f64,
    nt: usize,
    dt: f64,
}

impl Grid {
    pub fn new(t1: f64, t2: f64, nt: usize) -> Result<Grid> {
        if !(t1.is_finite() && t2.is_finite() && t2 > t1) {
            return Err(Error::InvalidInterval { t1, t2 });
        }
        if nt < 2 {
            return Err(Error::GridTooSmall { nt, min: 2 });
        }
        Ok(Grid {
            t1,
            t2,
            nt,
            dt: (t2 - t1) / (nt - 1) as f64,
        })
    }

    /// Grid on the unit interval.
    pub fn unit(nt: usize) -> Result<Grid> {
        Grid::new(0.0, 1.0, nt)
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn t2(&self) -> f64 {
        self.t2
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn node(&self, k: usize) -> f64 {
        if k + 1 == self.nt {
            self.t2
        } else {
            self.t1 + k as f64 * self.dt
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.nt).map(|k| self.node(k)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Order {
    /// Second order interior, first order boundary closure (trapezoid norm).
    Sbp21,
    /// Fourth order interior, second order boundary closure.
    Sbp42,
}

impl Order {
    pub const ALL: [Order; 2] = [Order::Sbp21, Order::Sbp42];

    pub fn name(&self) -> &'static str {
        match self {
            Order::Sbp21 => "sbp21",
            Order::Sbp42 => "sbp42",
        }
    }

    /// Smallest grid that fits both boundary closures.
    pub fn min_points(&self) -> usize {
        match self {
            Order::Sbp21 => 3,
            Order::Sbp42 => 8,
        }
    }

    /// Number of rows at each end that use the boundary closure.
    pub fn boundary_rows(&self) -> usize {
        match self {
            Order::Sbp21 => 1,
            Order::Sbp42 => 4,
        }
    }

    /// Highest monomial degree differentiated exactly by the (boundary, interior) rows.
    pub fn exact_degrees(&self) -> (u32, u32) {
        match self {
            Order::Sbp21 => (1, 2),
            Order::Sbp42 => (2, 4),
        }
    }
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Order {
    type Err = Error;

    fn from_str(s: &str) -> Result<Order> {
        match s.to_ascii_lowercase().as_str() {
            "sbp21" | "21" => Ok(Order::Sbp21),
            "sbp42" | "42" => Ok(Order::Sbp42),
            _ => Err(Error::InvalidParameter {
                name: "order".into(),
                reason: format!("`{s}` is not one of sbp21, sbp42"),
            }),
        }
    }
}

#[derive(Clone, Copy)]
struct Ratio(i64, i64);

impl Ratio {
    fn value(self) -> f64 {
        self.0 as f64 / self.1 as f64
    }
}

const SBP21_NORM: [Ratio; 1] = [Ratio(1, 2)];
const SBP21_CLOSURE: [&[Ratio]; 1] = [&[Ratio(-1, 1), Ratio(1, 1)]];
const SBP21_INTERIOR: [Ratio; 3] = [Ratio(-1, 2), Ratio(0, 1), Ratio(1, 2)];

const SBP42_NORM: [Ratio; 4] = [Ratio(17, 48), Ratio(59, 48), Ratio(43, 48), Ratio(49, 48)];
const SBP42_CLOSURE: [&[Ratio]; 4] = [
    &[Ratio(-24, 17), Ratio(59, 34), Ratio(-4, 17), Ratio(-3, 34)],
    &[Ratio(-1, 2), Ratio(0, 1), Ratio(1, 2), Ratio(0, 1)],
    &[Ratio(4, 43), Ratio(-59, 86), Ratio(0, 1), Ratio(59, 86), Ratio(-4, 43)],
    &[Ratio(3, 98), Ratio(0, 1), Ratio(-59, 98), Ratio(0, 1), Ratio(32, 49), Ratio(-4, 49)],
];
const SBP42_INTERIOR: [Ratio; 5] = [
    Ratio(1, 12),
    Ratio(-2, 3),
    Ratio(0, 1),
    Ratio(2, 3),
    Ratio(-1, 12),
];

#[derive(Clone, Debug)]
pub struct SbpOperator {
    grid: Grid,
    order: Order,
    h: DenseMatrix,
    h_diag: Vec<f64>,
    d: DenseMatrix,
}

/// Builds the quadrature `H` and first-derivative `D = H⁻¹Q` pair.
pub fn build_sbp(grid: Grid, order: Order) -> Result<SbpOperator> {
    let n = grid.nt();
    if n < order.min_points() {
        return Err(Error::GridTooSmall {
            nt: n,
            min: order.min_points(),
        });
    }
    let (norm, closure, interior): (&[Ratio], &[&[Ratio]], &[Ratio]) = match order {
        Order::Sbp21 => (&SBP21_NORM, &SBP21_CLOSURE, &SBP21_INTERIOR),
        Order::Sbp42 => (&SBP42_NORM, &SBP42_CLOSURE, &SBP42_INTERIOR),
    };
    let dt = grid.dt();
    let inv_dt = 1.0 / dt;

    let mut h_diag = vec![dt; n];
    for (i, w) in norm.iter().enumerate() {
        h_diag[i] = w.value() * dt;
        h_diag[n - 1 - i] = w.value() * dt;
    }

    let mut d = DenseMatrix::zeros(n, n);
    let nb = closure.len();
    for (i, row) in closure.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            let v = c.value() * inv_dt;
            d[(i, j)] = v;
            d[(n - 1 - i, n - 1 - j)] = -v;
        }
    }
    let half = interior.len() / 2;
    for i in nb..n - nb {
        for (off, c) in interior.iter().enumerate() {
            d[(i, i + off - half)] = c.value() * inv_dt;
        }
    }

    Ok(SbpOperator {
        grid,
        order,
        h: DenseMatrix::from_diagonal(&h_diag),
        h_diag,
        d,
    })
}

impl SbpOperator {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn order(&self) -> Order {
        self.order
    }

    pub fn nt(&self) -> usize {
        self.grid.nt()
    }

    pub fn h(&self) -> &DenseMatrix {
        &self.h
    }

    pub fn h_diag(&self) -> &[f64] {
        &self.h_diag
    }

    pub fn d(&self) -> &DenseMatrix {
        &self.d
    }

    /// `Q = H·D`.
    pub fn q(&self) -> DenseMatrix {
        let mut q = self.d.clone();
        for (i, &w) in self.h_diag.iter().enumerate() {
            for v in q.row_mut(i) {
                *v *= w;
            }
        }
        q
    }

    /// Largest entry of `Q + Qᵀ − (E_N − E_0)`.
    pub fn sbp_defect(&self) -> f64 {
        let q = self.q();
        let n = self.nt();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                let mut target = 0.0;
                if i == j && i == 0 {
                    target = -1.0;
                } else if i == j && i == n - 1 {
                    target = 1.0;
                }
                worst = worst.max((q[(i, j)] + q[(j, i)] - target).abs());
            }
        }
        worst
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.d.matvec(x)
    }

    /// `1ᵀ H f`.
    pub fn quadrature(&self, f: &[f64]) -> Result<f64> {
        if f.len() != self.nt() {
            return Err(Error::LengthMismatch {
                expected: self.nt(),
                actual: f.len(),
            });
        }
        Ok(linalg::dot(&self.h_diag, f))
    }

    /// `uᵀH(Dv) + (Du)ᵀHv − (u_N v_N − u_0 v_0)`.
    pub fn ibp_defect(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        let du = self.apply(u)?;
        let dv = self.apply(v)?;
        let n = self.nt();
        let lhs: f64 = (0..n)
            .map(|k| self.h_diag[k] * (u[k] * dv[k] + du[k] * v[k]))
            .sum();
        Ok(lhs - (u[n - 1] * v[n - 1] - u[0] * v[0]))
    }

    /// Rows `[depth·b, nt − depth·b)` where `b` is the closure size; rows of
    /// `D^depth` in this range only touch interior stencils.
    pub fn interior_rows(&self, depth: usize) -> std::ops::Range<usize> {
        let b = self.order.boundary_rows() * depth;
        b..self.nt().saturating_sub(b).max(b)
    }

    fn rank_tolerance(&self) -> f64 {
        1e-10 / self.grid.dt()
    }

    /// Dimension of the right null space of `D`.
    pub fn null_space_dimension(&self) -> usize {
        self.nt() - linalg::numerical_rank(&self.d, self.rank_tolerance())
    }

    /// Normalized basis vector of the left null space of `D`.
    ///
    /// The vector is scaled to unit max-norm with a positive second entry.
    pub fn left_null_vector(&self) -> Option<Vec<f64>> {
        let basis = linalg::null_space(&self.d.transpose(), self.rank_tolerance());
        if basis.cols() == 0 {
            return None;
        }
        let mut v = basis.column(0);
        let scale = linalg::norm_inf(&v);
        let sign = if v[1.min(v.len() - 1)] < 0.0 { -1.0 } else { 1.0 };
        for x in &mut v {
            *x *= sign / scale;
        }
        Some(v)
    }

    /// Accuracy of `D` on sampled monomials `t^k`.
    pub fn verify_accuracy(&self) -> AccuracyReport {
        verify_accuracy(self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    Boundary,
    Interior,
}

#[derive(Clone, Copy, Debug)]
pub struct MonomialCheck {
    pub degree: u32,
    pub region: Region,
    /// Largest deviation `|D tᵏ − k tᵏ⁻¹|` over the region, relative to the
    /// largest exact derivative value (floored at one).
    pub max_error: f64,
    /// Whether the operator is designed to be exact for this degree and region.
    pub expected_exact: bool,
}

#[derive(Clone, Debug)]
pub struct AccuracyReport {
    pub order: Order,
    pub checks: Vec<MonomialCheck>,
}

impl AccuracyReport {
    pub fn get(&self, degree: u32, region: Region) -> Option<&MonomialCheck> {
        self.checks
            .iter()
            .find(|c| c.degree == degree && c.region == region)
    }

    /// Whether every designed-exact degree is reproduced within `tol`.
    pub fn is_exact(&self, tol: f64) -> bool {
        self.checks
            .iter()
            .filter(|c| c.expected_exact)
            .all(|c| c.max_error <= tol)
    }
}

pub fn verify_accuracy(op: &SbpOperator) -> AccuracyReport {
    let t = op.grid.nodes();
    let n = op.nt();
    let nb = op.order.boundary_rows();
    let (bdeg, ideg) = op.order.exact_degrees();
    let mut checks = Vec::new();
    for k in 0..=ideg + 1 {
        let f: Vec<f64> = t.iter().map(|&ti| ti.powi(k as i32)).collect();
        let exact: Vec<f64> = t
            .iter()
            .map(|&ti| if k == 0 { 0.0 } else { k as f64 * ti.powi(k as i32 - 1) })
            .collect();
        let df = op.d.matvec(&f).expect("length matches grid");
        for region in [Region::Boundary, Region::Interior] {
            let rows: Vec<usize> = match region {
                Region::Boundary => (0..nb).chain(n - nb..n).collect(),
                Region::Interior => (nb..n - nb).collect(),
            };
            let scale = rows
                .iter()
                .map(|&i| exact[i].abs())
                .fold(1.0, f64::max);
            let max_error = rows
                .iter()
                .map(|&i| (df[i] - exact[i]).abs())
                .fold(0.0, f64::max)
                / scale;
            let limit = if region == Region::Boundary { bdeg } else { ideg };
            checks.push(MonomialCheck {
                degree: k,
                region,
                max_error,
                expected_exact: k <= limit,
            });
        }
    }
    AccuracyReport {
        order: op.order,
        checks,
    }
}

/// `1ᵀ H f` for an operator.
pub fn quadrature(op: &SbpOperator, f: &[f64]) -> Result<f64> {
    op.quadrature(f)
}
