//! Regularized SBP operator in affine coordinates.
//!
//! The penalty on the initial value is folded into the first row of the
//! difference operator, and the data enters through a shift vector carried
//! in an extra trailing coordinate fixed to one.

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::sbp::SbpOperator;

/// Penalty coefficient of the initial-value term.
pub const SIGMA0: f64 = -1.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitialData {
    pub x0: f64,
    pub v0: Option<f64>,
}

impl InitialData {
    pub fn new(x0: f64, v0: Option<f64>) -> Result<InitialData> {
        if !x0.is_finite() {
            return Err(Error::InvalidParameter {
                name: "x0".into(),
                reason: "must be finite".into(),
            });
        }
        if let Some(v) = v0 {
            if !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "v0".into(),
                    reason: "must be finite".into(),
                });
            }
        }
        Ok(InitialData { x0, v0 })
    }

    pub fn position(x0: f64) -> Result<InitialData> {
        InitialData::new(x0, None)
    }

    pub fn second_order(x0: f64, v0: f64) -> Result<InitialData> {
        InitialData::new(x0, Some(v0))
    }

    /// Data vector `g = (x0, x0 + dt·v0, 0, …)`; only the first entry is
    /// read by the penalty projector.
    pub fn data_vector(&self, nt: usize, dt: f64) -> Vec<f64> {
        let mut g = vec![0.0; nt];
        g[0] = self.x0;
        if nt > 1 {
            g[1] = self.x0 + dt * self.v0.unwrap_or(0.0);
        }
        g
    }
}

#[derive(Clone, Debug)]
pub struct AffineOperator {
    base: SbpOperator,
    data: InitialData,
    sigma0: f64,
    dtilde: DenseMatrix,
    shift: Vec<f64>,
}

pub fn build_affine(op: &SbpOperator, data: InitialData) -> AffineOperator {
    build_affine_with_sigma(op, data, SIGMA0)
}

pub(crate) fn build_affine_with_sigma(
    op: &SbpOperator,
    data: InitialData,
    sigma0: f64,
) -> AffineOperator {
    let n = op.nt();
    let h00 = op.h_diag()[0];
    let mut dtilde = op.d().clone();
    dtilde[(0, 0)] -= sigma0 / h00;
    let g = data.data_vector(n, op.grid().dt());
    let mut shift = vec![0.0; n];
    shift[0] = sigma0 * g[0] / h00;
    AffineOperator {
        base: op.clone(),
        data,
        sigma0,
        dtilde,
        shift,
    }
}

impl AffineOperator {
    pub fn base(&self) -> &SbpOperator {
        &self.base
    }

    pub fn data(&self) -> InitialData {
        self.data
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    pub fn nt(&self) -> usize {
        self.base.nt()
    }

    /// `D̃ = D − σ₀H⁻¹E₀`, the path block of `D̄`.
    pub fn dtilde(&self) -> &DenseMatrix {
        &self.dtilde
    }

    /// `b = σ₀H⁻¹E₀g`.
    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    /// The `(nt+1)×(nt+1)` operator with the affine coordinate last.
    pub fn dbar(&self) -> DenseMatrix {
        let n = self.nt();
        let mut m = DenseMatrix::zeros(n + 1, n + 1);
        m.add_block(0, 0, &self.dtilde, 1.0);
        for (i, &b) in self.shift.iter().enumerate() {
            m[(i, n)] = b;
        }
        m[(n, n)] = 1.0;
        m
    }

    /// `H` padded with a zero row and column.
    pub fn hbar(&self) -> DenseMatrix {
        let n = self.nt();
        let mut diag = self.base.h_diag().to_vec();
        diag.push(0.0);
        debug_assert_eq!(diag.len(), n + 1);
        DenseMatrix::from_diagonal(&diag)
    }

    /// `x̄ = (x, 1)`.
    pub fn lift(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.nt() {
            return Err(Error::LengthMismatch {
                expected: self.nt(),
                actual: x.len(),
            });
        }
        let mut v = x.to_vec();
        v.push(1.0);
        Ok(v)
    }

    /// `D̃x + b`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = self.dtilde.matvec(x)?;
        for (yi, bi) in y.iter_mut().zip(&self.shift) {
            *yi += bi;
        }
        Ok(y)
    }

    /// `D̄ᵀH̄D̄` restricted to the path coordinates, i.e. `D̃ᵀHD̃`.
    pub fn path_gram(&self) -> DenseMatrix {
        self.dtilde
            .weighted_gram(self.base.h_diag())
            .expect("diagonal length matches operator")
    }
}

pub fn affine_apply(aop: &AffineOperator, x: &[f64]) -> Result<Vec<f64>> {
    aop.apply(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{self, eigenvalues, Lu};
    use crate::sbp::{build_sbp, Grid, Order};

    fn aop(order: Order, nt: usize, x0: f64) -> AffineOperator {
        let op = build_sbp(Grid::unit(nt).unwrap(), order).unwrap();
        build_affine(&op, InitialData::second_order(x0, 0.3).unwrap())
    }

    #[test]
    fn corner_entries_nt4() {
        let a = aop(Order::Sbp21, 4, 1.0);
        let dbar = a.dbar();
        assert!((dbar[(0, 0)] - 3.0).abs() < 1e-12);
        assert!((dbar[(0, 4)] + 6.0).abs() < 1e-12);
        assert_eq!(dbar.row(4), &[0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(dbar.row(1), &[-1.5, 0.0, 1.5, 0.0, 0.0]);
        let hbar = a.hbar();
        assert_eq!(hbar[(4, 4)], 0.0);
        assert_eq!(hbar[(0, 0)], 1.0 / 6.0);
    }

    #[test]
    fn constant_path_compatible_with_data() {
        for order in Order::ALL {
            let a = aop(order, 16, 0.7);
            let xbar = a.lift(&[0.7; 16]).unwrap();
            let y = a.dbar().matvec(&xbar).unwrap();
            assert!(y[..16].iter().all(|v| v.abs() < 1e-12));
            assert_eq!(y[16], 1.0);
            assert!(linalg::norm_inf(&a.apply(&[0.7; 16]).unwrap()) < 1e-12);
        }
    }

    #[test]
    fn linear_path_has_constant_slope() {
        let op = build_sbp(Grid::unit(10).unwrap(), Order::Sbp21).unwrap();
        let a = build_affine(&op, InitialData::second_order(1.0, 0.3).unwrap());
        let x: Vec<f64> = op.grid().nodes().iter().map(|t| 1.0 + 0.3 * t).collect();
        let y = a.apply(&x).unwrap();
        assert!(y.iter().all(|v| (v - 0.3).abs() < 1e-12));
    }

    #[test]
    fn zero_path_leaves_shift() {
        let a = aop(Order::Sbp21, 8, 1.0);
        let dt = a.base().grid().dt();
        let y = a.apply(&[0.0; 8]).unwrap();
        assert!((y[0] + 2.0 / dt).abs() < 1e-12);
        assert!(y[1..].iter().all(|&v| v == 0.0));
        assert!(a.apply(&[0.0; 3]).is_err());
    }

    #[test]
    fn dbar_spectrum_has_no_zero_modes() {
        let a = aop(Order::Sbp21, 32, 1.0);
        let spectrum = eigenvalues(&a.dbar()).unwrap();
        assert_eq!(spectrum.len(), 33);
        assert_eq!(spectrum.count_below(1e-6), 0);
        assert!(spectrum.count_near(1.0, 0.0, 1e-8) >= 1);
    }

    #[test]
    fn dbar_nonsingular_across_sizes() {
        for order in Order::ALL {
            for nt in [8, 16, 64, 256] {
                let lu = Lu::factor(&aop(order, nt, 1.0).dbar()).unwrap();
                assert!(lu.pivot_ratio() > 1e-10, "{order} nt={nt}");
            }
        }
    }

    #[test]
    fn penalty_hook_changes_corner() {
        let op = build_sbp(Grid::unit(8).unwrap(), Order::Sbp21).unwrap();
        let data = InitialData::position(2.0).unwrap();
        let a = build_affine_with_sigma(&op, data, -0.5);
        let h00 = op.h_diag()[0];
        assert!((a.dtilde()[(0, 0)] - (op.d()[(0, 0)] + 0.5 / h00)).abs() < 1e-12);
        assert!((a.shift()[0] + 0.5 * 2.0 / h00).abs() < 1e-12);
        assert_eq!(a.sigma0(), -0.5);
    }

    #[test]
    fn path_gram_is_positive_semidefinite() {
        for nt in [16, 32, 64] {
            let a = aop(Order::Sbp21, nt, 1.0);
            let spectrum = eigenvalues(&a.path_gram()).unwrap();
            assert!(spectrum.eigenvalues.iter().all(|e| e.re >= -1e-10), "nt={nt}");
        }
    }
}
