//! Classical trajectories from discretized action functionals with doubled
//! degrees of freedom and regularized summation-by-parts operators.

pub mod action;
pub mod affine;
pub mod convergence;
pub mod error;
pub mod linalg;
pub mod problems;
pub mod sbp;
pub mod solver;

pub use error::{Error, Result};
