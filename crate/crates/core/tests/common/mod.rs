#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use varsbp::action::{ActionProblem, Family, SolverState};
use varsbp::problems::canonical_problem;
use varsbp::sbp::{Grid, Order};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn problem(family: Family, order: Order, nt: usize) -> ActionProblem {
    canonical_problem(family, order, Grid::unit(nt).unwrap()).unwrap()
}

pub fn random_state(p: &ActionProblem, rng: &mut ChaCha8Rng) -> SolverState {
    let layout = p.layout();
    let z = (0..layout.len()).map(|_| rng.gen_range(-1.5..1.5)).collect();
    SolverState::new(layout, z).unwrap()
}

fn shifted(s: &SolverState, j: usize, h: f64) -> SolverState {
    let mut t = s.clone();
    t.unknowns_mut()[j] += h;
    t
}

/// Worst central-difference deviation of the gradient, relative to its size.
pub fn gradient_fd_error(p: &ActionProblem, s: &SolverState) -> f64 {
    let h = 1e-6;
    let g = p.action_gradient(s).unwrap();
    let scale = g.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    (0..g.len())
        .map(|j| {
            let fp = p.action_value(&shifted(s, j, h)).unwrap();
            let fm = p.action_value(&shifted(s, j, -h)).unwrap();
            ((fp - fm) / (2.0 * h) - g[j]).abs() / scale
        })
        .fold(0.0, f64::max)
}

/// Worst central-difference deviation of the Hessian, relative to its size.
pub fn hessian_fd_error(p: &ActionProblem, s: &SolverState) -> f64 {
    let h = 1e-6;
    let a = p.action_hessian(s).unwrap();
    let scale = a.max_abs().max(1.0);
    let n = a.rows();
    let mut worst = 0.0f64;
    for j in 0..n {
        let gp = p.action_gradient(&shifted(s, j, h)).unwrap();
        let gm = p.action_gradient(&shifted(s, j, -h)).unwrap();
        for i in 0..n {
            worst = worst.max(((gp[i] - gm[i]) / (2.0 * h) - a[(i, j)]).abs() / scale);
        }
    }
    worst
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

pub fn verdict(id: u32, pass: bool, detail: &str) {
    println!("criterion {id:>2}: {} {detail}", if pass { "PASS" } else { "FAIL" });
}
