//! Data-driven partial circulant approximation.
//!
//! Approximates the action of `A` on the columns of a data matrix `X` by
//! `M C` with `C` circulant and `M` column-sparse, alternating between an
//! exact ridge solve for the circulant generator and a group-lasso solve
//! for `M`. The surviving columns of `M` give the factorization `M = P S`.

mod c_step;
mod factors;
mod m_step;
mod problem;

use alloc::vec::Vec;

use nalgebra::SVD;

pub use c_step::{c_step, CStepOptions, CStepSolver};
pub use factors::{
    active_columns, extract_factors, factored_flops, fast_apply, CompressedFactors,
    FactoredOperator,
};
pub use m_step::{group_lasso_kkt_residual, m_step, MStepOptions};
pub use problem::{DIRECT_LIMIT, GRAM_LIMIT};

use crate::circulant::{Circulant, Generator};
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use problem::Problem;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnConfig {
    /// Weight of the column-sparsity penalty on `M`.
    pub lambda: f64,
    /// Ridge weight on the circulant.
    pub mu: f64,
    /// Relative decrease below which the outer loop stops.
    pub epsilon: f64,
    pub max_outer: usize,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    pub c_solver: CStepSolver,
    pub fista_tol: f64,
    pub fista_kkt_tol: f64,
    pub fista_max_iter: usize,
    /// Columns at or below this fraction of the largest column norm count as zero.
    pub column_zero_threshold: f64,
    pub seed: u64,
}

impl LearnConfig {
    pub fn new(lambda: f64) -> Self {
        Self {
            lambda,
            mu: 0.1,
            epsilon: 1e-6,
            max_outer: 200,
            cg_tol: 1e-10,
            cg_max_iter: 10_000,
            c_solver: CStepSolver::Auto,
            fista_tol: 1e-9,
            fista_kkt_tol: 1e-8,
            fista_max_iter: 100_000,
            column_zero_threshold: 1e-6,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda", self.lambda),
            ("mu", self.mu),
            ("epsilon", self.epsilon),
            ("cg_tol", self.cg_tol),
            ("fista_tol", self.fista_tol),
            ("fista_kkt_tol", self.fista_kkt_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, "must be positive and finite"));
            }
        }
        if !(self.column_zero_threshold >= 0.0 && self.column_zero_threshold.is_finite()) {
            return Err(Error::param(
                "column_zero_threshold",
                "must be finite and non-negative",
            ));
        }
        for (name, v) in [
            ("max_outer", self.max_outer),
            ("cg_max_iter", self.cg_max_iter),
            ("fista_max_iter", self.fista_max_iter),
        ] {
            if v == 0 {
                return Err(Error::param(name, "must be at least 1"));
            }
        }
        Ok(())
    }

    pub fn c_step_options(&self) -> CStepOptions {
        CStepOptions {
            solver: self.c_solver,
            tol: self.cg_tol,
            max_iter: self.cg_max_iter,
        }
    }

    pub fn m_step_options(&self) -> MStepOptions {
        MStepOptions {
            tol: self.fista_tol,
            kkt_tol: self.fista_kkt_tol,
            max_iter: self.fista_max_iter,
            seed: self.seed,
        }
    }
}

/// State after one outer iteration, handed to observers.
#[derive(Debug)]
pub struct IterationSnapshot<'a> {
    pub iteration: usize,
    pub objective: f64,
    /// `||A X - M C X||_F^2`.
    pub residual: f64,
    /// Number of nonzero columns of `M` (the current `m'`).
    pub active_columns: usize,
    /// The `M` the circulant update was solved against.
    pub m_prev: &'a DenseMatrix,
    pub generator: &'a Generator,
    pub m: &'a DenseMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnedFactors {
    pub m: DenseMatrix,
    pub generator: Generator,
    /// Objective per outer iteration; entry 0 is the initial iterate.
    pub trace: Vec<f64>,
    pub residuals: Vec<f64>,
    pub active_columns: Vec<usize>,
    /// Outer iterations executed.
    pub iterations: usize,
    /// Whether the relative-decrease test stopped the loop before `max_outer`.
    pub converged: bool,
}

impl LearnedFactors {
    pub fn compress(&self, threshold: f64) -> Result<CompressedFactors> {
        extract_factors(&self.m, threshold)
    }
}

fn check_data(a: &DenseMatrix, x: &DenseMatrix) -> Result<()> {
    if a.cols() != x.rows() {
        return Err(Error::DimensionMismatch {
            context: "columns of A vs rows of X",
            expected: a.cols(),
            found: x.rows(),
        });
    }
    Ok(())
}

/// `||A X - M C X||_F^2 + mu ||C||_F^2 + lambda sum_j ||M[:, j]||_2`,
/// with `||C||_F^2 = n ||c||^2`.
pub fn objective(
    a: &DenseMatrix,
    x: &DenseMatrix,
    m: &DenseMatrix,
    gen: &Generator,
    lambda: f64,
    mu: f64,
) -> Result<f64> {
    check_data(a, x)?;
    Ok(objective_parts(a, x, &a.matmul(x)?, m, gen, lambda, mu)?.0)
}

/// Objective and residual term, given `Y = A X`.
fn objective_parts(
    a: &DenseMatrix,
    x: &DenseMatrix,
    y: &DenseMatrix,
    m: &DenseMatrix,
    gen: &Generator,
    lambda: f64,
    mu: f64,
) -> Result<(f64, f64)> {
    if m.shape() != a.shape() {
        return Err(Error::DimensionMismatch {
            context: "M must have the shape of A",
            expected: a.rows() * a.cols(),
            found: m.rows() * m.cols(),
        });
    }
    if gen.len() != a.cols() {
        return Err(Error::DimensionMismatch {
            context: "generator length",
            expected: a.cols(),
            found: gen.len(),
        });
    }
    let b = Circulant::new(gen).apply_columns(x)?;
    let residual = y.sub(&m.matmul(&b)?)?.frobenius_norm_sq();
    let gn = gen.norm();
    let ridge = mu * gen.len() as f64 * gn * gn;
    Ok((residual + ridge + lambda * m.group_norm(), residual))
}

/// `[U Sigma | 0]` from the thin SVD of `Y`, padded to `n` columns.
fn initial_m(y: &DenseMatrix, n: usize) -> DenseMatrix {
    let svd = SVD::new(y.to_nalgebra(), true, false);
    let u = svd.u.expect("left singular vectors requested");
    let k = svd.singular_values.len();
    let mut m0 = DenseMatrix::zeros(y.rows(), n);
    for j in 0..k {
        let s = svd.singular_values[j];
        for i in 0..y.rows() {
            m0.set(i, j, u[(i, j)] * s);
        }
    }
    m0
}

/// Replaces an inner solver's trace with the outer objective trace so far.
fn with_outer_trace(e: Error, outer: &[f64]) -> Error {
    match e {
        Error::NoConvergence {
            solver,
            iterations,
            residual,
            ..
        } => Error::NoConvergence {
            solver,
            iterations,
            residual,
            trace: outer.to_vec(),
        },
        other => other,
    }
}

/// Runs the alternating minimization.
///
/// An inner solver that fails to converge aborts the run with
/// [`Error::NoConvergence`] carrying the outer objective trace.
pub fn learn(a: &DenseMatrix, x: &DenseMatrix, cfg: &LearnConfig) -> Result<LearnedFactors> {
    learn_with_observer(a, x, cfg, |_| {})
}

/// [`learn`], reporting every outer iteration (including the initial
/// iterate as iteration 0) to `observer`.
pub fn learn_with_observer(
    a: &DenseMatrix,
    x: &DenseMatrix,
    cfg: &LearnConfig,
    mut observer: impl FnMut(&IterationSnapshot<'_>),
) -> Result<LearnedFactors> {
    cfg.validate()?;
    check_data(a, x)?;
    let (m_rows, n) = a.shape();
    if m_rows > n {
        return Err(Error::DimensionMismatch {
            context: "A must not have more rows than columns",
            expected: n,
            found: m_rows,
        });
    }
    let problem = Problem::new(a, x)?;
    let c_opts = cfg.c_step_options();
    let m_opts = cfg.m_step_options();

    let mut m = initial_m(&problem.y, n);
    let mut gen = Generator::zeros(n);
    // Objective of the initial iterate, with c = 0 the residual is ||AX||^2.
    let residual0 = problem.y.frobenius_norm_sq();
    let obj0 = residual0 + cfg.lambda * m.group_norm();
    let mut trace = alloc::vec![obj0];
    let mut residuals = alloc::vec![residual0];
    let mut actives = alloc::vec![active_columns(&m, cfg.column_zero_threshold)];
    observer(&IterationSnapshot {
        iteration: 0,
        objective: obj0,
        residual: residual0,
        active_columns: actives[0],
        m_prev: &m,
        generator: &gen,
        m: &m,
    });

    let mut iterations = 0;
    let mut converged = false;
    for t in 1..=cfg.max_outer {
        gen = c_step::solve(&problem, &m, cfg.mu, &c_opts, Some(&gen))
            .map_err(|e| with_outer_trace(e, &trace))?;
        let m_next = m_step::solve(&problem, &gen, cfg.lambda, &m, &m_opts)
            .map_err(|e| with_outer_trace(e, &trace))?;
        let (obj, residual) =
            objective_parts(a, x, &problem.y, &m_next, &gen, cfg.lambda, cfg.mu)?;
        if !obj.is_finite() {
            return Err(Error::Numerical("objective is not finite"));
        }
        let active = active_columns(&m_next, cfg.column_zero_threshold);
        observer(&IterationSnapshot {
            iteration: t,
            objective: obj,
            residual,
            active_columns: active,
            m_prev: &m,
            generator: &gen,
            m: &m_next,
        });
        m = m_next;
        let prev = *trace.last().expect("trace starts non-empty");
        trace.push(obj);
        residuals.push(residual);
        actives.push(active);
        iterations = t;
        if prev - obj <= cfg.epsilon * prev {
            converged = true;
            break;
        }
    }

    Ok(LearnedFactors {
        m,
        generator: gen,
        trace,
        residuals,
        active_columns: actives,
        iterations,
        converged,
    })
}
