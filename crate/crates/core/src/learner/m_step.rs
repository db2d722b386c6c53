//! Post-processing update: column group lasso solved by accelerated
//! proximal gradient.
//!
//! With `B = Circ(c) X` the subproblem is
//! `min_M ||Y - M B||_F^2 + lambda sum_j ||M[:, j]||_2`.
//! The smooth part has gradient `2 (M B - Y) B^T` and Lipschitz constant
//! `2 sigma_max(B)^2`; the proximal map shrinks each column towards zero.

use alloc::vec::Vec;

use super::problem::Problem;
use crate::circulant::{Circulant, Generator};
use crate::error::{Error, Result};
use crate::matrix::{self, DenseMatrix};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MStepOptions {
    /// Relative objective change between convergence checks.
    pub tol: f64,
    /// Absolute tolerance on the group-lasso optimality residual.
    pub kkt_tol: f64,
    pub max_iter: usize,
    /// Seed for the power-iteration start vector.
    pub seed: u64,
}

impl Default for MStepOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            kkt_tol: 1e-8,
            max_iter: 100_000,
            seed: 0,
        }
    }
}

const POWER_STEPS: usize = 100;
const POWER_TOL: f64 = 1e-8;
const STEP_MARGIN: f64 = 1.05;
const CHECK_EVERY: usize = 10;

/// Smooth part `||Y - M B||_F^2` in one of two equivalent representations.
enum Smooth {
    /// Through `G = B B^T` and `H = Y B^T`; cost per gradient `O(m n^2)`.
    Gram {
        g: DenseMatrix,
        h: DenseMatrix,
        yy: f64,
    },
    /// Through `B` itself; cost per gradient `O(m n p)`.
    Explicit { b: DenseMatrix, y: DenseMatrix },
}

impl Smooth {
    fn build(problem: &Problem<'_>, gen: &Generator) -> Result<Self> {
        let circ = Circulant::with_plan(gen, &problem.plan);
        let use_gram = problem.gram().is_some() && problem.n() <= problem.p();
        if let (true, Some(gram)) = (use_gram, problem.gram()) {
            let n = problem.n();
            // C K, one column at a time (K is symmetric).
            let mut ck = DenseMatrix::zeros(n, n);
            for j in 0..n {
                ck.set_column(j, &circ.apply(gram.k.row(j))?);
            }
            // G = C K C^T has column j equal to C (row j of C K).
            let mut g = DenseMatrix::zeros(n, n);
            for j in 0..n {
                g.set_column(j, &circ.apply(ck.row(j))?);
            }
            let mut h = DenseMatrix::zeros(problem.m(), n);
            for i in 0..problem.m() {
                h.row_mut(i).copy_from_slice(&circ.apply(gram.ak.row(i))?);
            }
            Ok(Smooth::Gram {
                g,
                h,
                yy: problem.y.frobenius_norm_sq(),
            })
        } else {
            Ok(Smooth::Explicit {
                b: circ.apply_columns(problem.x)?,
                y: problem.y.clone(),
            })
        }
    }

    /// Value of the smooth part and its gradient at `m`.
    fn value_grad(&self, m: &DenseMatrix) -> Result<(f64, DenseMatrix)> {
        match self {
            Smooth::Gram { g, h, yy } => {
                let mg = m.matmul(g)?;
                let quad = matrix::dot(mg.as_slice(), m.as_slice());
                let lin = matrix::dot(h.as_slice(), m.as_slice());
                let value = (yy - 2.0 * lin + quad).max(0.0);
                let mut grad = mg.sub(h)?;
                grad.as_mut_slice().iter_mut().for_each(|v| *v *= 2.0);
                Ok((value, grad))
            }
            Smooth::Explicit { b, y } => {
                let r = m.matmul(b)?.sub(y)?;
                let value = r.frobenius_norm_sq();
                let grad = r.matmul_transpose(b)?.scaled(2.0);
                Ok((value, grad))
            }
        }
    }

    fn grad(&self, m: &DenseMatrix) -> Result<DenseMatrix> {
        Ok(self.value_grad(m)?.1)
    }

    /// Applies `B B^T` to `v`.
    fn bbt(&self, v: &[f64]) -> Result<Vec<f64>> {
        match self {
            Smooth::Gram { g, .. } => g.matvec(v),
            Smooth::Explicit { b, .. } => {
                let bt_v = b.transpose().matvec(v)?;
                b.matvec(&bt_v)
            }
        }
    }

    /// Largest column norm of the gradient at `M = 0`.
    fn zero_gradient_scale(&self) -> Result<f64> {
        let h = match self {
            Smooth::Gram { h, .. } => h.clone(),
            Smooth::Explicit { b, y } => y.matmul_transpose(b)?,
        };
        Ok(2.0 * h.column_norms().into_iter().fold(0.0, f64::max))
    }
}

/// Estimates `sigma_max(B)^2` by power iteration on `B B^T`.
fn spectral_norm_sq(smooth: &Smooth, n: usize, seed: u64) -> Result<f64> {
    let mut r = rng::seeded(seed);
    let mut v = rng::gaussian_vec(&mut r, n);
    let norm = matrix::norm(&v);
    v.iter_mut().for_each(|x| *x /= norm);
    let mut estimate = 0.0;
    for _ in 0..POWER_STEPS {
        let w = smooth.bbt(&v)?;
        let next = matrix::dot(&v, &w);
        let w_norm = matrix::norm(&w);
        if w_norm == 0.0 {
            return Ok(0.0);
        }
        v = w.into_iter().map(|x| x / w_norm).collect();
        let converged = (next - estimate).abs() <= POWER_TOL * next.abs();
        estimate = next;
        if converged {
            break;
        }
    }
    Ok(estimate)
}

/// Column-wise block soft-thresholding.
fn shrink_columns(m: &mut DenseMatrix, threshold: f64) {
    let norms = m.column_norms();
    let factors: Vec<f64> = norms
        .iter()
        .map(|&nrm| {
            if nrm <= threshold {
                0.0
            } else {
                1.0 - threshold / nrm
            }
        })
        .collect();
    for i in 0..m.rows() {
        for (v, f) in m.row_mut(i).iter_mut().zip(&factors) {
            *v *= f;
        }
    }
}

/// Largest violation of the group-lasso optimality conditions.
///
/// A zero column must satisfy `||grad_j|| <= lambda`; a nonzero column must
/// satisfy `grad_j = -lambda M_j / ||M_j||`.
pub fn group_lasso_kkt_residual(grad: &DenseMatrix, m: &DenseMatrix, lambda: f64) -> f64 {
    let norms = m.column_norms();
    let mut worst: f64 = 0.0;
    for (j, &nrm) in norms.iter().enumerate() {
        let violation = if nrm == 0.0 {
            let g: f64 = (0..grad.rows()).map(|i| grad.get(i, j) * grad.get(i, j)).sum();
            (libm::sqrt(g) - lambda).max(0.0)
        } else {
            let d: f64 = (0..grad.rows())
                .map(|i| {
                    let v = grad.get(i, j) + lambda * m.get(i, j) / nrm;
                    v * v
                })
                .sum();
            libm::sqrt(d)
        };
        worst = worst.max(violation);
    }
    worst
}

/// Solves the column group lasso for `B = Circ(gen) X`, starting at `warm`.
pub fn m_step(
    a: &DenseMatrix,
    x: &DenseMatrix,
    gen: &Generator,
    lambda: f64,
    warm: &DenseMatrix,
    opts: &MStepOptions,
) -> Result<DenseMatrix> {
    let problem = Problem::new(a, x)?;
    solve(&problem, gen, lambda, warm, opts)
}

pub(crate) fn solve(
    problem: &Problem<'_>,
    gen: &Generator,
    lambda: f64,
    warm: &DenseMatrix,
    opts: &MStepOptions,
) -> Result<DenseMatrix> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::param("lambda", "must be positive and finite"));
    }
    problem.check_m(warm)?;
    problem.check_generator(gen.len())?;

    let smooth = Smooth::build(problem, gen)?;
    let sigma_sq = spectral_norm_sq(&smooth, problem.n(), opts.seed)?;
    if sigma_sq <= 0.0 {
        // B = 0: only the penalty remains.
        return Ok(DenseMatrix::zeros(problem.m(), problem.n()));
    }
    let step = 1.0 / (2.0 * STEP_MARGIN * sigma_sq);
    let threshold = lambda * step;
    let kkt_target = opts
        .kkt_tol
        .max(1e-12 * smooth.zero_gradient_scale()?);

    let objective = |m: &DenseMatrix, smooth_value: f64| smooth_value + lambda * m.group_norm();

    let (warm_smooth, warm_grad) = smooth.value_grad(warm)?;
    let warm_obj = objective(warm, warm_smooth);
    let mut trace = alloc::vec![warm_obj];
    if group_lasso_kkt_residual(&warm_grad, warm, lambda) <= kkt_target {
        return Ok(warm.clone());
    }

    let mut x = warm.clone();
    let mut y = warm.clone();
    let mut t = 1.0f64;
    let mut last_obj = warm_obj;
    let mut last_kkt = f64::INFINITY;

    for iter in 1..=opts.max_iter {
        let g = smooth.grad(&y)?;
        let mut z = y.clone();
        for (zv, gv) in z.as_mut_slice().iter_mut().zip(g.as_slice()) {
            *zv -= step * gv;
        }
        shrink_columns(&mut z, threshold);

        // Gradient-based adaptive restart of the momentum.
        let mut restart_dot = 0.0;
        for ((yv, zv), xv) in y.as_slice().iter().zip(z.as_slice()).zip(x.as_slice()) {
            restart_dot += (yv - zv) * (zv - xv);
        }
        if restart_dot > 0.0 {
            t = 1.0;
            y = z.clone();
        } else {
            let t_next = 0.5 * (1.0 + libm::sqrt(1.0 + 4.0 * t * t));
            let beta = (t - 1.0) / t_next;
            y = z.clone();
            for ((yv, zv), xv) in y
                .as_mut_slice()
                .iter_mut()
                .zip(z.as_slice())
                .zip(x.as_slice())
            {
                *yv = zv + beta * (zv - xv);
            }
            t = t_next;
        }
        x = z;

        if iter % CHECK_EVERY == 0 || iter == opts.max_iter {
            let (sv, gx) = smooth.value_grad(&x)?;
            let obj = objective(&x, sv);
            trace.push(obj);
            last_kkt = group_lasso_kkt_residual(&gx, &x, lambda);
            let change = (last_obj - obj).abs();
            let stalled = change <= opts.tol * last_obj.abs().max(f64::MIN_POSITIVE);
            last_obj = obj;
            if stalled && last_kkt <= kkt_target {
                return Ok(if obj <= warm_obj { x } else { warm.clone() });
            }
        }
    }
    Err(Error::NoConvergence {
        solver: "m_step",
        iterations: opts.max_iter,
        residual: last_kkt,
        trace,
    })
}
