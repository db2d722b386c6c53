//! Circulant update: ridge-regularized least squares over the generator.
//!
//! For fixed `M` the map `c -> M Circ(c) X` is linear, so the subproblem
//! `min_c ||Y - M Circ(c) X||_F^2 + mu n ||c||^2` is a strictly convex
//! quadratic in `n` unknowns.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::problem::{Problem, DIRECT_LIMIT};
use crate::circulant::Generator;
use crate::error::{Error, Result};
use crate::fft::FftPlan;
use crate::matrix::{self, DenseMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CStepSolver {
    /// Direct solve when `n <= 512` and the data Gram matrix is available,
    /// conjugate gradient otherwise.
    #[default]
    Auto,
    ConjugateGradient,
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CStepOptions {
    pub solver: CStepSolver,
    /// Relative residual target for conjugate gradient.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CStepOptions {
    fn default() -> Self {
        Self {
            solver: CStepSolver::Auto,
            tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

/// Minimizes `||A X - M Circ(c) X||_F^2 + mu ||Circ(c)||_F^2` over `c`.
pub fn c_step(
    a: &DenseMatrix,
    x: &DenseMatrix,
    m: &DenseMatrix,
    mu: f64,
    opts: &CStepOptions,
) -> Result<Generator> {
    let problem = Problem::new(a, x)?;
    solve(&problem, m, mu, opts, None)
}

pub(crate) fn solve(
    problem: &Problem<'_>,
    m: &DenseMatrix,
    mu: f64,
    opts: &CStepOptions,
    warm: Option<&Generator>,
) -> Result<Generator> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::param("mu", "must be positive and finite"));
    }
    problem.check_m(m)?;
    let n = problem.n();
    let direct_ok = n <= DIRECT_LIMIT && problem.gram().is_some();
    let use_direct = match opts.solver {
        CStepSolver::Auto => direct_ok,
        CStepSolver::Direct => {
            if !direct_ok {
                return Err(Error::param(
                    "solver",
                    "direct C-step is limited to n <= 512",
                ));
            }
            true
        }
        CStepSolver::ConjugateGradient => false,
    };
    if use_direct {
        if let Some(c) = solve_direct(problem, m, mu)? {
            return Ok(c);
        }
    }
    solve_cg(problem, m, mu, opts, warm)
}

/// 2-D DFT of a real square matrix (rows, then columns).
fn fft2(plan: &FftPlan, a: &DenseMatrix) -> Vec<Complex64> {
    let n = a.rows();
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        let row = plan.forward_real(a.row(i));
        out[i * n..(i + 1) * n].copy_from_slice(&row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..n {
        for i in 0..n {
            col[i] = out[i * n + j];
        }
        plan.forward(&mut col);
        for i in 0..n {
            out[i * n + j] = col[i];
        }
    }
    out
}

fn ifft2_real(plan: &FftPlan, mut data: Vec<Complex64>, n: usize) -> DenseMatrix {
    let mut col = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..n {
        for i in 0..n {
            col[i] = data[i * n + j];
        }
        plan.inverse(&mut col);
        for i in 0..n {
            data[i * n + j] = col[i];
        }
    }
    let mut out = DenseMatrix::zeros(n, n);
    for i in 0..n {
        plan.inverse(&mut data[i * n..(i + 1) * n]);
        for j in 0..n {
            out.set(i, j, data[i * n + j].re);
        }
    }
    out
}

/// Forms the normal matrix through the data Gram matrix and factors it.
///
/// With `W = M^T M` and `K = X X^T`, the Gram entries of the basis images
/// `M P_r X` are the 2-D circular cross-correlation
/// `N[r][s] = sum_{a,b} W[a][b] K[a+r][b+s]`, and the right-hand side is
/// `rhs[r] = sum_a (M^T A K)[a][a+r]`.
///
/// Returns `None` if the Cholesky factorization fails.
fn solve_direct(problem: &Problem<'_>, m: &DenseMatrix, mu: f64) -> Result<Option<Generator>> {
    let gram = problem.gram().expect("direct path requires the data Gram matrix");
    let n = problem.n();
    let plan = &problem.plan;

    let w = m.transpose_matmul(m)?;
    let w_hat = fft2(plan, &w);
    let k_hat = fft2(plan, &gram.k);
    let prod: Vec<Complex64> = w_hat
        .iter()
        .zip(&k_hat)
        .map(|(w, k)| w.conj() * k)
        .collect();
    let normal = ifft2_real(plan, prod, n);

    let h = m.transpose_matmul(&gram.ak)?;
    let rhs: Vec<f64> = (0..n)
        .map(|r| (0..n).map(|a| h.get(a, (a + r) % n)).sum())
        .collect();
    if rhs.iter().all(|&v| v == 0.0) {
        return Ok(Some(Generator::zeros(n)));
    }

    let ridge = mu * n as f64;
    let sys = DMatrix::from_fn(n, n, |r, s| {
        let v = 0.5 * (normal.get(r, s) + normal.get(s, r));
        if r == s {
            v + ridge
        } else {
            v
        }
    });
    let Some(chol) = sys.cholesky() else {
        return Ok(None);
    };
    let sol = chol.solve(&DVector::from_vec(rhs));
    if sol.iter().any(|v| !v.is_finite()) {
        return Ok(None);
    }
    Generator::new(sol.iter().copied().collect()).map(Some)
}

/// Matrix-free normal operator `c -> L^T L c + mu n c` with `L c = M Circ(c) X`.
struct NormalOperator<'p, 'a> {
    problem: &'p Problem<'a>,
    m: &'p DenseMatrix,
    ridge: f64,
}

impl NormalOperator<'_, '_> {
    /// `M Circ(c) X`.
    fn forward(&self, c: &[f64]) -> Result<DenseMatrix> {
        let plan = &self.problem.plan;
        let n = self.problem.n();
        let p = self.problem.p();
        let c_hat = plan.forward_real(c);
        let mut b = DenseMatrix::zeros(n, p);
        for (t, x_hat) in self.problem.x_spectra().iter().enumerate() {
            let prod = c_hat.iter().zip(x_hat).map(|(c, x)| c.conj() * x).collect();
            b.set_column(t, &plan.inverse_real(prod));
        }
        self.m.matmul(&b)
    }

    /// Adjoint of `forward`: `g -> sum_t corr(M^T g_t, x_t)`.
    fn adjoint(&self, g: &DenseMatrix) -> Result<Vec<f64>> {
        let plan = &self.problem.plan;
        let n = self.problem.n();
        let u = self.m.transpose_matmul(g)?;
        let mut acc = vec![Complex64::new(0.0, 0.0); n];
        for (t, x_hat) in self.problem.x_spectra().iter().enumerate() {
            let u_hat = plan.forward_real(&u.column(t));
            for ((a, uh), xh) in acc.iter_mut().zip(&u_hat).zip(x_hat) {
                *a += uh.conj() * xh;
            }
        }
        Ok(plan.inverse_real(acc))
    }

    fn apply(&self, c: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.adjoint(&self.forward(c)?)?;
        for (o, v) in out.iter_mut().zip(c) {
            *o += self.ridge * v;
        }
        Ok(out)
    }
}

fn solve_cg(
    problem: &Problem<'_>,
    m: &DenseMatrix,
    mu: f64,
    opts: &CStepOptions,
    warm: Option<&Generator>,
) -> Result<Generator> {
    let n = problem.n();
    let op = NormalOperator {
        problem,
        m,
        ridge: mu * n as f64,
    };
    let b = op.adjoint(&problem.y)?;
    let b_norm = matrix::norm(&b);
    if b_norm == 0.0 {
        return Ok(Generator::zeros(n));
    }
    let mut x = match warm {
        Some(g) if g.len() == n => g.as_slice().to_vec(),
        _ => vec![0.0; n],
    };
    let ax = op.apply(&x)?;
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut dir = r.clone();
    let mut rs = matrix::dot(&r, &r);
    let target = opts.tol * b_norm;
    let mut iterations = 0;
    while libm::sqrt(rs) > target {
        if iterations >= opts.max_iter {
            return Err(Error::NoConvergence {
                solver: "c_step",
                iterations,
                residual: libm::sqrt(rs) / b_norm,
                trace: Vec::new(),
            });
        }
        let ad = op.apply(&dir)?;
        let alpha = rs / matrix::dot(&dir, &ad);
        for k in 0..n {
            x[k] += alpha * dir[k];
            r[k] -= alpha * ad[k];
        }
        let rs_new = matrix::dot(&r, &r);
        let beta = rs_new / rs;
        for k in 0..n {
            dir[k] = r[k] + beta * dir[k];
        }
        rs = rs_new;
        iterations += 1;
    }
    Generator::new(x).map_err(|_| Error::Numerical("c_step produced non-finite values"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn setup(seed: u64, m: usize, n: usize, p: usize) -> (DenseMatrix, DenseMatrix, DenseMatrix) {
        let mut r = rng::seeded(seed);
        (
            rng::gaussian_matrix(&mut r, m, n),
            rng::gaussian_matrix(&mut r, n, p),
            rng::gaussian_matrix(&mut r, m, n),
        )
    }

    #[test]
    fn zero_m_gives_zero_generator() {
        let (a, x, _) = setup(1, 3, 8, 10);
        let zero = DenseMatrix::zeros(3, 8);
        for solver in [CStepSolver::Direct, CStepSolver::ConjugateGradient] {
            let opts = CStepOptions {
                solver,
                ..Default::default()
            };
            let c = c_step(&a, &x, &zero, 0.5, &opts).unwrap();
            assert!(c.as_slice().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn direct_and_cg_agree() {
        for (seed, n, p) in [(2u64, 8usize, 12usize), (3, 17, 9), (4, 32, 40)] {
            let (a, x, m) = setup(seed, 4, n, p);
            let direct = c_step(
                &a,
                &x,
                &m,
                0.3,
                &CStepOptions {
                    solver: CStepSolver::Direct,
                    ..Default::default()
                },
            )
            .unwrap();
            let cg = c_step(
                &a,
                &x,
                &m,
                0.3,
                &CStepOptions {
                    solver: CStepSolver::ConjugateGradient,
                    ..Default::default()
                },
            )
            .unwrap();
            let scale = direct.norm().max(1e-300);
            for (d, c) in direct.as_slice().iter().zip(cg.as_slice()) {
                assert!((d - c).abs() <= 1e-8 * scale, "n={n}: {d} vs {c}");
            }
        }
    }

    #[test]
    fn rejects_nonpositive_mu() {
        let (a, x, m) = setup(5, 2, 4, 4);
        assert!(c_step(&a, &x, &m, 0.0, &CStepOptions::default()).is_err());
    }

    #[test]
    fn cg_reports_non_convergence() {
        let (a, x, m) = setup(6, 3, 16, 20);
        let opts = CStepOptions {
            solver: CStepSolver::ConjugateGradient,
            tol: 1e-14,
            max_iter: 1,
        };
        match c_step(&a, &x, &m, 1e-3, &opts) {
            Err(Error::NoConvergence { solver, .. }) => assert_eq!(solver, "c_step"),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
