//! Optimal partial circulant approximation.
//!
//! For `A` (m x n) the best approximation by a partial circulant matrix has
//! squared Frobenius error `||A||_F^2 - R(A)^2`, where the score
//!
//! ```text
//! R(A) = max_f || sum_i rotate_left(A_i, f_i) ||_2 / sqrt(m)
//! ```
//!
//! is maximized over assignments of pairwise distinct shifts, and the
//! optimal generator for a fixed assignment is the mean of the
//! left-rotated rows.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::circulant::{
    add_rotated_left, partial_to_dense, Generator, PartialCirculantOp, ShiftAssignment,
};
use crate::error::{Error, Result};
use crate::fft::FftPlan;
use crate::matrix::{self, DenseMatrix};
use crate::rng;

/// Default cap on the number of assignments the exact solver may enumerate.
pub const DEFAULT_EXACT_BUDGET: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreResult {
    /// The score `R(A)` (or a lower bound on it for heuristic results).
    pub score: f64,
    pub assignment: ShiftAssignment,
    /// Squared Frobenius approximation error.
    pub error: f64,
    /// True iff produced by exhaustive enumeration.
    pub exact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GreedyConfig {
    pub restarts: usize,
    pub local_search: bool,
    pub seed: u64,
}

impl Default for GreedyConfig {
    fn default() -> Self {
        Self {
            restarts: 8,
            local_search: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMode {
    Exact { budget: u64 },
    Greedy(GreedyConfig),
}

impl SolveMode {
    pub fn exact() -> Self {
        SolveMode::Exact {
            budget: DEFAULT_EXACT_BUDGET,
        }
    }

    pub fn greedy() -> Self {
        SolveMode::Greedy(GreedyConfig::default())
    }
}

fn check_assignment(a: &DenseMatrix, f: &ShiftAssignment) -> Result<()> {
    if f.n() != a.cols() {
        return Err(Error::DimensionMismatch {
            context: "shift assignment n vs matrix columns",
            expected: a.cols(),
            found: f.n(),
        });
    }
    if f.m() != a.rows() {
        return Err(Error::DimensionMismatch {
            context: "shift assignment m vs matrix rows",
            expected: a.rows(),
            found: f.m(),
        });
    }
    Ok(())
}

fn aligned_sum(a: &DenseMatrix, f: &[usize]) -> Vec<f64> {
    let mut acc = vec![0.0; a.cols()];
    for (i, &s) in f.iter().enumerate() {
        add_rotated_left(&mut acc, a.row(i), s);
    }
    acc
}

/// `|| sum_i rotate_left(A_i, f_i) ||_2 / sqrt(m)`.
pub fn rubik_objective(a: &DenseMatrix, f: &ShiftAssignment) -> Result<f64> {
    check_assignment(a, f)?;
    let acc = aligned_sum(a, f.as_slice());
    Ok(matrix::norm(&acc) / libm::sqrt(a.rows() as f64))
}

/// Number of assignments `n! / (n - m)!`, saturating.
pub fn assignment_count(m: usize, n: usize) -> u128 {
    if m > n {
        return 0;
    }
    let mut total: u128 = 1;
    for k in 0..m {
        total = total.saturating_mul((n - k) as u128);
    }
    total
}

/// Mean of the left-rotated rows; minimizes `||A - S C||_F^2` for fixed shifts.
pub fn optimal_generator(a: &DenseMatrix, f: &ShiftAssignment) -> Result<Generator> {
    check_assignment(a, f)?;
    let mut acc = aligned_sum(a, f.as_slice());
    let inv_m = 1.0 / a.rows() as f64;
    for v in &mut acc {
        *v *= inv_m;
    }
    Generator::new(acc)
}

fn reconstruction_error(a: &DenseMatrix, op: &PartialCirculantOp) -> f64 {
    let z = partial_to_dense(op);
    a.as_slice()
        .iter()
        .zip(z.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum()
}

/// Exhaustive maximization of the score.
///
/// Rotating every shift by the same amount leaves the objective unchanged,
/// so the first row is pinned to shift 0 and the remaining rows are
/// enumerated depth-first in lexicographic order. Each level keeps its own
/// running sum, so a node costs `O(n)`. Ties keep the lexicographically
/// first assignment.
pub fn rubik_score_exact(a: &DenseMatrix, budget: u64) -> Result<ScoreResult> {
    let (m, n) = a.shape();
    if m > n {
        return Err(Error::DimensionMismatch {
            context: "rows must not exceed columns",
            expected: n,
            found: m,
        });
    }
    let required = assignment_count(m, n);
    if required > budget as u128 {
        return Err(Error::BudgetExceeded { required, budget });
    }

    let mut search = ExactSearch {
        a,
        n,
        m,
        used: vec![false; n],
        current: vec![0; m],
        sums: vec![vec![0.0; n]; m],
        best_value: -1.0,
        best: vec![0; m],
    };
    search.used[0] = true;
    search.sums[0].copy_from_slice(a.row(0));
    if m == 1 {
        search.best_value = matrix::dot(a.row(0), a.row(0));
    } else {
        search.descend(1);
    }

    let score = libm::sqrt(search.best_value / m as f64);
    let error = (a.frobenius_norm_sq() - score * score).max(0.0);
    Ok(ScoreResult {
        score,
        assignment: ShiftAssignment::new(search.best, n)?,
        error,
        exact: true,
    })
}

struct ExactSearch<'a> {
    a: &'a DenseMatrix,
    n: usize,
    m: usize,
    used: Vec<bool>,
    current: Vec<usize>,
    /// `sums[d]` holds the aligned sum of rows `0..=d`.
    sums: Vec<Vec<f64>>,
    best_value: f64,
    best: Vec<usize>,
}

impl ExactSearch<'_> {
    fn descend(&mut self, depth: usize) {
        let n = self.n;
        let row = self.a.row(depth);
        let leaf = depth + 1 == self.m;
        for s in 0..n {
            if self.used[s] {
                continue;
            }
            self.current[depth] = s;
            if leaf {
                let parent = &self.sums[depth - 1];
                let mut value = 0.0;
                for k in 0..n {
                    let v = parent[k] + row[(k + s) % n];
                    value += v * v;
                }
                if value > self.best_value {
                    self.best_value = value;
                    self.best.copy_from_slice(&self.current);
                }
            } else {
                let (done, rest) = self.sums.split_at_mut(depth);
                let dst = &mut rest[0];
                dst.copy_from_slice(&done[depth - 1]);
                add_rotated_left(dst, row, s);
                self.used[s] = true;
                self.descend(depth + 1);
                self.used[s] = false;
            }
        }
    }
}

/// Cross-correlation of every row against a running sum, via FFT.
struct Correlator {
    plan: FftPlan,
    row_spectra: Vec<Vec<Complex64>>,
}

impl Correlator {
    fn new(a: &DenseMatrix) -> Self {
        let plan = FftPlan::new(a.cols());
        let row_spectra = (0..a.rows()).map(|i| plan.forward_real(a.row(i))).collect();
        Self { plan, row_spectra }
    }

    /// `out[s] = <acc, rotate_left(A_i, s)>` for every shift `s`.
    fn scores(&self, acc: &[f64], i: usize) -> Vec<f64> {
        let acc_hat = self.plan.forward_real(acc);
        let prod = acc_hat
            .iter()
            .zip(&self.row_spectra[i])
            .map(|(x, r)| x.conj() * r)
            .collect();
        self.plan.inverse_real(prod)
    }
}

/// Best admissible shift: maximal score, smallest index among near-ties.
fn pick_shift(scores: &[f64], admissible: impl Fn(usize) -> bool, tol: f64) -> usize {
    let best = scores
        .iter()
        .enumerate()
        .filter(|(s, _)| admissible(*s))
        .map(|(_, v)| *v)
        .fold(f64::NEG_INFINITY, f64::max);
    (0..scores.len())
        .find(|&s| admissible(s) && scores[s] >= best - tol)
        .expect("at least one admissible shift")
}

/// Greedy shift assignment with optional single-row local search.
///
/// The largest-norm row is pinned to shift 0. The other rows are placed one
/// at a time, each at the free shift that best correlates with the running
/// sum. Restart 0 visits rows by descending norm, restart 1 by ascending
/// norm and the remaining restarts in seeded random orders.
pub fn rubik_score_greedy(a: &DenseMatrix, cfg: &GreedyConfig) -> Result<ScoreResult> {
    let (m, n) = a.shape();
    if m > n {
        return Err(Error::DimensionMismatch {
            context: "rows must not exceed columns",
            expected: n,
            found: m,
        });
    }
    let norms: Vec<f64> = (0..m).map(|i| matrix::norm(a.row(i))).collect();
    let anchor = (0..m).fold(0, |best, i| if norms[i] > norms[best] { i } else { best });
    let mut rest: Vec<usize> = (0..m).filter(|&i| i != anchor).collect();
    rest.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));

    let correlator = Correlator::new(a);
    let restarts = cfg.restarts.max(1);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for r in 0..restarts {
        let order: Vec<usize> = match r {
            0 => rest.clone(),
            1 => rest.iter().rev().copied().collect(),
            _ => {
                let mut rng = rng::seeded(rng::child_seed(cfg.seed, r as u64));
                let perm = rng::permutation(&mut rng, rest.len());
                perm.into_iter().map(|k| rest[k]).collect()
            }
        };
        let mut f = greedy_pass(a, &correlator, anchor, &order);
        if cfg.local_search {
            local_search(a, &correlator, &mut f);
        }
        let value = matrix::norm(&aligned_sum(a, &f));
        if best.as_ref().is_none_or(|(v, _)| value > *v) {
            best = Some((value, f));
        }
    }

    let (value, f) = best.expect("at least one restart");
    let assignment = ShiftAssignment::new(f, n)?;
    let gen = optimal_generator(a, &assignment)?;
    let op = PartialCirculantOp::new(gen, assignment.clone())?;
    Ok(ScoreResult {
        score: value / libm::sqrt(m as f64),
        assignment,
        error: reconstruction_error(a, &op),
        exact: false,
    })
}

fn tie_tolerance(acc: &[f64], row: &[f64]) -> f64 {
    1e-12 * (matrix::norm(acc) * matrix::norm(row)) + f64::MIN_POSITIVE
}

fn greedy_pass(a: &DenseMatrix, corr: &Correlator, anchor: usize, order: &[usize]) -> Vec<usize> {
    let n = a.cols();
    let mut f = vec![0usize; a.rows()];
    let mut used = vec![false; n];
    used[0] = true;
    let mut acc = a.row(anchor).to_vec();
    for &i in order {
        let scores = corr.scores(&acc, i);
        let s = pick_shift(&scores, |s| !used[s], tie_tolerance(&acc, a.row(i)));
        used[s] = true;
        f[i] = s;
        add_rotated_left(&mut acc, a.row(i), s);
    }
    f
}

const MAX_LOCAL_PASSES: usize = 100;

fn local_search(a: &DenseMatrix, corr: &Correlator, f: &mut [usize]) {
    let (m, n) = a.shape();
    let mut used = vec![false; n];
    for &s in f.iter() {
        used[s] = true;
    }
    for _ in 0..MAX_LOCAL_PASSES {
        let mut improved = false;
        for i in 0..m {
            let mut others = aligned_sum(a, f);
            let row = a.row(i);
            for k in 0..n {
                others[k] -= row[(k + f[i]) % n];
            }
            let scores = corr.scores(&others, i);
            let tol = tie_tolerance(&others, row);
            let current = f[i];
            let s = pick_shift(&scores, |s| !used[s] || s == current, tol);
            if s != current && scores[s] > scores[current] + tol {
                used[current] = false;
                used[s] = true;
                f[i] = s;
                improved = true;
            }
        }
        if !improved {
            break;
        }
    }
}

/// A partial circulant approximation together with the score that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct PcApproximation {
    pub op: PartialCirculantOp,
    /// `||A - S C||_F^2` of the returned operator.
    pub error: f64,
    pub score: ScoreResult,
}

/// Best partial circulant approximation of `a` under the chosen solver.
pub fn best_partial_circulant(a: &DenseMatrix, mode: SolveMode) -> Result<PcApproximation> {
    let score = match mode {
        SolveMode::Exact { budget } => rubik_score_exact(a, budget)?,
        SolveMode::Greedy(cfg) => rubik_score_greedy(a, &cfg)?,
    };
    let gen = optimal_generator(a, &score.assignment)?;
    let op = PartialCirculantOp::new(gen, score.assignment.clone())?;
    let error = reconstruction_error(a, &op);
    Ok(PcApproximation { op, error, score })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circulant::rotate_right;

    fn planted(m: usize, n: usize, seed: u64) -> (DenseMatrix, Generator, ShiftAssignment) {
        let mut r = rng::seeded(seed);
        let c = Generator::new(rng::gaussian_vec(&mut r, n)).unwrap();
        let f = ShiftAssignment::new(rng::distinct_indices(&mut r, n, m), n).unwrap();
        let op = PartialCirculantOp::new(c.clone(), f.clone()).unwrap();
        (partial_to_dense(&op), c, f)
    }

    #[test]
    fn objective_examples() {
        let single = DenseMatrix::from_rows(&[vec![3.0, 0.0, 4.0]]).unwrap();
        for s in 0..3 {
            let f = ShiftAssignment::new(vec![s], 3).unwrap();
            assert!((rubik_objective(&single, &f).unwrap() - 5.0).abs() < 1e-14);
        }
        let id = DenseMatrix::identity(2);
        let f = ShiftAssignment::new(vec![0, 1], 2).unwrap();
        assert!((rubik_objective(&id, &f).unwrap() - 2f64.sqrt()).abs() < 1e-14);
        assert_eq!(
            ShiftAssignment::new(vec![0, 0], 2),
            Err(Error::DuplicateShift(0))
        );
        let wrong = ShiftAssignment::new(vec![0], 2).unwrap();
        assert!(rubik_objective(&id, &wrong).is_err());
    }

    #[test]
    fn exact_examples() {
        let id = DenseMatrix::identity(2);
        let r = rubik_score_exact(&id, DEFAULT_EXACT_BUDGET).unwrap();
        assert!((r.score - 2f64.sqrt()).abs() < 1e-14);
        assert!(r.error.abs() < 1e-14);
        assert!(r.exact);

        let a = DenseMatrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 0.0]]).unwrap();
        let r = rubik_score_exact(&a, DEFAULT_EXACT_BUDGET).unwrap();
        assert!((r.score - 0.5f64.sqrt()).abs() < 1e-14);
        assert!((r.error - 0.5).abs() < 1e-14);

        let approx = best_partial_circulant(&a, SolveMode::exact()).unwrap();
        assert!((approx.error - 0.5).abs() < 1e-14);
        assert_eq!(approx.op.generator().as_slice(), &[0.5, 0.0, 0.0]);
    }

    #[test]
    fn exact_budget_is_enforced() {
        let a = DenseMatrix::zeros(4, 10);
        assert_eq!(assignment_count(4, 10), 5040);
        assert_eq!(
            rubik_score_exact(&a, 5039),
            Err(Error::BudgetExceeded {
                required: 5040,
                budget: 5039
            })
        );
        assert!(rubik_score_exact(&a, 5040).is_ok());
    }

    #[test]
    fn planted_members_score_their_norm() {
        for seed in 0..10 {
            let (a, c, f) = planted(3, 9, seed);
            let r = rubik_score_exact(&a, DEFAULT_EXACT_BUDGET).unwrap();
            let norm = a.frobenius_norm();
            assert!((r.score - norm).abs() <= 1e-9 * norm);
            assert!(r.error <= 1e-9 * norm * norm);
            let g = optimal_generator(&a, &f).unwrap();
            for (x, y) in g.as_slice().iter().zip(c.as_slice()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn optimal_generator_single_row() {
        let a = DenseMatrix::from_rows(&[vec![1.0, -2.0, 3.5]]).unwrap();
        let f = ShiftAssignment::new(vec![0], 3).unwrap();
        assert_eq!(
            optimal_generator(&a, &f).unwrap().as_slice(),
            &[1.0, -2.0, 3.5]
        );
    }

    #[test]
    fn greedy_single_row_and_bound() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0, 2.0]]).unwrap();
        let r = rubik_score_greedy(&a, &GreedyConfig::default()).unwrap();
        assert!((r.score - 3.0).abs() < 1e-14);
        assert!(!r.exact);

        let mut g = rng::seeded(99);
        for _ in 0..20 {
            let a = rng::gaussian_matrix(&mut g, 3, 7);
            let e = rubik_score_exact(&a, DEFAULT_EXACT_BUDGET).unwrap();
            let h = rubik_score_greedy(&a, &GreedyConfig::default()).unwrap();
            assert!(h.score <= e.score + 1e-12);
            assert!(h.error + 1e-9 >= e.error);
        }
    }

    #[test]
    fn greedy_recovers_planted() {
        let mut hits = 0;
        for seed in 0..100 {
            let (a, _, _) = planted(8, 64, 1000 + seed);
            let r = rubik_score_greedy(&a, &GreedyConfig::default()).unwrap();
            let norm = a.frobenius_norm();
            if (r.score - norm).abs() <= 1e-9 * norm {
                hits += 1;
            }
        }
        assert!(hits >= 95, "greedy recovered {hits}/100");
    }

    #[test]
    fn rotation_invariance() {
        let mut g = rng::seeded(5);
        let a = rng::gaussian_matrix(&mut g, 3, 8);
        let f = [1usize, 4, 6];
        let base = rubik_objective(&a, &ShiftAssignment::new(f.to_vec(), 8).unwrap()).unwrap();
        for shift in 1..8 {
            let moved: Vec<usize> = f.iter().map(|&s| (s + shift) % 8).collect();
            let v = rubik_objective(&a, &ShiftAssignment::new(moved, 8).unwrap()).unwrap();
            assert!((v - base).abs() < 1e-12);
        }
    }

    #[test]
    fn planted_rows_are_rotations() {
        let (a, c, f) = planted(4, 12, 3);
        for (i, &s) in f.as_slice().iter().enumerate() {
            assert_eq!(a.row(i), rotate_right(c.as_slice(), s).unwrap().as_slice());
        }
    }
}
