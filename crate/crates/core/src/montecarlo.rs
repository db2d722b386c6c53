//! Monte Carlo probes for Gaussian approximability and random projections.
//!
//! Each experiment is split into a pure per-trial function, keyed by the
//! trial index, and a fold over trial records in index order. The sequential
//! runners here and the parallel runners in the companion crate therefore
//! produce identical results for a given seed.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::rng;
use crate::rubik::{self, GreedyConfig, DEFAULT_EXACT_BUDGET};

/// Score solver used by a tail experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailSolver {
    Exact { budget: u64 },
    Greedy { restarts: usize, local_search: bool },
}

impl TailSolver {
    pub fn exact() -> Self {
        TailSolver::Exact {
            budget: DEFAULT_EXACT_BUDGET,
        }
    }

    pub fn greedy() -> Self {
        let g = GreedyConfig::default();
        TailSolver::Greedy {
            restarts: g.restarts,
            local_search: g.local_search,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            TailSolver::Exact { .. } => "exact",
            TailSolver::Greedy { .. } => "greedy",
        }
    }
}

/// Matrix of iid `N(0, 1)` entries drawn from a ChaCha8 stream seeded by `seed`.
pub fn sample_gaussian(m: usize, n: usize, seed: u64) -> DenseMatrix {
    rng::gaussian_matrix(&mut rng::seeded(seed), m, n)
}

/// Largest threshold accepted without `allow_exploratory`.
pub const DELTA_LIMIT: f64 = 0.125;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailExperimentConfig {
    pub m: usize,
    pub n: usize,
    pub delta: f64,
    pub trials: usize,
    pub seed: u64,
    pub solver: TailSolver,
    /// Accept `delta >= 0.125`.
    pub allow_exploratory: bool,
}

impl TailExperimentConfig {
    pub fn new(m: usize, n: usize, delta: f64, trials: usize, seed: u64) -> Self {
        Self {
            m,
            n,
            delta,
            trials,
            seed,
            solver: TailSolver::exact(),
            allow_exploratory: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::param("m", "tail experiments need at least 2 rows"));
        }
        if self.m > self.n {
            return Err(Error::param("m", "must not exceed n"));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::param("delta", "must be finite and non-negative"));
        }
        if self.delta >= DELTA_LIMIT && !self.allow_exploratory {
            return Err(Error::param(
                "delta",
                "values at or above 0.125 require the exploratory override",
            ));
        }
        if self.trials == 0 {
            return Err(Error::param("trials", "must be at least 1"));
        }
        if let TailSolver::Exact { budget } = self.solver {
            let required = rubik::assignment_count(self.m, self.n);
            if required > budget as u128 {
                return Err(Error::BudgetExceeded { required, budget });
            }
        }
        Ok(())
    }
}

/// One tail trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TailTrial {
    pub index: usize,
    pub frobenius_sq: f64,
    /// Optimal (or greedy) approximation error `E`.
    pub error: f64,
    /// `R(A)^2 / ||A||_F^2`.
    pub ratio: f64,
    pub hit: bool,
}

/// Runs trial `index`; the matrix is drawn from the child seed `(seed, index)`.
pub fn tail_trial(cfg: &TailExperimentConfig, index: usize) -> Result<TailTrial> {
    let seed = rng::child_seed(cfg.seed, index as u64);
    let a = sample_gaussian(cfg.m, cfg.n, seed);
    let score = match cfg.solver {
        TailSolver::Exact { budget } => rubik::rubik_score_exact(&a, budget)?,
        TailSolver::Greedy {
            restarts,
            local_search,
        } => rubik::rubik_score_greedy(
            &a,
            &GreedyConfig {
                restarts,
                local_search,
                seed,
            },
        )?,
    };
    let frobenius_sq = a.frobenius_norm_sq();
    let ratio = if frobenius_sq > 0.0 {
        (score.score * score.score / frobenius_sq).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(TailTrial {
        index,
        frobenius_sq,
        error: score.error,
        ratio,
        hit: score.error <= cfg.delta * frobenius_sq,
    })
}

/// Sample mean with a normal-approximation 95% interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl MeanEstimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let std_error = libm::sqrt(var / n);
        Self {
            mean,
            std_error,
            ci_low: mean - 1.96 * std_error,
            ci_high: mean + 1.96 * std_error,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailExperimentResult {
    pub config: TailExperimentConfig,
    pub hits: usize,
    pub trials: usize,
    pub ratio_samples: Vec<f64>,
    pub ratio_mean: MeanEstimate,
    pub solver: &'static str,
    pub records: Vec<TailTrial>,
}

/// Folds per-trial records, which must be sorted by index.
pub fn aggregate_tail(cfg: &TailExperimentConfig, records: Vec<TailTrial>) -> TailExperimentResult {
    let ratio_samples: Vec<f64> = records.iter().map(|r| r.ratio).collect();
    TailExperimentResult {
        config: *cfg,
        hits: records.iter().filter(|r| r.hit).count(),
        trials: records.len(),
        ratio_mean: MeanEstimate::from_samples(&ratio_samples),
        ratio_samples,
        solver: cfg.solver.tag(),
        records,
    }
}

pub fn run_tail_experiment(cfg: &TailExperimentConfig) -> Result<TailExperimentResult> {
    cfg.validate()?;
    let records = (0..cfg.trials)
        .map(|i| tail_trial(cfg, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate_tail(cfg, records))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionConfig {
    pub d: usize,
    pub k: usize,
    pub eps: f64,
    pub trials: usize,
    pub seed: u64,
}

impl ProjectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.k > self.d {
            return Err(Error::param("k", "must satisfy 1 <= k <= d"));
        }
        if !(0.0..=1.0).contains(&self.eps) {
            return Err(Error::param("eps", "must lie in [0, 1]"));
        }
        if self.trials == 0 {
            return Err(Error::param("trials", "must be at least 1"));
        }
        Ok(())
    }

    /// `(1 - eps) sqrt(k / d)`.
    pub fn threshold(&self) -> f64 {
        (1.0 - self.eps) * libm::sqrt(self.k as f64 / self.d as f64)
    }

    /// `3 exp(-k eps^2 / 64)`.
    pub fn bound(&self) -> f64 {
        3.0 * libm::exp(-(self.k as f64) * self.eps * self.eps / 64.0)
    }
}

/// Squared norm of the projection of `e_1` onto a random `k`-dimensional
/// subspace spanned by the orthonormalized columns of a `d x k` Gaussian draw.
pub fn projection_trial(cfg: &ProjectionConfig, index: usize) -> f64 {
    let seed = rng::child_seed(cfg.seed, index as u64);
    if cfg.k == cfg.d {
        return 1.0;
    }
    let g = rng::gaussian_matrix(&mut rng::seeded(seed), cfg.d, cfg.k);
    let q = DMatrix::from_row_slice(cfg.d, cfg.k, g.as_slice()).qr().q();
    (0..cfg.k).map(|j| q[(0, j)] * q[(0, j)]).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    pub config: ProjectionConfig,
    pub empirical_tail: f64,
    pub bound: f64,
    pub mean_sq: f64,
    pub mean_sq_std_error: f64,
    pub norms_sq: Vec<f64>,
}

pub fn aggregate_projection(cfg: &ProjectionConfig, norms_sq: Vec<f64>) -> ProjectionResult {
    let t = cfg.threshold();
    let tail = norms_sq.iter().filter(|&&w| libm::sqrt(w) <= t).count();
    let est = MeanEstimate::from_samples(&norms_sq);
    ProjectionResult {
        config: *cfg,
        empirical_tail: tail as f64 / norms_sq.len() as f64,
        bound: cfg.bound(),
        mean_sq: est.mean,
        mean_sq_std_error: est.std_error,
        norms_sq,
    }
}

pub fn run_projection_experiment(cfg: &ProjectionConfig) -> Result<ProjectionResult> {
    cfg.validate()?;
    let norms = (0..cfg.trials).map(|i| projection_trial(cfg, i)).collect();
    Ok(aggregate_projection(cfg, norms))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_moments_and_determinism() {
        let a = sample_gaussian(1000, 1000, 11);
        let xs = a.as_slice();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() <= 0.005, "mean {mean}");
        assert!((var - 1.0).abs() <= 0.01, "variance {var}");
        assert_eq!(a, sample_gaussian(1000, 1000, 11));
    }

    #[test]
    fn rejects_single_row_and_large_delta() {
        assert!(run_tail_experiment(&TailExperimentConfig::new(1, 8, 0.05, 10, 0)).is_err());
        let mut cfg = TailExperimentConfig::new(2, 8, 0.2, 10, 0);
        assert!(cfg.validate().is_err());
        cfg.allow_exploratory = true;
        assert!(cfg.validate().is_ok());
        cfg.trials = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn exact_budget_is_checked_up_front() {
        let mut cfg = TailExperimentConfig::new(3, 16, 0.05, 1, 0);
        cfg.solver = TailSolver::Exact { budget: 100 };
        assert!(matches!(cfg.validate(), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn ratios_lie_in_unit_interval() {
        let mut cfg = TailExperimentConfig::new(3, 10, 0.05, 50, 4);
        let exact = run_tail_experiment(&cfg).unwrap();
        assert!(exact.ratio_samples.iter().all(|r| (0.0..=1.0).contains(r)));
        assert!(exact.ratio_mean.mean > 0.0 && exact.ratio_mean.mean < 1.0);
        cfg.solver = TailSolver::greedy();
        let greedy = run_tail_experiment(&cfg).unwrap();
        assert_eq!(greedy.solver, "greedy");
        for (e, g) in exact.records.iter().zip(&greedy.records) {
            assert!(g.error >= e.error * (1.0 - 1e-12) - 1e-12);
        }
        assert!(exact.hits >= greedy.hits);
    }

    #[test]
    fn full_space_projection_never_hits_tail() {
        let cfg = ProjectionConfig {
            d: 6,
            k: 6,
            eps: 0.1,
            trials: 20,
            seed: 0,
        };
        let r = run_projection_experiment(&cfg).unwrap();
        assert_eq!(r.empirical_tail, 0.0);
        assert!(r.norms_sq.iter().all(|&w| (w - 1.0).abs() < 1e-12));
    }

    #[test]
    fn projection_mean_matches_dimension_ratio() {
        let cfg = ProjectionConfig {
            d: 40,
            k: 10,
            eps: 0.5,
            trials: 2000,
            seed: 3,
        };
        let r = run_projection_experiment(&cfg).unwrap();
        assert!((r.mean_sq - 0.25).abs() <= 4.0 * r.mean_sq_std_error);
        assert!(r.empirical_tail <= r.bound);
    }

    #[test]
    fn projection_rejects_bad_parameters() {
        let mut cfg = ProjectionConfig {
            d: 4,
            k: 5,
            eps: 0.1,
            trials: 1,
            seed: 0,
        };
        assert!(cfg.validate().is_err());
        cfg.k = 2;
        cfg.eps = 1.5;
        assert!(cfg.validate().is_err());
    }
}
