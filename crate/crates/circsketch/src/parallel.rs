//! Rayon-backed experiment runners.
//!
//! Work items are independent and keyed by index; results are collected in
//! index order, so output does not depend on the number of threads.

use circsketch_core::learner::{learn, LearnConfig, LearnedFactors};
use circsketch_core::montecarlo::{
    aggregate_projection, aggregate_tail, projection_trial, tail_trial, ProjectionConfig,
    ProjectionResult, TailExperimentConfig, TailExperimentResult,
};
use circsketch_core::DenseMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Environment variable consulted when no thread count is given.
pub const THREADS_ENV: &str = "CIRCSKETCH_THREADS";

/// Resolves the worker count: explicit value, then [`THREADS_ENV`], then
/// rayon's default (0).
pub fn resolve_threads(explicit: Option<usize>) -> Result<usize> {
    if let Some(t) = explicit {
        return Ok(t);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map_err(|_| Error::Invalid(format!("{THREADS_ENV} must be an integer, got {v:?}"))),
        _ => Ok(0),
    }
}

/// Runs `f` inside a pool with `threads` workers (0 means rayon's default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Invalid(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

pub fn run_tail_experiment(cfg: &TailExperimentConfig) -> Result<TailExperimentResult> {
    cfg.validate()?;
    let records = (0..cfg.trials)
        .into_par_iter()
        .map(|i| tail_trial(cfg, i))
        .collect::<circsketch_core::Result<Vec<_>>>()?;
    Ok(aggregate_tail(cfg, records))
}

pub fn run_projection_experiment(cfg: &ProjectionConfig) -> Result<ProjectionResult> {
    cfg.validate()?;
    let norms = (0..cfg.trials)
        .into_par_iter()
        .map(|i| projection_trial(cfg, i))
        .collect();
    Ok(aggregate_projection(cfg, norms))
}

/// Learns one factorization per `lambda`, all other settings taken from `base`.
pub fn lambda_sweep(
    a: &DenseMatrix,
    x: &DenseMatrix,
    base: &LearnConfig,
    lambdas: &[f64],
) -> Vec<circsketch_core::Result<LearnedFactors>> {
    lambdas
        .par_iter()
        .map(|&lambda| learn(a, x, &LearnConfig { lambda, ..*base }))
        .collect()
}

/// `count` points spaced geometrically from `hi` down to `lo`.
pub fn geometric_grid(hi: f64, lo: f64, count: usize) -> Result<Vec<f64>> {
    if !(hi > 0.0 && lo > 0.0 && hi.is_finite() && lo.is_finite()) || count == 0 {
        return Err(Error::Invalid(
            "lambda grid needs positive finite bounds and at least one point".into(),
        ));
    }
    if count == 1 {
        return Ok(vec![hi]);
    }
    let ratio = (lo / hi).ln() / (count - 1) as f64;
    Ok((0..count)
        .map(|i| match i {
            0 => hi,
            i if i == count - 1 => lo,
            i => hi * (ratio * i as f64).exp(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use circsketch_core::montecarlo;

    #[test]
    fn parallel_tail_matches_sequential() {
        let cfg = TailExperimentConfig::new(2, 9, 0.05, 40, 3);
        let seq = montecarlo::run_tail_experiment(&cfg).unwrap();
        let par = with_threads(3, || run_tail_experiment(&cfg)).unwrap().unwrap();
        assert_eq!(seq, par);
    }

    #[test]
    fn parallel_projection_matches_sequential() {
        let cfg = ProjectionConfig {
            d: 20,
            k: 5,
            eps: 0.3,
            trials: 64,
            seed: 1,
        };
        let seq = montecarlo::run_projection_experiment(&cfg).unwrap();
        let par = with_threads(4, || run_projection_experiment(&cfg)).unwrap().unwrap();
        assert_eq!(seq, par);
    }

    #[test]
    fn grid_endpoints_and_ratio() {
        let g = geometric_grid(100.0, 0.01, 5).unwrap();
        assert_eq!(g[0], 100.0);
        assert_eq!(g[4], 0.01);
        assert!((g[1] / g[0] - 0.1).abs() < 1e-12);
        assert!(geometric_grid(1.0, 0.0, 3).is_err());
        assert_eq!(geometric_grid(2.0, 1.0, 1).unwrap(), vec![2.0]);
    }

    #[test]
    fn explicit_thread_count_wins() {
        assert_eq!(resolve_threads(Some(3)).unwrap(), 3);
    }
}
