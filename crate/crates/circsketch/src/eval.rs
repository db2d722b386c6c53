//! Per-point approximation error of learned factors on held-out data.

use circsketch_core::learner::{CompressedFactors, FactoredOperator};
use circsketch_core::{DenseMatrix, Generator};
use serde::Serialize;

use crate::error::{Error, Result};

/// Default error threshold reported in summaries.
pub const WITHIN_THRESHOLD: f64 = 0.02;

/// `||A x - P S C x||^2 / ||x||^2` for one data column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ColumnError {
    pub column: usize,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalSummary {
    pub evaluated: usize,
    /// Columns with `x = 0`, where the ratio is undefined.
    pub skipped_zero: usize,
    pub median: f64,
    pub mean: f64,
    pub p90: f64,
    pub threshold: f64,
    pub fraction_within_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramBin {
    pub log10_low: f64,
    pub log10_high: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub errors: Vec<ColumnError>,
    pub summary: EvalSummary,
}

pub fn evaluate(
    a: &DenseMatrix,
    factors: &CompressedFactors,
    gen: &Generator,
    data: &DenseMatrix,
) -> Result<Evaluation> {
    let n = a.cols();
    if factors.n() != n || gen.len() != n || data.rows() != n || factors.m() != a.rows() {
        return Err(Error::Invalid(format!(
            "dimension mismatch: A is {}x{}, factors are {}x{} over n={}, generator has {}, data has {} rows",
            a.rows(),
            n,
            factors.m(),
            factors.m_prime(),
            factors.n(),
            gen.len(),
            data.rows()
        )));
    }
    let op = FactoredOperator::new(factors.clone(), gen)?;
    let mut errors = Vec::with_capacity(data.cols());
    let mut skipped = 0;
    for j in 0..data.cols() {
        let x = data.column(j);
        let xx: f64 = x.iter().map(|v| v * v).sum();
        if xx == 0.0 {
            skipped += 1;
            continue;
        }
        let exact = a.matvec(&x)?;
        let approx = op.apply(&x)?;
        let num: f64 = exact
            .iter()
            .zip(&approx)
            .map(|(u, v)| (u - v) * (u - v))
            .sum();
        errors.push(ColumnError {
            column: j,
            error: num / xx,
        });
    }
    let summary = summarize(&errors, skipped, WITHIN_THRESHOLD)?;
    Ok(Evaluation { errors, summary })
}

/// Linear-interpolation quantile of sorted values.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(errors: &[ColumnError], skipped_zero: usize, threshold: f64) -> Result<EvalSummary> {
    if errors.is_empty() {
        return Err(Error::Invalid("no nonzero data columns to evaluate".into()));
    }
    let mut v: Vec<f64> = errors.iter().map(|e| e.error).collect();
    v.sort_by(f64::total_cmp);
    let within = v.iter().filter(|&&e| e <= threshold).count();
    Ok(EvalSummary {
        evaluated: v.len(),
        skipped_zero,
        median: quantile(&v, 0.5),
        mean: v.iter().sum::<f64>() / v.len() as f64,
        p90: quantile(&v, 0.9),
        threshold,
        fraction_within_threshold: within as f64 / v.len() as f64,
    })
}

/// Uniform bins over `log10(error)` spanning the observed range.
///
/// Zero errors have no logarithm and are returned separately.
pub fn log_histogram(errors: &[ColumnError], bins: usize) -> Result<(Vec<HistogramBin>, usize)> {
    if bins == 0 {
        return Err(Error::Invalid("histogram needs at least one bin".into()));
    }
    let logs: Vec<f64> = errors
        .iter()
        .filter(|e| e.error > 0.0)
        .map(|e| e.error.log10())
        .collect();
    let zeros = errors.len() - logs.len();
    if logs.is_empty() {
        return Ok((Vec::new(), zeros));
    }
    let mut lo = logs.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for l in logs {
        let b = (((l - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let out = counts
        .into_iter()
        .enumerate()
        .map(|(b, count)| HistogramBin {
            log10_low: lo + b as f64 * width,
            log10_high: if b + 1 == bins { hi } else { lo + (b + 1) as f64 * width },
            count,
        })
        .collect();
    Ok((out, zeros))
}
