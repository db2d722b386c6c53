use alloc::vec::Vec;

use crate::circulant::{Circulant, Generator};
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

/// The compressed surrogate `P S`: an `m x m'` post-processing matrix and
/// the `m'` circulant rows it combines.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedFactors {
    p: DenseMatrix,
    shift_indices: Vec<usize>,
    n: usize,
}

impl CompressedFactors {
    pub fn new(p: DenseMatrix, shift_indices: Vec<usize>, n: usize) -> Result<Self> {
        if shift_indices.len() != p.cols() {
            return Err(Error::DimensionMismatch {
                context: "columns of P vs shift indices",
                expected: p.cols(),
                found: shift_indices.len(),
            });
        }
        if shift_indices.len() > n {
            return Err(Error::DimensionMismatch {
                context: "m' must not exceed n",
                expected: n,
                found: shift_indices.len(),
            });
        }
        for w in shift_indices.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::param(
                    "shift_indices",
                    "must be strictly ascending",
                ));
            }
        }
        if let Some(&last) = shift_indices.last() {
            if last >= n {
                return Err(Error::ShiftOutOfRange { shift: last, n });
            }
        }
        if p.column_norms().iter().any(|&v| v == 0.0) {
            return Err(Error::param("P", "has an all-zero column"));
        }
        Ok(Self {
            p,
            shift_indices,
            n,
        })
    }

    pub fn p(&self) -> &DenseMatrix {
        &self.p
    }

    pub fn shift_indices(&self) -> &[usize] {
        &self.shift_indices
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.p.rows()
    }

    pub fn m_prime(&self) -> usize {
        self.shift_indices.len()
    }

    /// The equivalent dense `m x n` post-processing matrix `M = P S`.
    pub fn to_dense_m(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.m(), self.n);
        for (k, &j) in self.shift_indices.iter().enumerate() {
            for i in 0..self.m() {
                m.set(i, j, self.p.get(i, k));
            }
        }
        m
    }
}

/// Keeps the columns of `M` whose norm exceeds `threshold` times the largest
/// column norm. Column `j` of `M` multiplies circulant row (shift) `j`.
pub fn extract_factors(m: &DenseMatrix, threshold: f64) -> Result<CompressedFactors> {
    if !(threshold >= 0.0 && threshold.is_finite()) {
        return Err(Error::param("threshold", "must be finite and non-negative"));
    }
    let norms = m.column_norms();
    let max = norms.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return Err(Error::EmptyFactors);
    }
    let cut = threshold * max;
    let keep: Vec<usize> = (0..m.cols()).filter(|&j| norms[j] > cut).collect();
    if keep.is_empty() {
        return Err(Error::EmptyFactors);
    }
    let p = m.select_columns(&keep)?;
    CompressedFactors::new(p, keep, m.cols())
}

/// Number of active columns under the same rule as [`extract_factors`].
pub fn active_columns(m: &DenseMatrix, threshold: f64) -> usize {
    let norms = m.column_norms();
    let max = norms.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    norms.iter().filter(|&&v| v > threshold * max).count()
}

/// Modeled operation count of a factored apply: `m m' + n log2 n`.
pub fn factored_flops(n: usize, m: usize, m_prime: usize) -> f64 {
    let n_f = n as f64;
    (m * m_prime) as f64 + if n > 1 { n_f * libm::log2(n_f) } else { 1.0 }
}

/// `P S C` with the circulant spectrum cached, for repeated application.
#[derive(Debug, Clone)]
pub struct FactoredOperator {
    factors: CompressedFactors,
    circ: Circulant,
}

impl FactoredOperator {
    pub fn new(factors: CompressedFactors, gen: &Generator) -> Result<Self> {
        if gen.len() != factors.n() {
            return Err(Error::DimensionMismatch {
                context: "generator length vs factors n",
                expected: factors.n(),
                found: gen.len(),
            });
        }
        Ok(Self {
            circ: Circulant::new(gen),
            factors,
        })
    }

    pub fn factors(&self) -> &CompressedFactors {
        &self.factors
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let full = self.circ.apply(x)?;
        let sampled: Vec<f64> = self.factors.shift_indices.iter().map(|&j| full[j]).collect();
        self.factors.p.matvec(&sampled)
    }

    pub fn flops(&self) -> f64 {
        factored_flops(self.factors.n, self.factors.m(), self.factors.m_prime())
    }
}

/// `P (S (C x))`: circulant apply, subsample at the kept shifts, post-process.
pub fn fast_apply(cf: &CompressedFactors, gen: &Generator, x: &[f64]) -> Result<Vec<f64>> {
    FactoredOperator::new(cf.clone(), gen)?.apply(x)
}
