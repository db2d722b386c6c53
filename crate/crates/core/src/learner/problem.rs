use alloc::vec::Vec;
use core::cell::OnceCell;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::FftPlan;
use crate::matrix::DenseMatrix;

/// Largest `n` for which the C-step normal matrix is formed and factored.
pub const DIRECT_LIMIT: usize = 512;
/// Largest `n` for which the data Gram matrix `X X^T` is kept.
pub const GRAM_LIMIT: usize = 2048;

/// Data shared by both subproblems: `A`, `X`, `Y = A X` and, when small
/// enough, `K = X X^T` and `A K`.
pub(crate) struct Problem<'a> {
    pub a: &'a DenseMatrix,
    pub x: &'a DenseMatrix,
    pub y: DenseMatrix,
    pub plan: FftPlan,
    gram: Option<Gram>,
    x_spectra: OnceCell<Vec<Vec<Complex64>>>,
}

pub(crate) struct Gram {
    pub k: DenseMatrix,
    pub ak: DenseMatrix,
}

impl<'a> Problem<'a> {
    pub fn new(a: &'a DenseMatrix, x: &'a DenseMatrix) -> Result<Self> {
        if a.cols() != x.rows() {
            return Err(Error::DimensionMismatch {
                context: "columns of A vs rows of X",
                expected: a.cols(),
                found: x.rows(),
            });
        }
        let n = a.cols();
        let p = x.cols();
        let y = a.matmul(x)?;
        let gram = if n <= DIRECT_LIMIT || (n <= GRAM_LIMIT && n <= p) {
            let k = x.matmul_transpose(x)?;
            let ak = a.matmul(&k)?;
            Some(Gram { k, ak })
        } else {
            None
        };
        Ok(Self {
            a,
            x,
            y,
            plan: FftPlan::new(n),
            gram,
            x_spectra: OnceCell::new(),
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.a.cols()
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.a.rows()
    }

    #[inline]
    pub fn p(&self) -> usize {
        self.x.cols()
    }

    pub fn gram(&self) -> Option<&Gram> {
        self.gram.as_ref()
    }

    /// Spectra of the columns of `X`.
    pub fn x_spectra(&self) -> &[Vec<Complex64>] {
        self.x_spectra.get_or_init(|| {
            (0..self.p())
                .map(|t| self.plan.forward_real(&self.x.column(t)))
                .collect()
        })
    }

    pub fn check_m(&self, m: &DenseMatrix) -> Result<()> {
        if m.shape() != (self.m(), self.n()) {
            return Err(Error::DimensionMismatch {
                context: "M must be m x n",
                expected: self.m() * self.n(),
                found: m.rows() * m.cols(),
            });
        }
        Ok(())
    }

    pub fn check_generator(&self, len: usize) -> Result<()> {
        if len != self.n() {
            return Err(Error::DimensionMismatch {
                context: "generator length",
                expected: self.n(),
                found: len,
            });
        }
        Ok(())
    }
}
