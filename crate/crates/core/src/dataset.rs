//! Data matrices, train/test splits, PCA operators and synthetic data.

use alloc::vec::Vec;

use nalgebra::{DMatrix, SVD};

use crate::circulant::{partial_to_dense, Generator, PartialCirculantOp, ShiftAssignment};
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;
use crate::rng;

/// Columns of `x` are data points.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: DenseMatrix,
    labels: Option<Vec<i64>>,
}

impl Dataset {
    pub fn new(x: DenseMatrix, labels: Option<Vec<i64>>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != x.cols() {
                return Err(Error::DimensionMismatch {
                    context: "label count vs columns",
                    expected: x.cols(),
                    found: l.len(),
                });
            }
        }
        Ok(Self { x, labels })
    }

    pub fn x(&self) -> &DenseMatrix {
        &self.x
    }

    pub fn labels(&self) -> Option<&[i64]> {
        self.labels.as_deref()
    }

    /// Ambient dimension.
    pub fn n(&self) -> usize {
        self.x.rows()
    }

    /// Number of samples.
    pub fn p(&self) -> usize {
        self.x.cols()
    }

    pub fn into_parts(self) -> (DenseMatrix, Option<Vec<i64>>) {
        (self.x, self.labels)
    }

    fn subset(&self, idx: &[usize]) -> Result<Dataset> {
        Ok(Dataset {
            x: self.x.select_columns(idx)?,
            labels: self
                .labels
                .as_ref()
                .map(|l| idx.iter().map(|&j| l[j]).collect()),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitStrategy {
    Head,
    Shuffled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub train_count: usize,
    pub seed: u64,
    pub strategy: SplitStrategy,
}

/// Column partition into `(train, test)`.
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    let p = ds.p();
    if spec.train_count == 0 || spec.train_count >= p {
        return Err(Error::param("train_count", "must satisfy 0 < train_count < p"));
    }
    let order: Vec<usize> = match spec.strategy {
        SplitStrategy::Head => (0..p).collect(),
        SplitStrategy::Shuffled => rng::permutation(&mut rng::seeded(spec.seed), p),
    };
    let (train, test) = order.split_at(spec.train_count);
    Ok((ds.subset(train)?, ds.subset(test)?))
}

/// Top principal directions of a data matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaOperator {
    /// `k x n`, orthonormal rows.
    pub components: DenseMatrix,
    /// Column mean subtracted before the decomposition.
    pub mean: Vec<f64>,
    pub singular_values: Vec<f64>,
}

/// Top-`k` left singular vectors of the column-centered data, as rows.
///
/// Each row is signed so that its largest-magnitude entry is positive.
pub fn pca_operator(x: &DenseMatrix, k: usize) -> Result<PcaOperator> {
    let (n, p) = x.shape();
    if k == 0 || k > n.min(p) {
        return Err(Error::param("k", "must satisfy 1 <= k <= min(n, p)"));
    }
    let mean: Vec<f64> = (0..n)
        .map(|i| x.row(i).iter().sum::<f64>() / p as f64)
        .collect();
    let centered = DMatrix::from_fn(n, p, |i, j| x.get(i, j) - mean[i]);
    let svd = SVD::new(centered, true, false);
    let u = svd.u.ok_or(Error::Numerical("SVD did not return U"))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut components = DenseMatrix::zeros(k, n);
    for (r, &j) in order.iter().take(k).enumerate() {
        let col = u.column(j);
        let lead = col
            .iter()
            .fold(0.0f64, |best, &v| if v.abs() > best.abs() { v } else { best });
        let sign = if lead < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            components.set(r, i, sign * col[i]);
        }
    }
    Ok(PcaOperator {
        components,
        mean,
        singular_values: order.iter().take(k).map(|&j| svd.singular_values[j]).collect(),
    })
}

/// Parameters for [`gen_synthetic`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SyntheticKind {
    /// iid `N(0, 1)` matrix.
    Gaussian { rows: usize, cols: usize },
    /// Dense form of a random partial circulant operator.
    PlantedPc { m: usize, n: usize },
    /// `X = B G + sigma E` with `B` an orthonormal `n x r` basis.
    SubspacePlusNoise {
        n: usize,
        r: usize,
        p: usize,
        sigma: f64,
    },
}

/// Random partial circulant operator with Gaussian generator and distinct random shifts.
pub fn planted_pc(m: usize, n: usize, seed: u64) -> Result<PartialCirculantOp> {
    if m == 0 || m > n {
        return Err(Error::param("m", "must satisfy 1 <= m <= n"));
    }
    let mut r = rng::seeded(seed);
    let c = Generator::new(rng::gaussian_vec(&mut r, n))?;
    let f = ShiftAssignment::new(rng::distinct_indices(&mut r, n, m), n)?;
    PartialCirculantOp::new(c, f)
}

/// `n x r` matrix with orthonormal columns spanning a random subspace.
pub fn random_orthonormal(n: usize, r: usize, seed: u64) -> Result<DenseMatrix> {
    if r == 0 || r > n {
        return Err(Error::param("r", "must satisfy 1 <= r <= n"));
    }
    let g = rng::gaussian_matrix(&mut rng::seeded(seed), n, r);
    let q = g.to_nalgebra().qr().q();
    Ok(DenseMatrix::from_nalgebra(&q))
}

pub fn gen_synthetic(kind: SyntheticKind, seed: u64) -> Result<DenseMatrix> {
    match kind {
        SyntheticKind::Gaussian { rows, cols } => {
            if rows == 0 || cols == 0 {
                return Err(Error::param("rows/cols", "must be at least 1"));
            }
            Ok(rng::gaussian_matrix(&mut rng::seeded(seed), rows, cols))
        }
        SyntheticKind::PlantedPc { m, n } => Ok(partial_to_dense(&planted_pc(m, n, seed)?)),
        SyntheticKind::SubspacePlusNoise { n, r, p, sigma } => {
            if p == 0 {
                return Err(Error::param("p", "must be at least 1"));
            }
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(Error::param("sigma", "must be finite and non-negative"));
            }
            let b = random_orthonormal(n, r, rng::child_seed(seed, 0))?;
            let mut stream = rng::seeded(rng::child_seed(seed, 1));
            let g = rng::gaussian_matrix(&mut stream, r, p);
            let e = rng::gaussian_matrix(&mut stream, n, p);
            let mut x = b.matmul(&g)?;
            for (v, w) in x.as_mut_slice().iter_mut().zip(e.as_slice()) {
                *v += sigma * w;
            }
            Ok(x)
        }
    }
}
