//! Circulant and partial circulant operators.
//!
//! Row `j` of the circulant matrix generated by `c` is `c` rotated right by
//! `j` positions, so `C[j][k] = c[(k - j) mod n]` and `C x` is the circular
//! cross-correlation of `c` with `x`. All indices are 0-based.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft::FftPlan;
use crate::matrix::{self, DenseMatrix};

/// First row of a circulant matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator(Vec<f64>);

impl Generator {
    pub fn new(c: Vec<f64>) -> Result<Self> {
        if c.is_empty() {
            return Err(Error::Empty("generator"));
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("generator"));
        }
        Ok(Self(c))
    }

    pub fn zeros(n: usize) -> Self {
        assert!(n > 0, "generator length must be positive");
        Self(vec![0.0; n])
    }

    /// The generator `e_0`, whose circulant is the identity.
    pub fn unit(n: usize) -> Self {
        let mut g = Self::zeros(n);
        g.0[0] = 1.0;
        g
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        matrix::norm(&self.0)
    }
}

/// `m` pairwise distinct shifts in `0..n`; shift `f[i]` selects circulant row `f[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShiftAssignment {
    shifts: Vec<usize>,
    n: usize,
}

impl ShiftAssignment {
    pub fn new(shifts: Vec<usize>, n: usize) -> Result<Self> {
        if shifts.is_empty() {
            return Err(Error::Empty("shift assignment"));
        }
        if shifts.len() > n {
            return Err(Error::DimensionMismatch {
                context: "shift assignment length (m <= n)",
                expected: n,
                found: shifts.len(),
            });
        }
        let mut seen = vec![false; n];
        for &s in &shifts {
            if s >= n {
                return Err(Error::ShiftOutOfRange { shift: s, n });
            }
            if seen[s] {
                return Err(Error::DuplicateShift(s));
            }
            seen[s] = true;
        }
        Ok(Self { shifts, n })
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.shifts.len()
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.shifts
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.shifts
    }
}

/// The partial circulant matrix `S C`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialCirculantOp {
    gen: Generator,
    shifts: ShiftAssignment,
}

impl PartialCirculantOp {
    pub fn new(gen: Generator, shifts: ShiftAssignment) -> Result<Self> {
        if gen.len() != shifts.n() {
            return Err(Error::DimensionMismatch {
                context: "partial circulant generator length",
                expected: shifts.n(),
                found: gen.len(),
            });
        }
        Ok(Self { gen, shifts })
    }

    pub fn generator(&self) -> &Generator {
        &self.gen
    }

    pub fn shifts(&self) -> &ShiftAssignment {
        &self.shifts
    }

    pub fn m(&self) -> usize {
        self.shifts.m()
    }

    pub fn n(&self) -> usize {
        self.shifts.n()
    }
}

fn check_shift(s: usize, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Empty("vector"));
    }
    if s >= n {
        return Err(Error::ShiftOutOfRange { shift: s, n });
    }
    Ok(())
}

/// Circular shift right by `s`: `w[(k + s) mod n] = v[k]`.
pub fn rotate_right(v: &[f64], s: usize) -> Result<Vec<f64>> {
    check_shift(s, v.len())?;
    let n = v.len();
    let mut w = vec![0.0; n];
    for (k, &x) in v.iter().enumerate() {
        w[(k + s) % n] = x;
    }
    Ok(w)
}

/// Circular shift left by `s`: `w[k] = v[(k + s) mod n]`.
pub fn rotate_left(v: &[f64], s: usize) -> Result<Vec<f64>> {
    check_shift(s, v.len())?;
    let n = v.len();
    Ok((0..n).map(|k| v[(k + s) % n]).collect())
}

/// Adds `rotate_left(v, s)` into `acc` without allocating.
#[inline]
pub(crate) fn add_rotated_left(acc: &mut [f64], v: &[f64], s: usize) {
    let n = v.len();
    let (head, tail) = v.split_at(s);
    let (acc_a, acc_b) = acc.split_at_mut(n - s);
    for (a, x) in acc_a.iter_mut().zip(tail) {
        *a += x;
    }
    for (a, x) in acc_b.iter_mut().zip(head) {
        *a += x;
    }
}

/// Row `j` of the circulant matrix generated by `gen`.
pub fn circ_row(gen: &Generator, j: usize) -> Result<Vec<f64>> {
    if j >= gen.len() {
        return Err(Error::IndexOutOfRange {
            index: j,
            len: gen.len(),
        });
    }
    rotate_right(gen.as_slice(), j)
}

/// Dense `n x n` circulant matrix. Reference construction for the fast paths.
pub fn circ_to_dense(gen: &Generator) -> DenseMatrix {
    let n = gen.len();
    let c = gen.as_slice();
    DenseMatrix::from_fn(n, n, |j, k| c[(k + n - j) % n])
}

/// FFT-backed circulant operator with the generator spectrum cached.
#[derive(Debug, Clone)]
pub struct Circulant {
    plan: FftPlan,
    spectrum: Vec<Complex64>,
}

impl Circulant {
    pub fn new(gen: &Generator) -> Self {
        let plan = FftPlan::new(gen.len());
        let spectrum = plan.forward_real(gen.as_slice());
        Self { plan, spectrum }
    }

    /// Builds the operator reusing an existing plan of the right length.
    pub fn with_plan(gen: &Generator, plan: &FftPlan) -> Self {
        assert_eq!(plan.len(), gen.len(), "plan length must match generator");
        let spectrum = plan.forward_real(gen.as_slice());
        Self {
            plan: plan.clone(),
            spectrum,
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.plan.len()
    }

    pub fn plan(&self) -> &FftPlan {
        &self.plan
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.n() {
            return Err(Error::DimensionMismatch {
                context: "circulant operand",
                expected: self.n(),
                found: len,
            });
        }
        Ok(())
    }

    /// `C x`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x.len())?;
        let mut xh = self.plan.forward_half(x);
        for (v, c) in xh.iter_mut().zip(&self.spectrum) {
            *v *= c.conj();
        }
        Ok(self.plan.inverse_half(&xh))
    }

    /// `C x` given the spectrum of `x`.
    pub fn apply_spectrum(&self, x_hat: &[Complex64]) -> Vec<f64> {
        let prod: Vec<Complex64> = self
            .spectrum
            .iter()
            .zip(x_hat)
            .map(|(c, x)| c.conj() * x)
            .collect();
        self.plan.inverse_real(prod)
    }

    /// `C^T y`.
    pub fn apply_adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.check(y.len())?;
        let mut yh = self.plan.forward_half(y);
        for (v, c) in yh.iter_mut().zip(&self.spectrum) {
            *v *= c;
        }
        Ok(self.plan.inverse_half(&yh))
    }

    /// `C X` for an `n x p` matrix `X`, column by column.
    pub fn apply_columns(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.check(x.rows())?;
        let mut out = DenseMatrix::zeros(x.rows(), x.cols());
        for j in 0..x.cols() {
            let col = self.apply(&x.column(j))?;
            out.set_column(j, &col);
        }
        Ok(out)
    }
}

/// `C x` via FFT circular cross-correlation.
pub fn circ_apply(gen: &Generator, x: &[f64]) -> Result<Vec<f64>> {
    Circulant::new(gen).apply(x)
}

/// `C^T y` via FFT circular convolution.
pub fn circ_apply_adjoint(gen: &Generator, y: &[f64]) -> Result<Vec<f64>> {
    Circulant::new(gen).apply_adjoint(y)
}

/// `S C x`: fast circulant apply followed by subsampling at the shifts.
pub fn partial_apply(op: &PartialCirculantOp, x: &[f64]) -> Result<Vec<f64>> {
    let full = circ_apply(&op.gen, x)?;
    Ok(op.shifts.as_slice().iter().map(|&f| full[f]).collect())
}

/// Dense `m x n` matrix whose row `i` is circulant row `f[i]`.
pub fn partial_to_dense(op: &PartialCirculantOp) -> DenseMatrix {
    let n = op.n();
    let c = op.gen.as_slice();
    let f = op.shifts.as_slice();
    DenseMatrix::from_fn(op.m(), n, |i, k| c[(k + n - f[i]) % n])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gen(v: &[f64]) -> Generator {
        Generator::new(v.to_vec()).unwrap()
    }

    #[test]
    fn rotations() {
        assert_eq!(rotate_right(&[1.0, 2.0, 3.0], 0).unwrap(), [1.0, 2.0, 3.0]);
        assert_eq!(rotate_right(&[1.0, 2.0, 3.0], 1).unwrap(), [3.0, 1.0, 2.0]);
        assert_eq!(
            rotate_right(&[1.0, 2.0, 3.0, 4.0], 3).unwrap(),
            rotate_left(&[1.0, 2.0, 3.0, 4.0], 1).unwrap()
        );
        assert_eq!(
            rotate_right(&[1.0, 2.0, 3.0, 4.0], 3).unwrap(),
            [2.0, 3.0, 4.0, 1.0]
        );
        assert_eq!(rotate_left(&[1.0, 2.0, 3.0], 1).unwrap(), [2.0, 3.0, 1.0]);
        assert_eq!(rotate_left(&[5.0], 0).unwrap(), [5.0]);
        assert_eq!(
            rotate_left(&[1.0, 2.0], 2),
            Err(Error::ShiftOutOfRange { shift: 2, n: 2 })
        );
        assert!(rotate_right(&[], 0).is_err());
    }

    #[test]
    fn add_rotated_left_matches_rotate_left() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        for s in 0..5 {
            let mut acc = [0.0; 5];
            add_rotated_left(&mut acc, &v, s);
            assert_eq!(acc.to_vec(), rotate_left(&v, s).unwrap());
        }
    }

    #[test]
    fn circulant_rows_and_dense_layout() {
        let c = gen(&[1.0, 2.0, 3.0]);
        assert_eq!(circ_row(&c, 0).unwrap(), [1.0, 2.0, 3.0]);
        assert_eq!(circ_row(&c, 1).unwrap(), [3.0, 1.0, 2.0]);
        assert_eq!(circ_row(&c, 2).unwrap(), [2.0, 3.0, 1.0]);
        assert!(circ_row(&c, 3).is_err());
        let d = circ_to_dense(&c);
        assert_eq!(
            d,
            DenseMatrix::from_rows(&[
                vec![1.0, 2.0, 3.0],
                vec![3.0, 1.0, 2.0],
                vec![2.0, 3.0, 1.0]
            ])
            .unwrap()
        );
        assert_eq!(circ_to_dense(&gen(&[1.0, 0.0, 0.0])), DenseMatrix::identity(3));
        assert_eq!(
            circ_to_dense(&gen(&[0.0, 1.0])),
            DenseMatrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
        );
    }

    #[test]
    fn fast_apply_examples() {
        let x = [0.3, -1.2, 4.0, 2.5];
        let y = circ_apply(&Generator::unit(4), &x).unwrap();
        for (a, b) in y.iter().zip(&x) {
            assert!((a - b).abs() < 1e-14);
        }
        let y = circ_apply(&gen(&[1.0, 2.0, 3.0]), &[1.0, 0.0, 0.0]).unwrap();
        for (a, b) in y.iter().zip(&[1.0, 3.0, 2.0]) {
            assert!((a - b).abs() < 1e-14);
        }
        let avg = gen(&[0.25; 4]);
        let mean = x.iter().sum::<f64>() / 4.0;
        for v in circ_apply(&avg, &x).unwrap() {
            assert!((v - mean).abs() < 1e-14);
        }
        assert!(circ_apply(&avg, &[1.0]).is_err());
        assert!(circ_apply_adjoint(&avg, &[1.0]).is_err());
    }

    #[test]
    fn adjoint_examples() {
        let c = gen(&[1.0, -2.0, 0.5, 3.0, 0.0]);
        let dense = circ_to_dense(&c);
        for j in 0..5 {
            let mut e = [0.0; 5];
            e[j] = 1.0;
            let col = circ_apply_adjoint(&c, &e).unwrap();
            // C^T e_j is row j of C
            for k in 0..5 {
                assert!((col[k] - dense.get(j, k)).abs() < 1e-13);
            }
        }
        let y = [1.0, 2.0, 3.0];
        let out = circ_apply_adjoint(&Generator::unit(3), &y).unwrap();
        for (a, b) in out.iter().zip(&y) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn partial_examples() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let op = PartialCirculantOp::new(
            Generator::unit(5),
            ShiftAssignment::new(vec![0, 1, 2], 5).unwrap(),
        )
        .unwrap();
        let y = partial_apply(&op, &x).unwrap();
        for (a, b) in y.iter().zip(&x[..3]) {
            assert!((a - b).abs() < 1e-14);
        }
        let swap = PartialCirculantOp::new(
            gen(&[0.0, 1.0]),
            ShiftAssignment::new(vec![1], 2).unwrap(),
        )
        .unwrap();
        let y = partial_apply(&swap, &[7.0, -3.0]).unwrap();
        assert!((y[0] - 7.0).abs() < 1e-14);

        let op = PartialCirculantOp::new(
            gen(&[1.0, 2.0, 3.0]),
            ShiftAssignment::new(vec![2], 3).unwrap(),
        )
        .unwrap();
        assert_eq!(
            partial_to_dense(&op),
            DenseMatrix::from_rows(&[vec![2.0, 3.0, 1.0]]).unwrap()
        );
        let e = PartialCirculantOp::new(
            Generator::unit(4),
            ShiftAssignment::new(vec![0], 4).unwrap(),
        )
        .unwrap();
        assert_eq!(
            partial_to_dense(&e),
            DenseMatrix::from_rows(&[vec![1.0, 0.0, 0.0, 0.0]]).unwrap()
        );
    }

    #[test]
    fn shift_assignment_validation() {
        assert_eq!(
            ShiftAssignment::new(vec![0, 0], 3),
            Err(Error::DuplicateShift(0))
        );
        assert_eq!(
            ShiftAssignment::new(vec![3], 3),
            Err(Error::ShiftOutOfRange { shift: 3, n: 3 })
        );
        assert!(ShiftAssignment::new(vec![], 3).is_err());
        assert!(ShiftAssignment::new(vec![0, 1, 2, 3], 3).is_err());
        assert!(PartialCirculantOp::new(
            Generator::unit(4),
            ShiftAssignment::new(vec![0], 3).unwrap()
        )
        .is_err());
        assert!(Generator::new(vec![]).is_err());
        assert!(Generator::new(vec![f64::INFINITY]).is_err());
    }
}
