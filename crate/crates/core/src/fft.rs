//! Complex FFT of arbitrary length.
//!
//! Power-of-two lengths use an iterative radix-2 transform. Every other
//! length goes through Bluestein's chirp-z reformulation on top of a
//! radix-2 transform of length at least `2n - 1`.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

#[derive(Debug, Clone)]
pub struct FftPlan {
    n: usize,
    kind: Kind,
    real: Option<RealPacking>,
}

/// Real transforms of even length `n` as one complex transform of length `n / 2`.
#[derive(Debug, Clone)]
struct RealPacking {
    half: Kind,
    /// `exp(-2 pi i k / n)` for `k < n / 2`.
    twiddles: Vec<Complex64>,
}

#[derive(Debug, Clone)]
enum Kind {
    Trivial,
    Radix2(Radix2),
    Bluestein(Bluestein),
}

#[derive(Debug, Clone)]
struct Radix2 {
    n: usize,
    log2: u32,
    /// Stage twiddles, contiguous per stage: the stage of butterfly span
    /// `2h` uses `exp(-pi i k / h)` for `k < h`, stored at `h - 1 ..`.
    twiddles: Vec<Complex64>,
}

#[derive(Debug, Clone)]
struct Bluestein {
    inner: Radix2,
    /// `exp(-pi i k^2 / n)` for `k < n`.
    chirp: Vec<Complex64>,
    /// Forward transform of the zero-padded conjugate chirp.
    kernel_hat: Vec<Complex64>,
}

impl Kind {
    fn new(n: usize) -> Self {
        if n <= 1 {
            Kind::Trivial
        } else if n.is_power_of_two() {
            Kind::Radix2(Radix2::new(n))
        } else {
            Kind::Bluestein(Bluestein::new(n))
        }
    }

    fn run(&self, buf: &mut [Complex64]) {
        match self {
            Kind::Trivial => {}
            Kind::Radix2(r) => r.run(buf),
            Kind::Bluestein(b) => b.run(buf),
        }
    }

    fn run_inverse(&self, buf: &mut [Complex64]) {
        for v in buf.iter_mut() {
            *v = v.conj();
        }
        self.run(buf);
        let scale = 1.0 / buf.len() as f64;
        for v in buf.iter_mut() {
            *v = v.conj() * scale;
        }
    }
}

impl FftPlan {
    pub fn new(n: usize) -> Self {
        let real = (n >= 2 && n % 2 == 0).then(|| RealPacking {
            half: Kind::new(n / 2),
            twiddles: (0..n / 2)
                .map(|k| unit(-2.0 * PI * k as f64 / n as f64))
                .collect(),
        });
        Self {
            n,
            kind: Kind::new(n),
            real,
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// In-place forward DFT, `X_k = sum_j x_j exp(-2 pi i jk / n)`.
    ///
    /// # Panics
    /// If `buf.len()` differs from the plan length.
    pub fn forward(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.n, "buffer length must match plan length");
        self.kind.run(buf);
    }

    /// In-place inverse DFT including the `1/n` normalization.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        assert_eq!(buf.len(), self.n, "buffer length must match plan length");
        self.kind.run_inverse(buf);
    }

    /// Number of bins returned by [`FftPlan::forward_half`].
    pub fn half_len(&self) -> usize {
        self.n / 2 + 1
    }

    /// Bins `0..=n/2` of the DFT of a real signal; the rest follow by
    /// conjugate symmetry.
    pub fn forward_half(&self, x: &[f64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.n, "signal length must match plan length");
        let Some(rp) = &self.real else {
            let mut full = self.forward_real(x);
            full.truncate(self.half_len());
            return full;
        };
        let h = self.n / 2;
        let mut z: Vec<Complex64> = x
            .chunks_exact(2)
            .map(|p| Complex64::new(p[0], p[1]))
            .collect();
        rp.half.run(&mut z);
        let zero = Complex64::new(0.0, 0.0);
        let mut out = vec![zero; h + 1];
        out[0] = Complex64::new(z[0].re + z[0].im, 0.0);
        out[h] = Complex64::new(z[0].re - z[0].im, 0.0);
        // Bins k and h - k share the same pair of inputs.
        for k in 1..=h / 2 {
            let (a, b) = (z[k], z[h - k]);
            let (sr, si) = (0.5 * (a.re + b.re), 0.5 * (a.im - b.im));
            let (dr, di) = (0.5 * (a.re - b.re), 0.5 * (a.im + b.im));
            let w = rp.twiddles[k];
            // w * (di - i dr)
            let (tr, ti) = (w.re * di + w.im * dr, w.im * di - w.re * dr);
            out[k] = Complex64::new(sr + tr, si + ti);
            out[h - k] = Complex64::new(sr - tr, ti - si);
        }
        out
    }

    /// Real signal whose DFT has bins `0..=n/2` equal to `spectrum`.
    pub fn inverse_half(&self, spectrum: &[Complex64]) -> Vec<f64> {
        assert_eq!(spectrum.len(), self.half_len(), "expected n/2 + 1 bins");
        let Some(rp) = &self.real else {
            let mut full = Vec::with_capacity(self.n);
            full.extend_from_slice(spectrum);
            for k in self.half_len()..self.n {
                full.push(spectrum[self.n - k].conj());
            }
            return self.inverse_real(full);
        };
        let h = self.n / 2;
        let mut z = vec![Complex64::new(0.0, 0.0); h];
        for k in 0..h {
            let (a, b) = (spectrum[k], spectrum[h - k]);
            let (er, ei) = (0.5 * (a.re + b.re), 0.5 * (a.im - b.im));
            let (dr, di) = (0.5 * (a.re - b.re), 0.5 * (a.im + b.im));
            let w = rp.twiddles[k];
            // odd = conj(w) (dr + i di); z = even + i odd
            let (or, oi) = (w.re * dr + w.im * di, w.re * di - w.im * dr);
            z[k] = Complex64::new(er - oi, ei + or);
        }
        rp.half.run_inverse(&mut z);
        let mut out = Vec::with_capacity(self.n);
        for v in z {
            out.push(v.re);
            out.push(v.im);
        }
        out
    }

    /// Forward transform of a real signal.
    pub fn forward_real(&self, x: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }

    /// Inverse transform, keeping only the real part.
    pub fn inverse_real(&self, mut spectrum: Vec<Complex64>) -> Vec<f64> {
        self.inverse(&mut spectrum);
        spectrum.into_iter().map(|v| v.re).collect()
    }
}

fn unit(angle: f64) -> Complex64 {
    Complex64::new(libm::cos(angle), libm::sin(angle))
}

impl Radix2 {
    fn new(n: usize) -> Self {
        debug_assert!(n.is_power_of_two() && n >= 2);
        let mut twiddles = Vec::with_capacity(n - 1);
        let mut h = 1;
        while h < n {
            twiddles.extend((0..h).map(|k| unit(-PI * k as f64 / h as f64)));
            h <<= 1;
        }
        Self {
            n,
            log2: n.trailing_zeros(),
            twiddles,
        }
    }

    fn run(&self, buf: &mut [Complex64]) {
        let n = self.n;
        let shift = usize::BITS - self.log2;
        for i in 0..n {
            let j = i.reverse_bits() >> shift;
            if i < j {
                buf.swap(i, j);
            }
        }
        for pair in buf.chunks_exact_mut(2) {
            let (a, b) = (pair[0], pair[1]);
            pair[0] = a + b;
            pair[1] = a - b;
        }
        // Stages of span 2h and 4h are fused into one radix-4 pass.
        let mut h = 2;
        while 4 * h <= n {
            let tw1 = &self.twiddles[h - 1..2 * h - 1];
            let tw2 = &self.twiddles[2 * h - 1..4 * h - 1];
            for block in buf.chunks_exact_mut(4 * h) {
                let (left, right) = block.split_at_mut(2 * h);
                let (q0, q1) = left.split_at_mut(h);
                let (q2, q3) = right.split_at_mut(h);
                for k in 0..h {
                    let w1 = tw1[k];
                    let w2 = tw2[k];
                    let t1 = q1[k] * w1;
                    let t3 = q3[k] * w1;
                    let (b0, b1) = (q0[k] + t1, q0[k] - t1);
                    let (b2, b3) = (q2[k] + t3, q2[k] - t3);
                    let u = b2 * w2;
                    // (-i w2) b3
                    let v = b3 * w2;
                    let v = Complex64::new(v.im, -v.re);
                    q0[k] = b0 + u;
                    q2[k] = b0 - u;
                    q1[k] = b1 + v;
                    q3[k] = b1 - v;
                }
            }
            h <<= 2;
        }
        if h < n {
            let tw = &self.twiddles[h - 1..2 * h - 1];
            for block in buf.chunks_exact_mut(2 * h) {
                let (lo, hi) = block.split_at_mut(h);
                for ((a, b), w) in lo.iter_mut().zip(hi.iter_mut()).zip(tw) {
                    let t = *b * w;
                    *b = *a - t;
                    *a += t;
                }
            }
        }
    }
}

impl Bluestein {
    fn new(n: usize) -> Self {
        let size = (2 * n - 1).next_power_of_two();
        let inner = Radix2::new(size);
        let two_n = 2 * n as u64;
        let chirp: Vec<Complex64> = (0..n as u64)
            .map(|k| {
                // k^2 mod 2n keeps the angle small and exact.
                let q = (k * k) % two_n;
                unit(-PI * q as f64 / n as f64)
            })
            .collect();
        let mut kernel = vec![Complex64::new(0.0, 0.0); size];
        kernel[0] = chirp[0].conj();
        for k in 1..n {
            kernel[k] = chirp[k].conj();
            kernel[size - k] = chirp[k].conj();
        }
        inner.run(&mut kernel);
        Self {
            inner,
            chirp,
            kernel_hat: kernel,
        }
    }

    fn run(&self, buf: &mut [Complex64]) {
        let n = buf.len();
        let size = self.inner.n;
        let mut work = vec![Complex64::new(0.0, 0.0); size];
        for k in 0..n {
            work[k] = buf[k] * self.chirp[k];
        }
        self.inner.run(&mut work);
        for (w, k) in work.iter_mut().zip(&self.kernel_hat) {
            *w *= k;
        }
        // inverse of the inner transform via conjugation
        for w in work.iter_mut() {
            *w = w.conj();
        }
        self.inner.run(&mut work);
        let scale = 1.0 / size as f64;
        for k in 0..n {
            buf[k] = work[k].conj() * scale * self.chirp[k];
        }
    }
}
