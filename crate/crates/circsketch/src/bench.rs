//! Timing of dense, circulant and factored operator application.

use std::hint::black_box;
use std::time::{Duration, Instant};

use circsketch_core::learner::{factored_flops, CompressedFactors, FactoredOperator};
use circsketch_core::{circ_row, rng, Circulant, Generator};
use serde::Serialize;

use crate::error::{Error, Result};

pub const MIN_REPS: usize = 5;
/// Target duration of one timed batch.
const BATCH_TARGET: Duration = Duration::from_micros(500);
const WARMUP: Duration = Duration::from_millis(20);
/// Tolerance of the pre-timing correctness check, relative to `||c|| ||x||`.
pub const CHECK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dense,
    Circulant,
    Factored,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Dense => "dense",
            Method::Circulant => "circulant",
            Method::Factored => "factored",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRecord {
    pub method: Method,
    pub n: usize,
    pub m: usize,
    pub mprime: usize,
    pub reps: usize,
    pub median_ns: f64,
    pub p10_ns: f64,
    pub p90_ns: f64,
    pub flops_model: f64,
}

pub const CSV_HEADER: [&str; 9] = [
    "method",
    "n",
    "m",
    "mprime",
    "reps",
    "median_ns",
    "p10_ns",
    "p90_ns",
    "flops_model",
];

impl BenchRecord {
    pub fn csv_row(&self) -> Vec<String> {
        vec![
            self.method.as_str().to_string(),
            self.n.to_string(),
            self.m.to_string(),
            self.mprime.to_string(),
            self.reps.to_string(),
            crate::dataio::fmt_f64(self.median_ns),
            crate::dataio::fmt_f64(self.p10_ns),
            crate::dataio::fmt_f64(self.p90_ns),
            crate::dataio::fmt_f64(self.flops_model),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ComplexityModel {
    /// `m n`
    Mn,
    /// `n log2 n`
    Nlogn,
    /// `m m' + n log2 n`
    MmprimePlusNlogn,
}

fn nlogn(n: usize) -> f64 {
    let n = n as f64;
    if n > 1.0 {
        n * n.log2()
    } else {
        1.0
    }
}

impl ComplexityModel {
    pub fn count(&self, n: usize, m: usize, mprime: usize) -> f64 {
        match self {
            ComplexityModel::Mn => (m * n) as f64,
            ComplexityModel::Nlogn => nlogn(n),
            ComplexityModel::MmprimePlusNlogn => factored_flops(n, m, mprime),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Least-squares fit of `log(median_ns)` against `log(model count)`.
pub fn fit_complexity(records: &[BenchRecord], model: ComplexityModel) -> Result<Fit> {
    if records.len() < 4 {
        return Err(Error::Invalid("complexity fit needs at least 4 points".into()));
    }
    let xs: Vec<f64> = records
        .iter()
        .map(|r| model.count(r.n, r.m, r.mprime).ln())
        .collect();
    let ys: Vec<f64> = records.iter().map(|r| r.median_ns.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if !(sxx > 0.0 && syy > 0.0) || !(sxx.is_finite() && syy.is_finite()) {
        return Err(Error::Invalid(
            "complexity fit needs non-constant, positive sizes and times".into(),
        ));
    }
    let slope = sxy / sxx;
    Ok(Fit {
        slope,
        intercept: my - slope * mx,
        r2: (sxy * sxy) / (sxx * syy),
    })
}

/// Per-call nanoseconds of `f`: warmup, batch calibration, then `reps` batches.
fn time_calls(reps: usize, mut f: impl FnMut()) -> Vec<f64> {
    let start = Instant::now();
    while start.elapsed() < WARMUP {
        f();
    }
    let mut batch = 1usize;
    loop {
        let t = Instant::now();
        for _ in 0..batch {
            f();
        }
        if t.elapsed() >= BATCH_TARGET || batch >= 1 << 24 {
            break;
        }
        batch *= 2;
    }
    let mut samples: Vec<f64> = (0..reps)
        .map(|_| {
            let t = Instant::now();
            for _ in 0..batch {
                f();
            }
            t.elapsed().as_nanos() as f64 / batch as f64
        })
        .collect();
    samples.sort_by(f64::total_cmp);
    samples
}

fn record(method: Method, n: usize, m: usize, mprime: usize, samples: &[f64]) -> BenchRecord {
    let q = |p: f64| crate::eval::quantile(samples, p).max(f64::MIN_POSITIVE);
    let flops_model = match method {
        Method::Dense => ComplexityModel::Mn.count(n, m, mprime),
        Method::Circulant => ComplexityModel::Nlogn.count(n, m, mprime),
        Method::Factored => ComplexityModel::MmprimePlusNlogn.count(n, m, mprime),
    };
    BenchRecord {
        method,
        n,
        m,
        mprime,
        reps: samples.len(),
        median_ns: q(0.5),
        p10_ns: q(0.1),
        p90_ns: q(0.9),
        flops_model,
    }
}

/// `C x` evaluated entry by entry from the generator, without FFTs.
fn direct_circulant(c: &[f64], x: &[f64]) -> Vec<f64> {
    let n = c.len();
    (0..n)
        .map(|j| {
            let (head, tail) = c.split_at(n - j);
            tail.iter()
                .zip(&x[..j])
                .chain(head.iter().zip(&x[j..]))
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect()
}

fn check(name: &str, n: usize, fast: &[f64], slow: &[f64], scale: f64) -> Result<()> {
    let dev = fast
        .iter()
        .zip(slow)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if dev > CHECK_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Invalid(format!(
            "{name} apply at n={n} deviates from the dense oracle by {dev:e}"
        )));
    }
    Ok(())
}

/// Times the three apply paths for every `(n, m, m')`.
///
/// Before timing, the fast paths are checked once against dense evaluation.
pub fn run_apply_bench(
    sizes: &[(usize, usize, usize)],
    reps: usize,
    seed: u64,
) -> Result<Vec<BenchRecord>> {
    if reps < MIN_REPS {
        return Err(Error::Invalid(format!("reps must be at least {MIN_REPS}")));
    }
    let mut out = Vec::with_capacity(3 * sizes.len());
    for (idx, &(n, m, mprime)) in sizes.iter().enumerate() {
        if n == 0 || m == 0 || mprime == 0 || mprime > n {
            return Err(Error::Invalid(format!(
                "invalid bench size (n={n}, m={m}, m'={mprime})"
            )));
        }
        let mut r = rng::seeded(rng::child_seed(seed, idx as u64));
        let a = rng::gaussian_matrix(&mut r, m, n);
        let gen = Generator::new(rng::gaussian_vec(&mut r, n))?;
        let mut shifts = rng::distinct_indices(&mut r, n, mprime);
        shifts.sort_unstable();
        let p = rng::gaussian_matrix(&mut r, m, mprime);
        let x = rng::gaussian_vec(&mut r, n);
        let circ = Circulant::new(&gen);
        let factored = FactoredOperator::new(CompressedFactors::new(p.clone(), shifts.clone(), n)?, &gen)?;

        let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        check(
            "circulant",
            n,
            &circ.apply(&x)?,
            &direct_circulant(gen.as_slice(), &x),
            gen.norm() * xn,
        )?;
        let sc_x: Vec<f64> = shifts
            .iter()
            .map(|&s| {
                circ_row(&gen, s)
                    .map(|row| row.iter().zip(&x).map(|(a, b)| a * b).sum())
            })
            .collect::<circsketch_core::Result<_>>()?;
        check(
            "factored",
            n,
            &factored.apply(&x)?,
            &p.matvec(&sc_x)?,
            p.frobenius_norm() * gen.norm() * xn,
        )?;

        let dense_t = time_calls(reps, || {
            black_box(a.matvec(black_box(&x)).unwrap());
        });
        out.push(record(Method::Dense, n, m, mprime, &dense_t));
        let circ_t = time_calls(reps, || {
            black_box(circ.apply(black_box(&x)).unwrap());
        });
        out.push(record(Method::Circulant, n, m, mprime, &circ_t));
        let fact_t = time_calls(reps, || {
            black_box(factored.apply(black_box(&x)).unwrap());
        });
        out.push(record(Method::Factored, n, m, mprime, &fact_t));
    }
    Ok(out)
}

pub fn records_for(records: &[BenchRecord], method: Method) -> Vec<BenchRecord> {
    records.iter().filter(|r| r.method == method).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(model: ComplexityModel, ns: &[usize]) -> Vec<BenchRecord> {
        ns.iter()
            .map(|&n| {
                let t = 3.5 * model.count(n, 16, 4);
                BenchRecord {
                    method: Method::Dense,
                    n,
                    m: 16,
                    mprime: 4,
                    reps: 5,
                    median_ns: t,
                    p10_ns: t,
                    p90_ns: t,
                    flops_model: model.count(n, 16, 4),
                }
            })
            .collect()
    }

    #[test]
    fn proportional_times_fit_exactly() {
        for model in [
            ComplexityModel::Mn,
            ComplexityModel::Nlogn,
            ComplexityModel::MmprimePlusNlogn,
        ] {
            let fit = fit_complexity(&synthetic(model, &[64, 128, 256, 512, 1024]), model).unwrap();
            assert!((fit.slope - 1.0).abs() <= 1e-9, "{model:?} {fit:?}");
            assert!((fit.r2 - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn shuffled_pairing_still_reports() {
        let mut recs = synthetic(ComplexityModel::Mn, &[64, 128, 256, 512, 1024]);
        let times: Vec<f64> = recs.iter().map(|r| r.median_ns).collect();
        for (r, t) in recs.iter_mut().zip([times[3], times[0], times[4], times[1], times[2]]) {
            r.median_ns = t;
        }
        let fit = fit_complexity(&recs, ComplexityModel::Mn).unwrap();
        assert!(fit.r2.is_finite() && (0.0..=1.0).contains(&fit.r2));
    }

    #[test]
    fn degenerate_fits_are_errors() {
        let recs = synthetic(ComplexityModel::Mn, &[64, 128, 256]);
        assert!(fit_complexity(&recs, ComplexityModel::Mn).is_err());
        let same = synthetic(ComplexityModel::Mn, &[64, 64, 64, 64]);
        assert!(fit_complexity(&same, ComplexityModel::Mn).is_err());
    }

    #[test]
    fn direct_circulant_agrees_with_definition() {
        let c = [1.0, 2.0, 3.0];
        assert_eq!(direct_circulant(&c, &[1.0, 0.0, 0.0]), vec![1.0, 3.0, 2.0]);
    }

    #[test]
    fn small_bench_runs() {
        let recs = run_apply_bench(&[(16, 4, 2), (32, 4, 3)], 5, 1).unwrap();
        assert_eq!(recs.len(), 6);
        assert!(recs.iter().all(|r| r.median_ns > 0.0 && r.p10_ns <= r.p90_ns));
        assert!(run_apply_bench(&[(16, 4, 2)], 4, 1).is_err());
        assert!(run_apply_bench(&[(4, 2, 5)], 5, 1).is_err());
    }
}
