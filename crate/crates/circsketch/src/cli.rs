//! Command-line interface.
//!
//! Exit status: 0 on success, 1 for I/O and validation errors, 2 when an
//! exact search exceeds its budget, 3 when a solver fails to converge.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use circsketch_core::dataset::{
    gen_synthetic, pca_operator, split, Dataset, SplitSpec, SplitStrategy, SyntheticKind,
};
use circsketch_core::learner::{
    extract_factors, learn_with_observer, LearnConfig, LearnedFactors,
};
use circsketch_core::montecarlo::{ProjectionConfig, TailExperimentConfig, TailSolver};
use circsketch_core::rubik::{
    rubik_score_exact, rubik_score_greedy, GreedyConfig, DEFAULT_EXACT_BUDGET,
};
use circsketch_core::DenseMatrix;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::bench::{self, ComplexityModel, Method};
use crate::dataio::{
    fmt_f64, load_factors, load_matrix, save_factors, save_matrix, write_json, write_table,
    FactorsFile, MatrixFormat,
};
use crate::error::{Error, Result};
use crate::eval;
use crate::manifest::RunManifest;
use crate::parallel;

#[derive(Debug, Parser, Serialize)]
#[command(name = "circsketch", version, about = "Partial circulant approximation of linear maps")]
pub struct Cli {
    /// Worker threads (0 uses every core). Defaults to $CIRCSKETCH_THREADS.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Command {
    /// Optimal partial circulant approximation error of a matrix.
    Score(ScoreArgs),
    /// Learn column-sparse factors M and a circulant generator c.
    Learn(LearnArgs),
    /// Per-point normalized error of learned factors on data.
    Eval(EvalArgs),
    /// Monte Carlo experiments.
    #[command(subcommand)]
    Mc(McCommand),
    /// Generate or transform data.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Time dense, circulant and factored application.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Greedy,
}

#[derive(Debug, Args, Serialize)]
pub struct ScoreArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<MatrixFormat>,
    #[arg(long, value_enum, default_value_t = Mode::Exact)]
    pub mode: Mode,
    /// Largest number of shift assignments the exact search may visit.
    #[arg(long, default_value_t = DEFAULT_EXACT_BUDGET)]
    pub budget: u64,
    #[arg(long, default_value_t = 8)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for score.json and manifest.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct LearnArgs {
    #[arg(long = "A")]
    pub a: PathBuf,
    #[arg(long = "X")]
    pub x: PathBuf,
    #[arg(long, required_unless_present = "lambda_grid", conflicts_with = "lambda_grid")]
    pub lambda: Option<f64>,
    /// `HI:LO:COUNT` for a geometric grid, or a comma-separated list.
    #[arg(long = "lambda-grid")]
    pub lambda_grid: Option<String>,
    #[arg(long, default_value_t = 0.1)]
    pub mu: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub epsilon: f64,
    #[arg(long = "max-outer", default_value_t = 200)]
    pub max_outer: usize,
    #[arg(long = "cg-tol", default_value_t = 1e-10)]
    pub cg_tol: f64,
    #[arg(long = "fista-tol", default_value_t = 1e-9)]
    pub fista_tol: f64,
    #[arg(long = "fista-max-iter", default_value_t = 100_000)]
    pub fista_max_iter: usize,
    #[arg(long = "column-zero-threshold", default_value_t = 1e-6)]
    pub column_zero_threshold: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long = "A")]
    pub a: PathBuf,
    #[arg(long)]
    pub factors: PathBuf,
    /// Test matrix, one data point per column.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 50)]
    pub bins: usize,
    #[arg(long, default_value_t = eval::WITHIN_THRESHOLD)]
    pub threshold: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyArg {
    Head,
    Shuffled,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum McCommand {
    /// Fraction of Gaussian matrices with error at most delta ||A||_F^2.
    Tail(TailArgs),
    /// Norm of a unit vector projected onto random subspaces.
    Projection(ProjectionArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct TailArgs {
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub delta: f64,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Mode::Exact)]
    pub solver: Mode,
    #[arg(long, default_value_t = DEFAULT_EXACT_BUDGET)]
    pub budget: u64,
    #[arg(long, default_value_t = 8)]
    pub restarts: usize,
    /// Accept delta >= 0.125.
    #[arg(long)]
    pub force: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ProjectionArgs {
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub eps: f64,
    #[arg(long, default_value_t = 10_000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct OutputArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<MatrixFormat>,
    /// Where to write the run manifest.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum GenCommand {
    /// Dense form of a random partial circulant matrix.
    Planted {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Matrix of iid standard normal entries.
    Gaussian {
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Points near a random r-dimensional subspace, one per column.
    Subspace {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        r: usize,
        #[arg(long)]
        p: usize,
        #[arg(long)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Top-k principal directions of a data matrix, as rows.
    Pca {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        k: usize,
        /// Column mean of the data; defaults to `<out stem>_mean.<ext>`.
        #[arg(long = "mean-out")]
        mean_out: Option<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Split data columns into train and test sets.
    Split {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        train: usize,
        #[arg(long, value_enum, default_value_t = StrategyArg::Head)]
        strategy: StrategyArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "train-out")]
        train_out: PathBuf,
        #[arg(long = "test-out")]
        test_out: PathBuf,
        #[arg(long, value_enum)]
        format: Option<MatrixFormat>,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
}

#[derive(Debug, Args, Serialize)]
pub struct BenchArgs {
    /// Ambient dimensions; defaults to powers of two from 2^8 to 2^14.
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    #[arg(long, default_value_t = 64)]
    pub m: usize,
    #[arg(long, default_value_t = 8)]
    pub mprime: usize,
    #[arg(long, default_value_t = 21)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match &e {
                Error::Core(circsketch_core::Error::BudgetExceeded { .. }) => {
                    eprintln!("hint: the greedy solver (--mode greedy / --solver greedy) has no budget")
                }
                Error::Core(circsketch_core::Error::NoConvergence { residual, .. }) => {
                    eprintln!("last residual: {residual:e}")
                }
                _ => {}
            }
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let threads = parallel::resolve_threads(cli.threads)?;
    parallel::with_threads(threads, || match &cli.command {
        Command::Score(a) => cmd_score(a),
        Command::Learn(a) => cmd_learn(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Mc(McCommand::Tail(a)) => cmd_mc_tail(a),
        Command::Mc(McCommand::Projection(a)) => cmd_mc_projection(a),
        Command::Gen(g) => cmd_gen(g),
        Command::Bench(a) => cmd_bench(a),
    })?
}

fn make_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn print_json(value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::io("<stdout>", e)),
        _ => Ok(()),
    }
}

fn cmd_score(args: &ScoreArgs) -> Result<()> {
    let mut manifest = RunManifest::new("score", args, Some(args.seed))?;
    let a = manifest.phase("load", || load_matrix(&args.input, args.format))?;
    let result = manifest.phase("solve", || match args.mode {
        Mode::Exact => rubik_score_exact(&a, args.budget),
        Mode::Greedy => rubik_score_greedy(
            &a,
            &GreedyConfig {
                restarts: args.restarts,
                local_search: true,
                seed: args.seed,
            },
        ),
    })?;
    let total = a.frobenius_norm_sq();
    let report = json!({
        "score": result.score,
        "error": result.error,
        "normalized_error": if total > 0.0 { result.error / total } else { 0.0 },
        "frobenius_sq": total,
        "assignment": result.assignment.as_slice(),
        "exact": result.exact,
    });
    print_json(&report)?;
    if let Some(dir) = &args.out {
        make_dir(dir)?;
        let path = dir.join("score.json");
        write_json(&report, &path)?;
        manifest.output(&path);
        manifest.write(&dir.join("manifest.json"))?;
    }
    Ok(())
}

fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::Invalid(format!("cannot parse lambda grid {spec:?}"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() == 3 {
        let hi: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let lo: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
        return parallel::geometric_grid(hi, lo, count);
    }
    spec.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
        .collect()
}

/// One row of the per-iteration trace.
#[derive(Debug, Clone, Copy)]
struct TraceRow {
    iteration: usize,
    objective: f64,
    residual: f64,
    active: usize,
}

fn write_trace(path: &Path, rows: &[TraceRow]) -> Result<()> {
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.iteration.to_string(),
                fmt_f64(r.objective),
                fmt_f64(r.residual),
                r.active.to_string(),
            ]
        })
        .collect();
    write_table(path, &["iteration", "obj", "residual", "mprime"], &table)
}

struct LearnRun {
    lambda: f64,
    trace: Vec<TraceRow>,
    result: std::result::Result<LearnedFactors, circsketch_core::Error>,
}

fn learn_one(a: &DenseMatrix, x: &DenseMatrix, cfg: &LearnConfig) -> LearnRun {
    let mut trace = Vec::new();
    let result = learn_with_observer(a, x, cfg, |s| {
        trace.push(TraceRow {
            iteration: s.iteration,
            objective: s.objective,
            residual: s.residual,
            active: s.active_columns,
        })
    });
    LearnRun {
        lambda: cfg.lambda,
        trace,
        result,
    }
}

/// Writes one run's files into `dir`; returns the summary row.
fn write_learn_run(
    dir: &Path,
    run: &LearnRun,
    cfg: &LearnConfig,
    data_energy: f64,
    manifest: &mut RunManifest,
) -> Result<serde_json::Value> {
    make_dir(dir)?;
    let trace_path = dir.join("trace.csv");
    write_trace(&trace_path, &run.trace)?;
    manifest.output(&trace_path);
    let out = match &run.result {
        Ok(out) => out,
        Err(e) => {
            return Ok(json!({ "lambda": run.lambda, "status": "failed", "error": e.to_string() }));
        }
    };
    let m_path = dir.join("M.rbm");
    save_matrix(&out.m, &m_path, None)?;
    let c_path = dir.join("c.rbm");
    save_matrix(
        &DenseMatrix::from_vec(1, out.generator.len(), out.generator.as_slice().to_vec())?,
        &c_path,
        None,
    )?;
    manifest.output(&m_path);
    manifest.output(&c_path);
    let m_prime = match extract_factors(&out.m, cfg.column_zero_threshold) {
        Ok(cf) => {
            let f_path = dir.join("factors.json");
            save_factors(&FactorsFile::new(&cf, &out.generator), &f_path)?;
            manifest.output(&f_path);
            cf.m_prime()
        }
        Err(circsketch_core::Error::EmptyFactors) => 0,
        Err(e) => return Err(e.into()),
    };
    let residual = *out.residuals.last().expect("trace is never empty");
    let summary = json!({
        "lambda": run.lambda,
        "status": if out.converged { "converged" } else { "max_outer" },
        "iterations": out.iterations,
        "objective": out.trace.last(),
        "train_error": residual,
        "relative_train_error": if data_energy > 0.0 { residual / data_energy } else { 0.0 },
        "mprime": m_prime,
    });
    let s_path = dir.join("summary.json");
    write_json(&summary, &s_path)?;
    manifest.output(&s_path);
    Ok(summary)
}

fn cmd_learn(args: &LearnArgs) -> Result<()> {
    let mut manifest = RunManifest::new("learn", args, Some(args.seed))?;
    let (a, x) = manifest.phase("load", || -> Result<_> {
        Ok((load_matrix(&args.a, None)?, load_matrix(&args.x, None)?))
    })?;
    let base = LearnConfig {
        lambda: args.lambda.unwrap_or(1.0),
        mu: args.mu,
        epsilon: args.epsilon,
        max_outer: args.max_outer,
        cg_tol: args.cg_tol,
        fista_tol: args.fista_tol,
        fista_max_iter: args.fista_max_iter,
        column_zero_threshold: args.column_zero_threshold,
        seed: args.seed,
        ..LearnConfig::new(1.0)
    };
    base.validate()?;
    let data_energy = a.matmul(&x)?.frobenius_norm_sq();
    make_dir(&args.out)?;

    let mut first_error = None;
    match (&args.lambda, &args.lambda_grid) {
        (Some(_), _) => {
            let run = manifest.phase("learn", || learn_one(&a, &x, &base));
            let summary = write_learn_run(&args.out, &run, &base, data_energy, &mut manifest)?;
            print_json(&summary)?;
            first_error = run.result.err();
        }
        (None, Some(grid)) => {
            let lambdas = parse_grid(grid)?;
            let runs: Vec<LearnRun> = manifest.phase("learn", || {
                use rayon::prelude::*;
                lambdas
                    .par_iter()
                    .map(|&lambda| learn_one(&a, &x, &LearnConfig { lambda, ..base }))
                    .collect()
            });
            let mut rows = Vec::new();
            for (i, run) in runs.into_iter().enumerate() {
                let cfg = LearnConfig {
                    lambda: run.lambda,
                    ..base
                };
                let s = write_learn_run(
                    &args.out.join(format!("lambda_{i:02}")),
                    &run,
                    &cfg,
                    data_energy,
                    &mut manifest,
                )?;
                rows.push(vec![
                    i.to_string(),
                    fmt_f64(run.lambda),
                    s["mprime"].as_u64().map_or(String::new(), |v| v.to_string()),
                    s["train_error"].as_f64().map_or(String::new(), fmt_f64),
                    s["relative_train_error"].as_f64().map_or(String::new(), fmt_f64),
                    s["iterations"].as_u64().map_or(String::new(), |v| v.to_string()),
                    s["status"].as_str().unwrap_or_default().to_string(),
                ]);
                if first_error.is_none() {
                    first_error = run.result.err();
                }
            }
            let path = args.out.join("sweep.csv");
            write_table(
                &path,
                &[
                    "index",
                    "lambda",
                    "mprime",
                    "train_error",
                    "relative_train_error",
                    "iterations",
                    "status",
                ],
                &rows,
            )?;
            manifest.output(&path);
        }
        (None, None) => unreachable!("clap requires --lambda or --lambda-grid"),
    }
    manifest.write(&args.out.join("manifest.json"))?;
    match first_error {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let mut manifest = RunManifest::new("eval", args, None)?;
    let (a, (cf, gen), data) = manifest.phase("load", || -> Result<_> {
        Ok((
            load_matrix(&args.a, None)?,
            load_factors(&args.factors)?,
            load_matrix(&args.data, None)?,
        ))
    })?;
    let ev = manifest.phase("eval", || eval::evaluate(&a, &cf, &gen, &data))?;
    let summary = eval::summarize(&ev.errors, ev.summary.skipped_zero, args.threshold)?;
    let (bins, zero_errors) = eval::log_histogram(&ev.errors, args.bins)?;
    make_dir(&args.out)?;

    let err_path = args.out.join("errors.csv");
    let rows: Vec<Vec<String>> = ev
        .errors
        .iter()
        .map(|e| vec![e.column.to_string(), fmt_f64(e.error)])
        .collect();
    write_table(&err_path, &["column", "error"], &rows)?;
    let hist_path = args.out.join("histogram.csv");
    let rows: Vec<Vec<String>> = bins
        .iter()
        .map(|b| vec![fmt_f64(b.log10_low), fmt_f64(b.log10_high), b.count.to_string()])
        .collect();
    write_table(&hist_path, &["log10_low", "log10_high", "count"], &rows)?;
    let report = json!({
        "summary": summary,
        "m": cf.m(),
        "mprime": cf.m_prime(),
        "n": cf.n(),
        "zero_error_count": zero_errors,
        "metric": "||A x - P S C x||^2 / ||x||^2 on uncentered data",
    });
    let sum_path = args.out.join("summary.json");
    write_json(&report, &sum_path)?;
    print_json(&report)?;
    for p in [&err_path, &hist_path, &sum_path] {
        manifest.output(p);
    }
    manifest.write(&args.out.join("manifest.json"))
}

fn cmd_mc_tail(args: &TailArgs) -> Result<()> {
    let mut manifest = RunManifest::new("mc tail", args, Some(args.seed))?;
    let cfg = TailExperimentConfig {
        solver: match args.solver {
            Mode::Exact => TailSolver::Exact {
                budget: args.budget,
            },
            Mode::Greedy => TailSolver::Greedy {
                restarts: args.restarts,
                local_search: true,
            },
        },
        allow_exploratory: args.force,
        ..TailExperimentConfig::new(args.m, args.n, args.delta, args.trials, args.seed)
    };
    if args.force && args.delta >= circsketch_core::montecarlo::DELTA_LIMIT {
        eprintln!("warning: delta >= 0.125 is outside the range covered by the tail bound");
    }
    let res = manifest.phase("trials", || parallel::run_tail_experiment(&cfg))?;
    make_dir(&args.out)?;
    let report = json!({
        "m": args.m,
        "n": args.n,
        "delta": args.delta,
        "seed": args.seed,
        "solver": res.solver,
        "hits": res.hits,
        "trials": res.trials,
        "hit_fraction": res.hits as f64 / res.trials as f64,
        "ratio_mean": res.ratio_mean.mean,
        "ratio_std_error": res.ratio_mean.std_error,
        "ratio_ci95": [res.ratio_mean.ci_low, res.ratio_mean.ci_high],
        "ratio_samples": res.ratio_samples,
    });
    let json_path = args.out.join("tail.json");
    write_json(&report, &json_path)?;
    let csv_path = args.out.join("trials.csv");
    let rows: Vec<Vec<String>> = res
        .records
        .iter()
        .map(|r| {
            vec![
                r.index.to_string(),
                fmt_f64(r.frobenius_sq),
                fmt_f64(r.error),
                fmt_f64(r.ratio),
                (r.hit as u8).to_string(),
            ]
        })
        .collect();
    write_table(&csv_path, &["trial", "frobenius_sq", "error", "ratio", "hit"], &rows)?;
    let mut brief = report.clone();
    brief.as_object_mut().unwrap().remove("ratio_samples");
    print_json(&brief)?;
    manifest.output(&json_path);
    manifest.output(&csv_path);
    manifest.write(&args.out.join("manifest.json"))
}

fn cmd_mc_projection(args: &ProjectionArgs) -> Result<()> {
    let mut manifest = RunManifest::new("mc projection", args, Some(args.seed))?;
    let cfg = ProjectionConfig {
        d: args.d,
        k: args.k,
        eps: args.eps,
        trials: args.trials,
        seed: args.seed,
    };
    let res = manifest.phase("trials", || parallel::run_projection_experiment(&cfg))?;
    make_dir(&args.out)?;
    let report = json!({
        "d": args.d,
        "k": args.k,
        "eps": args.eps,
        "trials": args.trials,
        "seed": args.seed,
        "threshold": cfg.threshold(),
        "empirical_tail": res.empirical_tail,
        "bound": res.bound,
        "mean_sq": res.mean_sq,
        "mean_sq_std_error": res.mean_sq_std_error,
        "expected_mean_sq": args.k as f64 / args.d as f64,
    });
    let json_path = args.out.join("projection.json");
    write_json(&report, &json_path)?;
    let csv_path = args.out.join("trials.csv");
    let rows: Vec<Vec<String>> = res
        .norms_sq
        .iter()
        .enumerate()
        .map(|(i, w)| vec![i.to_string(), fmt_f64(*w)])
        .collect();
    write_table(&csv_path, &["trial", "norm_sq"], &rows)?;
    print_json(&report)?;
    manifest.output(&json_path);
    manifest.output(&csv_path);
    manifest.write(&args.out.join("manifest.json"))
}

fn finish_gen(mut manifest: RunManifest, outputs: &[&Path], at: Option<&PathBuf>) -> Result<()> {
    for p in outputs {
        manifest.output(p);
    }
    match at {
        Some(path) => manifest.write(path),
        None => Ok(()),
    }
}

fn default_mean_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("pca");
    let name = match out.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}_mean.{ext}"),
        None => format!("{stem}_mean"),
    };
    out.with_file_name(name)
}

fn cmd_gen(cmd: &GenCommand) -> Result<()> {
    let (name, seed) = match cmd {
        GenCommand::Planted { seed, .. } => ("gen planted", Some(*seed)),
        GenCommand::Gaussian { seed, .. } => ("gen gaussian", Some(*seed)),
        GenCommand::Subspace { seed, .. } => ("gen subspace", Some(*seed)),
        GenCommand::Pca { .. } => ("gen pca", None),
        GenCommand::Split { seed, .. } => ("gen split", Some(*seed)),
    };
    let manifest = RunManifest::new(name, cmd, seed)?;
    let synthetic = |kind: SyntheticKind, seed: u64, output: &OutputArgs| -> Result<()> {
        let mat = gen_synthetic(kind, seed)?;
        save_matrix(&mat, &output.out, output.format)?;
        Ok(())
    };
    match cmd {
        GenCommand::Planted { m, n, seed, output } => {
            synthetic(SyntheticKind::PlantedPc { m: *m, n: *n }, *seed, output)?;
            finish_gen(manifest, &[&output.out], output.manifest.as_ref())
        }
        GenCommand::Gaussian {
            rows,
            cols,
            seed,
            output,
        } => {
            synthetic(
                SyntheticKind::Gaussian {
                    rows: *rows,
                    cols: *cols,
                },
                *seed,
                output,
            )?;
            finish_gen(manifest, &[&output.out], output.manifest.as_ref())
        }
        GenCommand::Subspace {
            n,
            r,
            p,
            sigma,
            seed,
            output,
        } => {
            synthetic(
                SyntheticKind::SubspacePlusNoise {
                    n: *n,
                    r: *r,
                    p: *p,
                    sigma: *sigma,
                },
                *seed,
                output,
            )?;
            finish_gen(manifest, &[&output.out], output.manifest.as_ref())
        }
        GenCommand::Pca {
            data,
            k,
            mean_out,
            output,
        } => {
            let x = load_matrix(data, None)?;
            let pca = pca_operator(&x, *k)?;
            save_matrix(&pca.components, &output.out, output.format)?;
            let mean_path = mean_out.clone().unwrap_or_else(|| default_mean_path(&output.out));
            let mean = DenseMatrix::from_vec(pca.mean.len(), 1, pca.mean)?;
            save_matrix(&mean, &mean_path, output.format)?;
            finish_gen(manifest, &[&output.out, &mean_path], output.manifest.as_ref())
        }
        GenCommand::Split {
            data,
            train,
            strategy,
            seed,
            train_out,
            test_out,
            format,
            manifest: at,
        } => {
            let ds = Dataset::new(load_matrix(data, None)?, None)?;
            let spec = SplitSpec {
                train_count: *train,
                seed: *seed,
                strategy: match strategy {
                    StrategyArg::Head => SplitStrategy::Head,
                    StrategyArg::Shuffled => SplitStrategy::Shuffled,
                },
            };
            let (tr, te) = split(&ds, &spec)?;
            save_matrix(tr.x(), train_out, *format)?;
            save_matrix(te.x(), test_out, *format)?;
            finish_gen(manifest, &[train_out, test_out], at.as_ref())
        }
    }
}

fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let mut manifest = RunManifest::new("bench", args, Some(args.seed))?;
    let ns = args
        .sizes
        .clone()
        .unwrap_or_else(|| (8..=14).map(|e| 1usize << e).collect());
    let sizes: Vec<(usize, usize, usize)> = ns.iter().map(|&n| (n, args.m, args.mprime)).collect();
    // Timing stays on the calling thread regardless of --threads.
    let records = manifest.phase("bench", || bench::run_apply_bench(&sizes, args.reps, args.seed))?;
    make_dir(&args.out)?;
    let csv_path = args.out.join("bench.csv");
    let rows: Vec<Vec<String>> = records.iter().map(|r| r.csv_row()).collect();
    write_table(&csv_path, &bench::CSV_HEADER, &rows)?;
    let mut fits = serde_json::Map::new();
    for (method, model) in [
        (Method::Dense, ComplexityModel::Mn),
        (Method::Circulant, ComplexityModel::Nlogn),
        (Method::Factored, ComplexityModel::MmprimePlusNlogn),
    ] {
        let value = match bench::fit_complexity(&bench::records_for(&records, method), model) {
            Ok(fit) => serde_json::to_value(fit)?,
            Err(e) => json!({ "error": e.to_string() }),
        };
        fits.insert(method.as_str().to_string(), value);
    }
    let fit_path = args.out.join("fits.json");
    write_json(&fits, &fit_path)?;
    print_json(&fits)?;
    manifest.output(&csv_path);
    manifest.output(&fit_path);
    manifest.write(&args.out.join("manifest.json"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_forms() {
        assert_eq!(parse_grid("1,0.5, 0.25").unwrap(), vec![1.0, 0.5, 0.25]);
        let g = parse_grid("10:0.1:3").unwrap();
        assert_eq!(g.len(), 3);
        assert!((g[1] - 1.0).abs() < 1e-12);
        assert!(parse_grid("a,b").is_err());
    }

    #[test]
    fn mean_path_default() {
        assert_eq!(
            default_mean_path(Path::new("/t/A.rbm")),
            PathBuf::from("/t/A_mean.rbm")
        );
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn usage_errors_exit_with_one() {
        assert_eq!(run(["circsketch", "score"]), 1);
        assert_eq!(run(["circsketch", "--help"]), 0);
    }
}
