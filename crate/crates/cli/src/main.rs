//! `dipca` command-line tool.
//!
//! Exit codes: 0 success, 1 input error, 2 solver did not converge,
//! 3 the checked point is not a local maximum.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dipca::bench::{gen_synthetic, preset, run_benchmark, SyntheticConfig, PRESET_NAMES};
use dipca::deflate::{extract_components, reconstruct};
use dipca::io::{from_json, read_csv_matrix, to_json_pretty, write_csv_matrix, FitModel};
use dipca::secondorder::classify_fixed_point;
use dipca::solver::{first_order_residuals, solve_data};
use dipca::{
    build_kernels, center_columns, Algorithm, SolveOptions, TimeSeriesData,
};
use ndarray::Array2;
use serde_json::json;

#[derive(Parser)]
#[command(name = "dipca", version, about = "Dynamic inner PCA for multivariate time series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a single latent component and write the model as JSON.
    Fit(FitArgs),
    /// Extract several components by deflation.
    Extract(ExtractArgs),
    /// Classify a fitted point with the second-order test.
    Check(CheckArgs),
    /// Generate a synthetic data set as CSV.
    Gen(GenArgs),
    /// Run a benchmark sweep and write a CSV report.
    Bench(BenchArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Data CSV: one row per time sample, one column per feature.
    input: PathBuf,
    /// The first line of the CSV is a header.
    #[arg(long)]
    header: bool,
}

#[derive(Args)]
struct SolverArgs {
    /// Algorithm: 1 (joint fixed point) or 2 (coordinate maximization).
    #[arg(long, default_value = "2")]
    algo: Algorithm,
    /// Lag order s of the latent AR model.
    #[arg(long, default_value_t = 4)]
    lags: usize,
    /// Convergence tolerance on the KKT residual.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Seed for the random initial point.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    max_outer: usize,
    #[arg(long, default_value_t = 1_000)]
    max_power: usize,
    /// Mean-center columns before fitting (default).
    #[arg(long, overrides_with = "no_center")]
    center: bool,
    /// Use the data as given.
    #[arg(long)]
    no_center: bool,
}

impl SolverArgs {
    fn options(&self) -> Result<SolveOptions> {
        if self.lags == 0 {
            bail!("--lags must be at least 1");
        }
        let opts = SolveOptions {
            eps_tol: self.tol,
            max_outer: self.max_outer,
            max_power: self.max_power,
            seed: self.seed,
            ..Default::default()
        };
        opts.validate()?;
        Ok(opts)
    }

    fn centered(&self) -> bool {
        !self.no_center
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Output path for the model JSON (stdout if omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ExtractArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Number of components (default min(m, 10)).
    #[arg(long)]
    components: Option<usize>,
    /// Output path for the model JSON (stdout if omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Write the score matrix as CSV, one column per component.
    #[arg(long)]
    scores: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    /// Model JSON written by `fit`.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    input: InputArgs,
    /// Also write the verdict JSON to this path.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    /// Named sweep to draw the instance from.
    #[arg(long)]
    preset: Option<String>,
    /// 1-based instance within the preset.
    #[arg(long, default_value_t = 1)]
    instance: usize,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    lags: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of planted components.
    #[arg(long)]
    planted: Option<usize>,
    /// Write a header line `x1,…,xm`.
    #[arg(long)]
    header: bool,
    /// Output CSV path (stdout if omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Write the first planted component as a model JSON.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value = "default")]
    preset: String,
    /// Restrict to one algorithm (both by default).
    #[arg(long)]
    algo: Option<Algorithm>,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Worker threads; instances are independent.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Output CSV path (stdout if omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// JSON summary with cumulative curves.
    #[arg(long)]
    summary: Option<PathBuf>,
}

enum Outcome {
    Ok,
    NotConverged,
    NotMax,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Extract(a) => cmd_extract(a),
        Command::Check(a) => cmd_check(a),
        Command::Gen(a) => cmd_gen(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::NotConverged) => ExitCode::from(2),
        Ok(Outcome::NotMax) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn read_matrix(args: &InputArgs) -> Result<Array2<f64>> {
    let file = File::open(&args.input)
        .with_context(|| format!("cannot open {}", args.input.display()))?;
    read_csv_matrix(BufReader::new(file), args.header)
        .with_context(|| format!("reading {}", args.input.display()))
}

fn load_data(args: &InputArgs, lags: usize, center: bool) -> Result<TimeSeriesData> {
    let data = TimeSeriesData::new(read_matrix(args)?, lags)?;
    Ok(if center { center_columns(&data) } else { data })
}

/// Writes to a temporary file next to `path` and renames it into place.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("cannot create a file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn csv_text(header: Option<&[String]>, mat: &Array2<f64>) -> Result<String> {
    let mut buf = Vec::new();
    write_csv_matrix(&mut buf, header, mat.view())?;
    Ok(String::from_utf8(buf)?)
}

fn cmd_fit(a: FitArgs) -> Result<Outcome> {
    let opts = a.solver.options()?;
    let centered = a.solver.centered();
    let data = load_data(&a.input, a.solver.lags, centered)?;
    let report = solve_data(&data, a.solver.algo, &opts)?;
    let model = FitModel::from_report(&report, data.samples(), centered);
    emit(a.output.as_deref(), &(to_json_pretty(&model)? + "\n"))?;
    eprintln!(
        "algorithm {}: lambda {:.6e}, residual {:.3e}, {} iterations",
        model.algorithm, model.lambda, model.residual_inf, model.iterations
    );
    if report.converged {
        Ok(Outcome::Ok)
    } else {
        match &report.diagnostic {
            Some(d) => eprintln!("not converged: {d}"),
            None => eprintln!("not converged"),
        }
        Ok(Outcome::NotConverged)
    }
}

fn cmd_extract(a: ExtractArgs) -> Result<Outcome> {
    let opts = a.solver.options()?;
    let centered = a.solver.centered();
    let raw = read_matrix(&a.input)?;
    let data = TimeSeriesData::new(raw.clone(), a.solver.lags)?;
    let data = if centered { center_columns(&data) } else { data };
    let k = a.components.unwrap_or_else(|| data.features().min(10));
    let model = extract_components(&data, k, &opts, a.solver.algo)?;

    let xhat = reconstruct(&model, k)?;
    let fro = |m: &Array2<f64>| m.iter().map(|v| v * v).sum::<f64>().sqrt();
    let err = fro(&(&raw - &xhat)) / fro(&raw).max(f64::MIN_POSITIVE);
    eprintln!("reconstruction relative error with {k} components: {err:.3e}");

    if let Some(path) = &a.scores {
        let header: Vec<String> = (1..=k).map(|j| format!("t{j}")).collect();
        write_atomic(path, csv_text(Some(&header), &model.score_matrix())?.as_bytes())?;
    }
    emit(a.output.as_deref(), &(to_json_pretty(&model)? + "\n"))?;

    let failed: Vec<String> = model
        .components
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.converged)
        .map(|(j, c)| match &c.diagnostic {
            Some(d) => format!("component {}: {d}", j + 1),
            None => format!("component {}", j + 1),
        })
        .collect();
    if failed.is_empty() {
        Ok(Outcome::Ok)
    } else {
        eprintln!("not converged: {}", failed.join("; "));
        Ok(Outcome::NotConverged)
    }
}

fn cmd_check(a: CheckArgs) -> Result<Outcome> {
    let text = std::fs::read_to_string(&a.model)
        .with_context(|| format!("cannot read {}", a.model.display()))?;
    let model: FitModel =
        from_json(&text).with_context(|| format!("parsing {}", a.model.display()))?;
    let data = load_data(&a.input, model.s, model.centered)?;
    if data.features() != model.m {
        bail!(
            "model has {} features but the data has {}",
            model.m,
            data.features()
        );
    }
    let kernels = build_kernels(&data);
    let cls = classify_fixed_point(model.w().view(), model.beta().view(), &kernels)?;
    let verdict = json!({
        "inertia": cls.inertia,
        "is_max": cls.is_max,
        "min_reduced_eigenvalue": cls.min_reduced_eigenvalue(),
        "max_reduced_eigenvalue": cls.max_reduced_eigenvalue(),
        "fraction_negative": cls.fraction_negative,
        "routes_agree": cls.routes_agree(),
        "lambda": cls.lambda,
        "kkt_residual": cls.kkt_residual,
    });
    let text = serde_json::to_string_pretty(&verdict)? + "\n";
    print!("{text}");
    if let Some(p) = &a.output {
        write_atomic(p, text.as_bytes())?;
    }
    Ok(if cls.is_max { Outcome::Ok } else { Outcome::NotMax })
}

fn cmd_gen(a: GenArgs) -> Result<Outcome> {
    let mut cfg = match &a.preset {
        Some(name) => {
            let sweep = preset(name).with_context(|| unknown_preset(name))?;
            if a.instance == 0 || a.instance > sweep.len() {
                bail!("--instance must be in 1..={}", sweep.len());
            }
            sweep[a.instance - 1].clone()
        }
        None => SyntheticConfig {
            seed: 42,
            ..Default::default()
        },
    };
    if let Some(v) = a.m {
        cfg.m = v;
    }
    if let Some(v) = a.n {
        cfg.n = v;
    }
    if let Some(v) = a.lags {
        cfg.s = v;
    }
    if let Some(v) = a.sigma {
        cfg.sigma = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.planted {
        cfg.planted_components = v;
    }
    let (data, planted) = gen_synthetic(&cfg)?;
    let header: Option<Vec<String>> =
        a.header.then(|| (1..=cfg.m).map(|j| format!("x{j}")).collect());
    let x = data.x();
    emit(a.output.as_deref(), &csv_text(header.as_deref(), &x.to_owned())?)?;
    eprintln!("generated {}x{} data (s = {})", x.nrows(), x.ncols(), cfg.s);

    if let Some(path) = &a.truth {
        let (w, beta) = (&planted.w[0], &planted.beta[0]);
        let (rw, rb) = first_order_residuals(w.view(), beta.view(), &build_kernels(&data));
        let truth = FitModel {
            algorithm: Algorithm::II,
            m: cfg.m,
            n: cfg.n,
            s: cfg.s,
            w: w.to_vec(),
            beta: beta.to_vec(),
            lambda: planted.lambda[0],
            residual_inf: rw.max(rb),
            converged: true,
            iterations: 0,
            wall_time_s: 0.0,
            lambda_history: Vec::new(),
            centered: false,
            diagnostic: None,
        };
        write_atomic(path, (to_json_pretty(&truth)? + "\n").as_bytes())?;
    }
    Ok(Outcome::Ok)
}

fn unknown_preset(name: &str) -> String {
    format!(
        "unknown preset '{name}' (available: {})",
        PRESET_NAMES.join(", ")
    )
}

fn cmd_bench(a: BenchArgs) -> Result<Outcome> {
    let instances = preset(&a.preset).with_context(|| unknown_preset(&a.preset))?;
    let algorithms = match a.algo {
        Some(x) => vec![x],
        None => vec![Algorithm::I, Algorithm::II],
    };
    if a.workers == 0 {
        bail!("--workers must be at least 1");
    }
    let opts = SolveOptions {
        eps_tol: a.tol,
        seed: a.seed,
        ..Default::default()
    };
    let report = run_benchmark(&instances, &algorithms, &opts, a.workers)?;
    emit(a.output.as_deref(), &report.to_csv())?;
    if let Some(p) = &a.summary {
        write_atomic(p, (report.to_summary_json()? + "\n").as_bytes())?;
    }
    for &alg in &algorithms {
        let rows: Vec<_> = report.records_for(alg).collect();
        let conv = rows.iter().filter(|r| r.converged).count();
        let mut iters: Vec<usize> = rows.iter().map(|r| r.iterations).collect();
        iters.sort_unstable();
        eprintln!(
            "algorithm {alg}: {conv}/{} converged, median iterations {}",
            rows.len(),
            iters[iters.len() / 2]
        );
    }
    Ok(Outcome::Ok)
}
