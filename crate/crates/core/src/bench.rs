//! Planted synthetic data and the benchmark harness.
//!
//! Synthetic series are sums of independent stationary AR(s) latent series
//! along mutually orthonormal directions, plus iid Gaussian noise of standard
//! deviation `σ` added to the data matrix. Benchmarks fit each instance with
//! each algorithm, classify the resulting point, and report objective,
//! wall time, iteration counts and the fraction of negative reduced-Hessian
//! eigenvalues, both per row (CSV) and as sorted-value curves (JSON).

use std::time::Instant;

use ndarray::{s, Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DipcaError, Result};
use crate::lagmat::{build_kernels, KernelSet, TimeSeriesData};
use crate::linalg::{norm2, random_unit_vector};
use crate::secondorder::classify_fixed_point;
use crate::solver::{objective, solve, solve_dipca_ii, Algorithm, InitMode, SolveOptions};

const AR_ATTEMPTS: usize = 1_000;
const BURN_IN: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub m: usize,
    pub n: usize,
    pub s: usize,
    pub sigma: f64,
    pub seed: u64,
    pub planted_components: usize,
    /// AR roots are confined to `|z| ≤ 1 − ar_spectral_margin`.
    pub ar_spectral_margin: f64,
    /// RMS of the first planted latent series; component `j` (0-based) gets
    /// `signal_scale / 2^j`.
    pub signal_scale: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            m: 50,
            n: 500,
            s: 4,
            sigma: 1.0,
            seed: 1,
            planted_components: 1,
            ar_spectral_margin: 0.1,
            signal_scale: 10.0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(DipcaError::InvalidOptions(msg.into()));
        if self.m == 0 || self.s == 0 || self.n <= self.s {
            return bad("synthetic dimensions need m >= 1, s >= 1 and n > s");
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad("sigma must be finite and nonnegative");
        }
        if self.planted_components == 0 || self.planted_components > self.m {
            return bad("planted_components must be in 1..=m");
        }
        if !(self.ar_spectral_margin > 0.0 && self.ar_spectral_margin < 1.0) {
            return bad("ar_spectral_margin must lie in (0, 1)");
        }
        if !(self.signal_scale > 0.0 && self.signal_scale.is_finite()) {
            return bad("signal_scale must be positive");
        }
        Ok(())
    }
}

/// Ground truth of a synthetic instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Planted {
    /// Orthonormal planted directions.
    pub w: Vec<Array1<f64>>,
    /// Generating AR coefficients `φ` of each latent series.
    pub ar_coefficients: Vec<Array1<f64>>,
    /// Unit `β = a / ‖a‖` from the realized lagged autocovariances `a_i` of
    /// each latent series.
    pub beta: Vec<Array1<f64>>,
    /// `‖a‖`, the objective attained by `(w_j, β_j)` on the noiseless
    /// single-component signal.
    pub lambda: Vec<f64>,
    /// Latent series, length `n + s`.
    pub scores: Vec<Array1<f64>>,
}

impl Planted {
    /// Noiseless signal `Σ_j t_j w_jᵀ`.
    pub fn signal(&self) -> Array2<f64> {
        let rows = self.scores.first().map_or(0, |t| t.len());
        let m = self.w.first().map_or(0, |w| w.len());
        let mut x = Array2::zeros((rows, m));
        for (t, w) in self.scores.iter().zip(&self.w) {
            x += &t
                .view()
                .insert_axis(ndarray::Axis(1))
                .dot(&w.view().insert_axis(ndarray::Axis(0)));
        }
        x
    }
}

/// Schur–Cohn step-down test: all roots of `z^s − φ_1 z^{s−1} − … − φ_s`
/// lie strictly inside the circle of radius `radius`.
pub fn ar_roots_within(phi: &[f64], radius: f64) -> bool {
    let p = phi.len();
    let mut a: Vec<f64> = std::iter::once(1.0)
        .chain(
            phi.iter()
                .enumerate()
                .map(|(i, &f)| -f / radius.powi(i as i32 + 1)),
        )
        .collect();
    for order in (1..=p).rev() {
        let k = a[order];
        if !(k.abs() < 1.0) {
            return false;
        }
        let denom = 1.0 - k * k;
        let prev = a.clone();
        for i in 1..order {
            a[i] = (prev[i] - k * prev[order - i]) / denom;
        }
    }
    true
}

fn draw_stable_ar<R: Rng>(rng: &mut R, s: usize, margin: f64) -> Result<Array1<f64>> {
    for _ in 0..AR_ATTEMPTS {
        let phi: Vec<f64> = (0..s).map(|_| rng.random_range(-1.0..1.0)).collect();
        if ar_roots_within(&phi, 1.0 - margin) {
            return Ok(Array1::from(phi));
        }
    }
    Err(DipcaError::UnstableAr {
        attempts: AR_ATTEMPTS,
    })
}

fn orthonormal_columns<R: Rng>(rng: &mut R, m: usize, k: usize) -> Vec<Array1<f64>> {
    let mut basis: Vec<Array1<f64>> = Vec::with_capacity(k);
    while basis.len() < k {
        let mut v = random_unit_vector(rng, m);
        for b in &basis {
            let proj = b.dot(&v);
            v.scaled_add(-proj, b);
        }
        let nrm = norm2(v.view());
        if nrm > 1e-8 {
            basis.push(v / nrm);
        }
    }
    basis
}

/// Lagged autocovariances `a_i = Σ_{k=s}^{n+s−1} t_k t_{k−i}`.
fn lagged_autocov(t: &Array1<f64>, s: usize) -> Array1<f64> {
    let n = t.len() - s;
    let head = t.slice(s![s..]);
    (1..=s).map(|i| head.dot(&t.slice(s![s - i..s - i + n]))).collect()
}

/// Generates a planted instance: `X = Σ_j t_j w_jᵀ + σE`.
pub fn gen_synthetic(cfg: &SyntheticConfig) -> Result<(TimeSeriesData, Planted)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let rows = cfg.n + cfg.s;
    let w = orthonormal_columns(&mut rng, cfg.m, cfg.planted_components);

    let mut planted = Planted {
        w,
        ar_coefficients: Vec::new(),
        beta: Vec::new(),
        lambda: Vec::new(),
        scores: Vec::new(),
    };
    for j in 0..cfg.planted_components {
        let phi = draw_stable_ar(&mut rng, cfg.s, cfg.ar_spectral_margin)?;
        let total = BURN_IN + rows;
        let mut series = vec![0.0; total];
        for k in 0..total {
            let mut v: f64 = rng.sample(StandardNormal);
            for (i, &f) in phi.iter().enumerate() {
                if k > i {
                    v += f * series[k - 1 - i];
                }
            }
            series[k] = v;
        }
        let mut t = Array1::from(series[BURN_IN..].to_vec());
        let rms = (t.dot(&t) / rows as f64).sqrt();
        let amplitude = cfg.signal_scale / 2f64.powi(j as i32);
        t *= amplitude / rms;
        let a = lagged_autocov(&t, cfg.s);
        let lam = norm2(a.view());
        planted.beta.push(&a / lam);
        planted.lambda.push(lam);
        planted.ar_coefficients.push(phi);
        planted.scores.push(t);
    }

    let mut x = planted.signal();
    if cfg.sigma > 0.0 {
        x.mapv_inplace(|v| v + cfg.sigma * rng.sample::<f64, _>(StandardNormal));
    }
    Ok((TimeSeriesData::new(x, cfg.s)?, planted))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub objective: f64,
    pub w: Array1<f64>,
    pub beta: Array1<f64>,
}

/// Multi-start search for the global maximum on tiny instances
/// (`m ≤ 6`, `s ≤ 3`): random unit starting pairs, each refined by
/// coordinate maximization; the best objective wins.
pub fn brute_force_oracle(
    kernels: &KernelSet,
    restarts: usize,
    refine_iters: usize,
    seed: u64,
) -> Result<OracleResult> {
    let (m, s) = (kernels.features(), kernels.lags());
    if m > 6 || s > 3 {
        return Err(DipcaError::SizeGuard { m, s });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<OracleResult> = None;
    for _ in 0..restarts.max(1) {
        let w0 = random_unit_vector(&mut rng, m);
        let b0 = random_unit_vector(&mut rng, s);
        let opts = SolveOptions {
            eps_tol: 1e-12,
            max_outer: refine_iters.max(1),
            max_power: 10_000,
            init_mode: InitMode::UserSupplied {
                w: w0.to_vec(),
                beta: b0.to_vec(),
            },
            ..Default::default()
        };
        let Ok(report) = solve_dipca_ii(kernels, &opts) else {
            continue;
        };
        let st = if report.converged {
            &report.state
        } else {
            &report.best_state
        };
        let value = objective(st.w.view(), st.beta.view(), kernels);
        if best.as_ref().is_none_or(|b| value > b.objective) {
            best = Some(OracleResult {
                objective: value,
                w: st.w.clone(),
                beta: st.beta.clone(),
            });
        }
    }
    best.ok_or_else(|| DipcaError::InvalidData("oracle found no feasible point".into()))
}

/// One benchmark row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub instance_id: usize,
    pub algorithm: Algorithm,
    pub m: usize,
    pub n: usize,
    pub s: usize,
    pub sigma: f64,
    pub seed: u64,
    pub objective: f64,
    /// Iteration time, kernel construction excluded.
    pub wall_time_s: f64,
    /// Kernel construction plus iteration.
    pub total_time_s: f64,
    pub iterations: usize,
    pub power_iterations: usize,
    pub converged: bool,
    pub residual_inf: f64,
    pub fraction_negative: Option<f64>,
    pub is_max: Option<bool>,
    /// Inertia test and reduced-Hessian test agree.
    pub routes_agree: Option<bool>,
    pub error: Option<String>,
}

/// Sorted metric values for one algorithm, ready for cumulative plots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulativeCurves {
    pub algorithm: Algorithm,
    pub objective: Vec<f64>,
    pub wall_time_s: Vec<f64>,
    pub fraction_negative: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub workers: usize,
    pub records: Vec<BenchRecord>,
    pub curves: Vec<CumulativeCurves>,
}

pub const CSV_HEADER: &str =
    "instance_id,algorithm,m,n,s,sigma,seed,objective,wall_time_s,iterations,converged,fraction_negative";

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.records {
            let frac = r.fraction_negative.map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.instance_id,
                r.algorithm,
                r.m,
                r.n,
                r.s,
                r.sigma,
                r.seed,
                r.objective,
                r.wall_time_s,
                r.iterations,
                r.converged,
                frac
            ));
        }
        out
    }

    pub fn to_summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn records_for(&self, algorithm: Algorithm) -> impl Iterator<Item = &BenchRecord> {
        self.records.iter().filter(move |r| r.algorithm == algorithm)
    }
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

fn run_one(id: usize, cfg: &SyntheticConfig, algorithm: Algorithm, opts: &SolveOptions) -> BenchRecord {
    let mut rec = BenchRecord {
        instance_id: id,
        algorithm,
        m: cfg.m,
        n: cfg.n,
        s: cfg.s,
        sigma: cfg.sigma,
        seed: cfg.seed,
        objective: f64::NAN,
        wall_time_s: 0.0,
        total_time_s: 0.0,
        iterations: 0,
        power_iterations: 0,
        converged: false,
        residual_inf: f64::NAN,
        fraction_negative: None,
        is_max: None,
        routes_agree: None,
        error: None,
    };
    let data = match gen_synthetic(cfg) {
        Ok((data, _)) => data,
        Err(e) => {
            rec.error = Some(e.to_string());
            return rec;
        }
    };
    let start = Instant::now();
    let kernels = build_kernels(&data);
    let report = match solve(&kernels, algorithm, opts) {
        Ok(r) => r,
        Err(e) => {
            rec.error = Some(e.to_string());
            return rec;
        }
    };
    rec.total_time_s = start.elapsed().as_secs_f64();
    rec.wall_time_s = report.wall_time;
    rec.iterations = report.iterations();
    rec.power_iterations = report.power_iterations;
    rec.converged = report.converged;
    let st = if report.converged {
        &report.state
    } else {
        &report.best_state
    };
    rec.objective = st.lambda;
    rec.residual_inf = st.residual_inf;
    if let Some(d) = &report.diagnostic {
        if !report.converged {
            rec.error = Some(d.to_string());
        }
    }
    if let Ok(cls) = classify_fixed_point(st.w.view(), st.beta.view(), &kernels) {
        rec.fraction_negative = Some(cls.fraction_negative);
        rec.is_max = Some(cls.is_max);
        rec.routes_agree = Some(cls.routes_agree());
    }
    rec
}

/// Fits every instance with every algorithm. Failures are recorded per row;
/// the sweep always completes. `workers > 1` evaluates instances in a
/// dedicated thread pool; row order is independent of the worker count.
pub fn run_benchmark(
    instances: &[SyntheticConfig],
    algorithms: &[Algorithm],
    opts: &SolveOptions,
    workers: usize,
) -> Result<BenchReport> {
    if instances.is_empty() || algorithms.is_empty() {
        return Err(DipcaError::InvalidOptions(
            "benchmark needs at least one instance and one algorithm".into(),
        ));
    }
    opts.validate()?;
    let jobs: Vec<(usize, &SyntheticConfig, Algorithm)> = instances
        .iter()
        .enumerate()
        .flat_map(|(i, cfg)| algorithms.iter().map(move |&a| (i + 1, cfg, a)))
        .collect();
    let workers = workers.max(1);
    let records: Vec<BenchRecord> = if workers == 1 {
        jobs.iter().map(|&(id, cfg, a)| run_one(id, cfg, a, opts)).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| DipcaError::InvalidOptions(e.to_string()))?;
        pool.install(|| {
            jobs.par_iter()
                .map(|&(id, cfg, a)| run_one(id, cfg, a, opts))
                .collect()
        })
    };
    let curves = algorithms
        .iter()
        .map(|&a| {
            let rows: Vec<&BenchRecord> = records.iter().filter(|r| r.algorithm == a).collect();
            CumulativeCurves {
                algorithm: a,
                objective: sorted(rows.iter().map(|r| r.objective).filter(|v| v.is_finite()).collect()),
                wall_time_s: sorted(rows.iter().map(|r| r.wall_time_s).collect()),
                fraction_negative: sorted(rows.iter().filter_map(|r| r.fraction_negative).collect()),
            }
        })
        .collect();
    Ok(BenchReport {
        workers,
        records,
        curves,
    })
}

/// Named instance sweeps.
pub fn preset(name: &str) -> Option<Vec<SyntheticConfig>> {
    let sweep = |m: usize, n: usize, sigma: f64| -> Vec<SyntheticConfig> {
        (1..=20)
            .map(|seed| SyntheticConfig {
                m,
                n,
                s: 4,
                sigma,
                seed,
                ..Default::default()
            })
            .collect()
    };
    match name {
        "default" => Some(sweep(50, 500, 1.0)),
        "noiseless" => Some(sweep(50, 500, 0.0)),
        "noise-low" => Some(sweep(200, 500, 1.0)),
        "noise-high" => Some(sweep(200, 500, 10.0)),
        "paper-shape" => Some(sweep(5106, 71, 1.0)),
        _ => None,
    }
}

pub const PRESET_NAMES: &[&str] = &["default", "noiseless", "noise-low", "noise-high", "paper-shape"];
