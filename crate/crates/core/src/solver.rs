//! The two DiPCA decomposition solvers.
//!
//! Both maximize `wᵀ Y_β w` subject to `‖w‖₂ ≤ 1`, `‖β‖₂ ≤ 1` by alternating
//! a `w` update and the closed-form `β` update `β = c / ‖c‖₂` with
//! `c_i = wᵀ Y_i w`:
//!
//! * [`Algorithm::I`] takes a single power step `w ← Y_β w / ‖Y_β w‖₂` per
//!   outer iteration.
//! * [`Algorithm::II`] (coordinate maximization) runs the power method on the
//!   fixed `Y_β` until the Rayleigh quotient settles, then updates `β`.
//!
//! Both stop once the stationarity residual `‖Y_β w − λ w‖∞` drops below the
//! tolerance, where `λ = ‖c‖₂` after the β update. Neither algorithm has a
//! convergence guarantee; failures are reported in [`SolveReport`] rather
//! than raised.

use std::fmt;
use std::time::Instant;

use ndarray::{Array1, ArrayView1};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DipcaError, Result};
use crate::lagmat::{build_kernels, TimeSeriesData};
use crate::linalg::{norm2, norm_inf, random_unit_vector};
use crate::operator::{KernelOperator, LaggedOperator};

/// Norm below which `c` or `Y_β w` is treated as zero.
pub const DIRECTION_EPS: f64 = 1e-14;

/// Consecutive sign flips of the Rayleigh quotient, without residual
/// progress, after which a solve is abandoned.
const OSCILLATION_WINDOW: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    /// One power step per outer iteration.
    I,
    /// Power method to convergence per outer iteration (coordinate maximization).
    II,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Algorithm::I => f.write_str("I"),
            Algorithm::II => f.write_str("II"),
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = DipcaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "1" | "I" | "i" => Ok(Algorithm::I),
            "2" | "II" | "ii" => Ok(Algorithm::II),
            other => Err(DipcaError::InvalidOptions(format!(
                "unknown algorithm '{other}' (expected 1, 2, I or II)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitMode {
    /// Uniform random unit vectors from a ChaCha generator seeded with `seed`.
    SeededRandom,
    /// Explicit starting point; both vectors are normalized on entry.
    UserSupplied { w: Vec<f64>, beta: Vec<f64> },
}

/// Kernel representation used by data-level entry points such as
/// [`solve_data`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Backend {
    /// Dense `m × m` kernels, built once.
    Dense,
    /// Products evaluated from the lagged data, no `m × m` storage.
    Lagged,
    /// Dense when `s·m ≤ 3·(n + s)`, lagged otherwise (cheaper per iteration).
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub eps_tol: f64,
    pub max_outer: usize,
    pub max_power: usize,
    pub seed: u64,
    pub init_mode: InitMode,
    /// Tolerance for the inner ratio test of algorithm II; `None` reuses `eps_tol`.
    pub inner_tol: Option<f64>,
    pub backend: Backend,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            eps_tol: 1e-6,
            max_outer: 10_000,
            max_power: 1_000,
            seed: 42,
            init_mode: InitMode::SeededRandom,
            inner_tol: None,
            backend: Backend::Auto,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_tol > 0.0 && self.eps_tol.is_finite()) {
            return Err(DipcaError::InvalidOptions("eps_tol must be positive".into()));
        }
        if let Some(t) = self.inner_tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(DipcaError::InvalidOptions("inner_tol must be positive".into()));
            }
        }
        if self.max_outer == 0 || self.max_power == 0 {
            return Err(DipcaError::InvalidOptions(
                "iteration caps must be at least 1".into(),
            ));
        }
        Ok(())
    }

    fn inner_eps(&self) -> f64 {
        self.inner_tol.unwrap_or(self.eps_tol)
    }
}

/// One iterate of either algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverState {
    #[serde(with = "crate::io::array1")]
    pub w: Array1<f64>,
    #[serde(with = "crate::io::array1")]
    pub beta: Array1<f64>,
    /// `c_i = wᵀ Y_i w`.
    #[serde(with = "crate::io::array1")]
    pub c: Array1<f64>,
    /// `d = Y_β w`.
    #[serde(with = "crate::io::array1")]
    pub d: Array1<f64>,
    /// `‖c‖₂` after a β update; the Rayleigh quotient `cᵀβ` at initialization.
    pub lambda: f64,
    pub residual_inf: f64,
    pub iter: usize,
}

impl SolverState {
    /// `wᵀ Y_β w`, which equals `lambda` right after a β update.
    pub fn rayleigh(&self) -> f64 {
        self.c.dot(&self.beta)
    }
}

/// Why a solve did not converge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "code", rename_all = "kebab-case")]
pub enum Diagnostic {
    /// Every kernel quadratic form vanishes at `w` (`‖c‖₂ < 1e-14`).
    DegenerateDirection { norm: f64, iter: usize },
    /// The power step direction `Y_β w` vanished.
    ZeroDirection { norm: f64, iter: usize },
    /// The Rayleigh quotient kept flipping sign while the residual stalled,
    /// the signature of a negative dominant eigenvalue of `Y_β`.
    SignOscillation { iter: usize },
    MaxIterations { iter: usize },
}

impl Diagnostic {
    pub fn code(&self) -> &'static str {
        match self {
            Diagnostic::DegenerateDirection { .. } => "degenerate-direction",
            Diagnostic::ZeroDirection { .. } => "zero-direction",
            Diagnostic::SignOscillation { .. } => "sign-oscillation",
            Diagnostic::MaxIterations { .. } => "max-iterations",
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::DegenerateDirection { norm, iter } => write!(
                f,
                "degenerate direction at iteration {iter}: ||c|| = {norm:e}, w is null for every kernel"
            ),
            Diagnostic::ZeroDirection { norm, iter } => write!(
                f,
                "degenerate direction at iteration {iter}: ||Y_beta w|| = {norm:e}"
            ),
            Diagnostic::SignOscillation { iter } => write!(
                f,
                "Rayleigh quotient oscillates in sign with a stalled residual at iteration {iter} (negative dominant eigenvalue)"
            ),
            Diagnostic::MaxIterations { iter } => {
                write!(f, "iteration cap reached after {iter} outer iterations")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub algorithm: Algorithm,
    /// Last iterate.
    pub state: SolverState,
    /// Iterate with the smallest residual seen after a β update.
    pub best_state: SolverState,
    pub converged: bool,
    pub diagnostic: Option<Diagnostic>,
    /// `λ = ‖c‖₂` after each outer iteration.
    pub lambda_history: Vec<f64>,
    pub residual_history: Vec<f64>,
    /// Total power steps, including the inner steps of algorithm II.
    pub power_iterations: usize,
    /// Inner loops of algorithm II that hit `max_power` before the ratio test passed.
    pub inner_unconverged: usize,
    pub wall_time: f64,
}

impl SolveReport {
    pub fn iterations(&self) -> usize {
        self.state.iter
    }
}

/// Result of the closed-form β step.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaUpdate {
    pub c: Array1<f64>,
    pub beta: Array1<f64>,
    pub lambda: f64,
}

/// Result of the power method on a fixed `Y_β`.
#[derive(Debug, Clone, PartialEq)]
pub struct WSubproblem {
    pub w: Array1<f64>,
    /// Rayleigh quotient `wᵀ Y_β w` of the returned `w`.
    pub lambda_w: f64,
    pub power_iters: usize,
    /// `false` when `max_power` was reached before the ratio test passed.
    pub converged: bool,
}

fn check_len(what: &'static str, v: ArrayView1<f64>, expected: usize) -> Result<()> {
    if v.len() != expected {
        return Err(DipcaError::DimensionMismatch {
            what,
            expected,
            found: v.len(),
        });
    }
    Ok(())
}

/// Starting iterate: random (or supplied) unit `w⁰`, `β⁰` with
/// `c`, `d = Σ β⁰_i Y_i w⁰` and the Rayleigh quotient filled in.
pub fn init_state<K: KernelOperator>(op: &K, opts: &SolveOptions) -> Result<SolverState> {
    let (m, s) = (op.features(), op.lags());
    let (w, beta) = match &opts.init_mode {
        InitMode::SeededRandom => {
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            let w = random_unit_vector(&mut rng, m);
            let beta = random_unit_vector(&mut rng, s);
            (w, beta)
        }
        InitMode::UserSupplied { w, beta } => {
            let w = Array1::from(w.clone());
            let beta = Array1::from(beta.clone());
            check_len("initial w length", w.view(), m)?;
            check_len("initial beta length", beta.view(), s)?;
            let (nw, nb) = (norm2(w.view()), norm2(beta.view()));
            if !(nw > 0.0 && nb > 0.0 && nw.is_finite() && nb.is_finite()) {
                return Err(DipcaError::InvalidOptions(
                    "initial w and beta must be finite and nonzero".into(),
                ));
            }
            (w / nw, beta / nb)
        }
    };
    let proj = op.project(w.view());
    let c = op.quad_forms(&proj);
    let d = op.combine(&proj, beta.view());
    let lambda = c.dot(&beta);
    let residual_inf = norm_inf((&d - &(&w * lambda)).view());
    Ok(SolverState {
        w,
        beta,
        c,
        d,
        lambda,
        residual_inf,
        iter: 0,
    })
}

fn beta_from_c(c: Array1<f64>) -> Result<BetaUpdate> {
    let lambda = norm2(c.view());
    if !(lambda >= DIRECTION_EPS) {
        return Err(DipcaError::DegenerateDirection { norm: lambda });
    }
    let beta = &c / lambda;
    Ok(BetaUpdate { c, beta, lambda })
}

/// `c_i = wᵀ Y_i w`, `β = c / ‖c‖₂`, `λ = ‖c‖₂`: the maximizer of `cᵀβ`
/// over the unit ball.
pub fn beta_update<K: KernelOperator>(w: ArrayView1<f64>, op: &K) -> Result<BetaUpdate> {
    check_len("w length", w, op.features())?;
    let proj = op.project(w);
    beta_from_c(op.quad_forms(&proj))
}

/// One power step: `d = Y_β w`, `w_next = d / ‖d‖₂`.
pub fn power_step<K: KernelOperator>(
    op: &K,
    beta: ArrayView1<f64>,
    w: ArrayView1<f64>,
) -> Result<(Array1<f64>, Array1<f64>)> {
    check_len("w length", w, op.features())?;
    check_len("beta length", beta, op.lags())?;
    let d = op.combine(&op.project(w), beta);
    let w_next = normalized_direction(&d)?;
    Ok((w_next, d))
}

fn normalized_direction(d: &Array1<f64>) -> Result<Array1<f64>> {
    let nrm = norm2(d.view());
    if !(nrm >= DIRECTION_EPS) {
        return Err(DipcaError::ZeroDirection { norm: nrm });
    }
    Ok(d / nrm)
}

fn ratio_converged(prev: f64, next: f64, eps: f64) -> bool {
    (next - prev).abs() <= eps * prev.abs()
}

struct InnerOutcome<P> {
    w: Array1<f64>,
    proj: P,
    lambda_w: f64,
    iters: usize,
    converged: bool,
}

/// Power method on fixed `Y_β`, starting from `w0` with `d0 = Y_β w0`.
fn power_method<K: KernelOperator>(
    op: &K,
    beta: ArrayView1<f64>,
    w0: &Array1<f64>,
    d0: &Array1<f64>,
    eps: f64,
    max_power: usize,
) -> Result<InnerOutcome<K::Projection>> {
    let mut lambda_prev = w0.dot(d0);
    let mut d = d0.clone();
    let mut iters = 0;
    loop {
        let w = normalized_direction(&d)?;
        let proj = op.project(w.view());
        d = op.combine(&proj, beta);
        let lambda = w.dot(&d);
        iters += 1;
        let converged = ratio_converged(lambda_prev, lambda, eps);
        if converged || iters >= max_power {
            return Ok(InnerOutcome {
                w,
                proj,
                lambda_w: lambda,
                iters,
                converged,
            });
        }
        lambda_prev = lambda;
    }
}

/// Solves `max wᵀ Y_β w` s.t. `‖w‖₂ ≤ 1` for fixed β by power iteration,
/// stopping once `|λ⁽ᵏ⁺¹⁾/λ⁽ᵏ⁾ − 1| ≤ ε` (inner tolerance) or after
/// `max_power` steps.
pub fn solve_w_subproblem<K: KernelOperator>(
    op: &K,
    beta: ArrayView1<f64>,
    w0: ArrayView1<f64>,
    opts: &SolveOptions,
) -> Result<WSubproblem> {
    opts.validate()?;
    check_len("w length", w0, op.features())?;
    check_len("beta length", beta, op.lags())?;
    let w0 = w0.to_owned();
    let d0 = op.combine(&op.project(w0.view()), beta);
    let out = power_method(op, beta, &w0, &d0, opts.inner_eps(), opts.max_power)?;
    Ok(WSubproblem {
        w: out.w,
        lambda_w: out.lambda_w,
        power_iters: out.iters,
        converged: out.converged,
    })
}

/// Stationarity residual `s = Y_β w − λ w` with `λ = wᵀ Y_β w`, recomputed
/// from the state's `w` and `β`. Returns `(s, ‖s‖∞)`.
pub fn kkt_residual<K: KernelOperator>(state: &SolverState, op: &K) -> (Array1<f64>, f64) {
    let proj = op.project(state.w.view());
    let d = op.combine(&proj, state.beta.view());
    let lambda = state.w.dot(&d);
    let s = &d - &(&state.w * lambda);
    let r = norm_inf(s.view());
    (s, r)
}

/// ∞-norm residuals of both first-order blocks with the multipliers
/// `λ_w = λ_β = wᵀ Y_β w`: `(‖Y_β w − λ_w w‖∞, max_i |wᵀY_i w − λ_β β_i|)`.
pub fn first_order_residuals<K: KernelOperator>(
    w: ArrayView1<f64>,
    beta: ArrayView1<f64>,
    op: &K,
) -> (f64, f64) {
    let proj = op.project(w);
    let c = op.quad_forms(&proj);
    let d = op.combine(&proj, beta);
    let lambda = c.dot(&beta);
    let rw = norm_inf((&d - &(&w * lambda)).view());
    let rb = norm_inf((&c - &(&beta * lambda)).view());
    (rw, rb)
}

/// `wᵀ Y_β w = cᵀβ`.
pub fn objective<K: KernelOperator>(w: ArrayView1<f64>, beta: ArrayView1<f64>, op: &K) -> f64 {
    op.quad_forms(&op.project(w)).dot(&beta)
}

/// Raw-data objective `Σ_{i=s+1}^{n+s} t_i t̂_i` with `t = Xw` and the AR
/// prediction `t̂_i = Σ_j β_j t_{i−j}`.
pub fn score_objective(data: &TimeSeriesData, w: ArrayView1<f64>, beta: ArrayView1<f64>) -> f64 {
    let t = data.x().dot(&w);
    let s = data.lags();
    (s..t.len())
        .map(|i| {
            let pred: f64 = (1..=s).map(|j| beta[j - 1] * t[i - j]).sum();
            t[i] * pred
        })
        .sum()
}

pub fn solve_dipca_i<K: KernelOperator>(op: &K, opts: &SolveOptions) -> Result<SolveReport> {
    run(op, opts, Algorithm::I)
}

pub fn solve_dipca_ii<K: KernelOperator>(op: &K, opts: &SolveOptions) -> Result<SolveReport> {
    run(op, opts, Algorithm::II)
}

pub fn solve<K: KernelOperator>(
    op: &K,
    algorithm: Algorithm,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    run(op, opts, algorithm)
}

/// Picks the kernel backend per `opts.backend` and solves.
pub fn solve_data(
    data: &TimeSeriesData,
    algorithm: Algorithm,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    if use_dense(data, opts.backend) {
        run(&build_kernels(data), opts, algorithm)
    } else {
        run(&LaggedOperator::new(data), opts, algorithm)
    }
}

pub(crate) fn use_dense(data: &TimeSeriesData, backend: Backend) -> bool {
    match backend {
        Backend::Dense => true,
        Backend::Lagged => false,
        Backend::Auto => data.lags() * data.features() <= 3 * (data.samples() + data.lags()),
    }
}

fn run<K: KernelOperator>(op: &K, opts: &SolveOptions, algorithm: Algorithm) -> Result<SolveReport> {
    opts.validate()?;
    let start = Instant::now();
    let mut state = init_state(op, opts)?;
    let mut best = state.clone();
    let mut lambda_history = Vec::new();
    let mut residual_history = Vec::new();
    let mut power_iterations = 0;
    let mut inner_unconverged = 0;
    let mut diagnostic = None;
    let mut converged = false;

    let mut prev_rho: Option<f64> = None;
    let mut stalled_flips = 0;

    while state.iter < opts.max_outer {
        let iter = state.iter + 1;

        // w update
        let (w, proj) = match algorithm {
            Algorithm::I => match normalized_direction(&state.d) {
                Ok(w) => {
                    power_iterations += 1;
                    let proj = op.project(w.view());
                    (w, proj)
                }
                Err(e) => {
                    diagnostic = Some(direction_diagnostic(e, &state, iter));
                    break;
                }
            },
            Algorithm::II => match power_method(
                op,
                state.beta.view(),
                &state.w,
                &state.d,
                opts.inner_eps(),
                opts.max_power,
            ) {
                Ok(out) => {
                    power_iterations += out.iters;
                    if !out.converged {
                        inner_unconverged += 1;
                    }
                    (out.w, out.proj)
                }
                Err(e) => {
                    diagnostic = Some(direction_diagnostic(e, &state, iter));
                    break;
                }
            },
        };

        // β update
        let c = op.quad_forms(&proj);
        let rho = c.dot(&state.beta);
        let update = match beta_from_c(c) {
            Ok(u) => u,
            Err(DipcaError::DegenerateDirection { norm }) => {
                diagnostic = Some(Diagnostic::DegenerateDirection { norm, iter });
                break;
            }
            Err(e) => return Err(e),
        };
        let d = op.combine(&proj, update.beta.view());
        let residual_inf = norm_inf((&d - &(&w * update.lambda)).view());
        state = SolverState {
            w,
            beta: update.beta,
            c: update.c,
            d,
            lambda: update.lambda,
            residual_inf,
            iter,
        };
        lambda_history.push(state.lambda);
        residual_history.push(residual_inf);

        let improved = residual_inf < best.residual_inf || best.iter == 0;
        if improved {
            best = state.clone();
        }
        if residual_inf < opts.eps_tol {
            converged = true;
            break;
        }

        let flipped = prev_rho.is_some_and(|p| p * rho < 0.0);
        stalled_flips = if flipped && !improved { stalled_flips + 1 } else { 0 };
        prev_rho = Some(rho);
        if stalled_flips >= OSCILLATION_WINDOW {
            diagnostic = Some(Diagnostic::SignOscillation { iter });
            break;
        }
    }

    if !converged && diagnostic.is_none() {
        diagnostic = Some(Diagnostic::MaxIterations { iter: state.iter });
    }

    Ok(SolveReport {
        algorithm,
        state,
        best_state: best,
        converged,
        diagnostic,
        lambda_history,
        residual_history,
        power_iterations,
        inner_unconverged,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

fn direction_diagnostic(err: DipcaError, state: &SolverState, iter: usize) -> Diagnostic {
    let norm = match err {
        DipcaError::ZeroDirection { norm } | DipcaError::DegenerateDirection { norm } => norm,
        _ => f64::NAN,
    };
    // Y_β w = 0 together with c = 0 means w annihilates every kernel form.
    let c_norm = norm2(state.c.view());
    if c_norm < DIRECTION_EPS {
        Diagnostic::DegenerateDirection { norm: c_norm, iter }
    } else {
        Diagnostic::ZeroDirection { norm, iter }
    }
}
