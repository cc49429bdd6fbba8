//! Multi-component extraction by solve-and-deflate, AR prediction on the
//! latent scores, and reconstruction of the data from extracted components.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{DipcaError, Result};
use crate::lagmat::TimeSeriesData;
use crate::linalg::normalize_sign;
use crate::solver::{solve_data, Algorithm, Diagnostic, SolveOptions};

/// One extracted latent component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentComponent {
    #[serde(with = "crate::io::array1")]
    pub w: Array1<f64>,
    #[serde(with = "crate::io::array1")]
    pub beta: Array1<f64>,
    /// Scores `t = Xw` on the (deflated) data the component was fitted to.
    #[serde(with = "crate::io::array1")]
    pub t: Array1<f64>,
    /// Loadings `p = Xᵀt / tᵀt`.
    #[serde(with = "crate::io::array1")]
    pub p: Array1<f64>,
    pub lambda: f64,
    pub converged: bool,
    pub diagnostic: Option<Diagnostic>,
    pub iterations: usize,
    pub residual_inf: f64,
    pub wall_time_s: f64,
    /// `‖X‖_F` of the data left after removing this component.
    pub remaining_fro: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiPCAModel {
    pub algorithm: Algorithm,
    pub m: usize,
    pub n: usize,
    pub s: usize,
    pub centered: bool,
    #[serde(with = "crate::io::array1")]
    pub column_means: Array1<f64>,
    pub components: Vec<LatentComponent>,
}

impl DiPCAModel {
    pub fn all_converged(&self) -> bool {
        self.components.iter().all(|c| c.converged)
    }

    /// Scores as an `(n + s) × k` matrix, one column per component.
    pub fn score_matrix(&self) -> Array2<f64> {
        let rows = self.n + self.s;
        let mut out = Array2::zeros((rows, self.components.len()));
        for (mut col, c) in out.columns_mut().into_iter().zip(&self.components) {
            col.assign(&c.t);
        }
        out
    }
}

/// `t = Xw`.
pub fn scores(x: ArrayView2<f64>, w: ArrayView1<f64>) -> Result<Array1<f64>> {
    if x.ncols() != w.len() {
        return Err(DipcaError::DimensionMismatch {
            what: "w length",
            expected: x.ncols(),
            found: w.len(),
        });
    }
    Ok(x.dot(&w))
}

/// AR prediction `t̂_i = Σ_j β_j t_{i−j}` over the window `i = s+1 ..= n+s`
/// and residuals `r_i = t_i − t̂_i`, both of length `n`.
pub fn ar_predict(t: ArrayView1<f64>, beta: ArrayView1<f64>) -> Result<(Array1<f64>, Array1<f64>)> {
    let s = beta.len();
    if s == 0 || t.len() <= s {
        return Err(DipcaError::DimensionMismatch {
            what: "score length (must exceed lag order)",
            expected: s + 1,
            found: t.len(),
        });
    }
    let n = t.len() - s;
    let mut t_hat = Array1::<f64>::zeros(n);
    for (j, &b) in beta.iter().enumerate() {
        // lag j+1 contributes t[s-1-j .. s-1-j+n]
        t_hat.scaled_add(b, &t.slice(s![s - 1 - j..s - 1 - j + n]));
    }
    let r = &t.slice(s![s..]) - &t_hat;
    Ok((t_hat, r))
}

/// `p = Xᵀt / tᵀt`, `X_next = X − t pᵀ`.
pub fn deflate_once(x: ArrayView2<f64>, t: ArrayView1<f64>) -> Result<(Array2<f64>, Array1<f64>)> {
    if x.nrows() != t.len() {
        return Err(DipcaError::DimensionMismatch {
            what: "score length",
            expected: x.nrows(),
            found: t.len(),
        });
    }
    let energy = t.dot(&t);
    if !(energy > 1e-14 * t.len() as f64) {
        return Err(DipcaError::ZeroScore { energy });
    }
    let p = x.t().dot(&t) / energy;
    let outer = t
        .view()
        .insert_axis(Axis(1))
        .dot(&p.view().insert_axis(Axis(0)));
    Ok((&x - &outer, p))
}

fn frobenius(x: ArrayView2<f64>) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Extracts `k` components: solve on the current data, take scores and
/// loadings, deflate, rebuild kernels, repeat.
///
/// A component whose solve fails is kept (flagged) using the lowest-residual
/// iterate, and deflation continues with it.
pub fn extract_components(
    data: &TimeSeriesData,
    k: usize,
    opts: &SolveOptions,
    algorithm: Algorithm,
) -> Result<DiPCAModel> {
    let m = data.features();
    if k == 0 || k > m {
        return Err(DipcaError::ComponentOutOfRange { k, max: m });
    }
    let s = data.lags();
    let mut x = data.x().to_owned();
    let mut components = Vec::with_capacity(k);
    for _ in 0..k {
        let current = TimeSeriesData::new(x, s)?;
        let report = solve_data(&current, algorithm, opts)?;
        let chosen = if report.converged {
            &report.state
        } else {
            &report.best_state
        };
        let mut w = chosen.w.clone();
        normalize_sign(&mut w);
        let t = scores(current.x(), w.view())?;
        let (next, p) = deflate_once(current.x(), t.view())?;
        components.push(LatentComponent {
            beta: chosen.beta.clone(),
            lambda: chosen.lambda,
            residual_inf: chosen.residual_inf,
            iterations: report.iterations(),
            converged: report.converged,
            diagnostic: report.diagnostic.clone(),
            wall_time_s: report.wall_time,
            remaining_fro: frobenius(next.view()),
            w,
            t,
            p,
        });
        x = next;
    }
    Ok(DiPCAModel {
        algorithm,
        m,
        n: data.samples(),
        s,
        centered: data.is_centered(),
        column_means: data.column_means().to_owned(),
        components,
    })
}

/// `X̂ = Σ_{j ≤ k} t_j p_jᵀ`, plus the column means when the model was
/// fitted to centered data.
pub fn reconstruct(model: &DiPCAModel, k: usize) -> Result<Array2<f64>> {
    let count = model.components.len();
    if k == 0 || k > count {
        return Err(DipcaError::ComponentOutOfRange { k, max: count });
    }
    let rows = model.n + model.s;
    let mut xhat = Array2::<f64>::zeros((rows, model.m));
    for c in &model.components[..k] {
        let outer = c
            .t
            .view()
            .insert_axis(Axis(1))
            .dot(&c.p.view().insert_axis(Axis(0)));
        xhat += &outer;
    }
    if model.centered {
        xhat += &model.column_means.view().insert_axis(Axis(0));
    }
    Ok(xhat)
}
