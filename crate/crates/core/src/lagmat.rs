//! Lagged views of a multivariate time series and the symmetric lag
//! cross-covariance kernels built from them.
//!
//! With `N = n + s` samples stored row-wise in `X`, the lag view `X_i`
//! (1-based, `i ∈ 1..=s+1`) is the `n × m` window of rows `i ..= i+n-1`.
//! Kernel `Y_i` pairs the most recent window `X_{s+1}` with the window
//! lagged by `i` steps:
//!
//! ```text
//! Y_i = ½ (X_{s+1}ᵀ X_{s+1-i} + X_{s+1-i}ᵀ X_{s+1})
//! ```

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{DipcaError, Result};

/// Raw data matrix with its lag order.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesData {
    x: Array2<f64>,
    lags: usize,
    column_means: Array1<f64>,
    centered: bool,
}

impl TimeSeriesData {
    /// Wraps `x` (rows are time samples in order) with lag order `lags`.
    ///
    /// Rejects empty matrices, non-finite entries, and lag orders that leave
    /// fewer than `lags + 1` prediction rows (the constraint `s < n`).
    pub fn new(x: Array2<f64>, lags: usize) -> Result<Self> {
        let (rows, m) = x.dim();
        if m == 0 {
            return Err(DipcaError::InvalidData("data has no feature columns".into()));
        }
        if lags == 0 {
            return Err(DipcaError::InvalidData("lag order must be at least 1".into()));
        }
        if rows <= 2 * lags {
            return Err(DipcaError::InvalidData(format!(
                "{rows} samples with lag order {lags} leave n = {} prediction rows; need n > s",
                rows.saturating_sub(lags)
            )));
        }
        if let Some(pos) = x.iter().position(|v| !v.is_finite()) {
            return Err(DipcaError::InvalidData(format!(
                "non-finite entry at row {}, column {}",
                pos / m + 1,
                pos % m + 1
            )));
        }
        Ok(Self {
            x,
            lags,
            column_means: Array1::zeros(m),
            centered: false,
        })
    }

    pub fn x(&self) -> ArrayView2<'_, f64> {
        self.x.view()
    }

    pub fn into_matrix(self) -> Array2<f64> {
        self.x
    }

    /// Lag order `s`.
    pub fn lags(&self) -> usize {
        self.lags
    }

    /// Feature dimension `m`.
    pub fn features(&self) -> usize {
        self.x.ncols()
    }

    /// Effective sample count `n` (rows minus lag order).
    pub fn samples(&self) -> usize {
        self.x.nrows() - self.lags
    }

    /// Column means removed by [`center_columns`]; all zero otherwise.
    pub fn column_means(&self) -> ArrayView1<'_, f64> {
        self.column_means.view()
    }

    /// Whether [`center_columns`] produced this value.
    pub fn is_centered(&self) -> bool {
        self.centered
    }
}

/// The `s` symmetric kernels `Y_1 … Y_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSet {
    kernels: Vec<Array2<f64>>,
    m: usize,
}

impl KernelSet {
    /// Builds a kernel set from explicit matrices. Each matrix must be square,
    /// of a common size, and symmetric up to rounding; the stored copy is
    /// exactly symmetric.
    pub fn from_matrices(mats: Vec<Array2<f64>>) -> Result<Self> {
        let Some(first) = mats.first() else {
            return Err(DipcaError::InvalidData("kernel set needs at least one matrix".into()));
        };
        let m = first.nrows();
        if m == 0 {
            return Err(DipcaError::InvalidData("kernel matrices are empty".into()));
        }
        let mut kernels = Vec::with_capacity(mats.len());
        for a in mats {
            if a.dim() != (m, m) {
                return Err(DipcaError::DimensionMismatch {
                    what: "kernel matrix size",
                    expected: m,
                    found: a.nrows().max(a.ncols()),
                });
            }
            let scale = a.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
            let asym = (&a - &a.t()).iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
            if asym > 1e-12 * scale || a.iter().any(|v| !v.is_finite()) {
                return Err(DipcaError::InvalidData("kernel matrix is not symmetric".into()));
            }
            kernels.push(symmetrize(a.view()));
        }
        Ok(Self { kernels, m })
    }

    pub fn kernels(&self) -> &[Array2<f64>] {
        &self.kernels
    }

    /// Kernel `Y_i`, 1-based.
    pub fn kernel(&self, i: usize) -> Result<ArrayView2<'_, f64>> {
        if i == 0 || i > self.kernels.len() {
            return Err(DipcaError::IndexOutOfRange {
                index: i,
                max: self.kernels.len(),
            });
        }
        Ok(self.kernels[i - 1].view())
    }

    pub fn features(&self) -> usize {
        self.m
    }

    pub fn lags(&self) -> usize {
        self.kernels.len()
    }

    /// Kernel set with every matrix negated.
    pub fn negated(&self) -> Self {
        Self {
            kernels: self.kernels.iter().map(|k| -k).collect(),
            m: self.m,
        }
    }
}

fn symmetrize(a: ArrayView2<f64>) -> Array2<f64> {
    let m = a.nrows();
    Array2::from_shape_fn((m, m), |(j, k)| 0.5 * (a[[j, k]] + a[[k, j]]))
}

/// The `n × m` lag view `X_i` for `i ∈ 1..=s+1`.
pub fn lag_view(data: &TimeSeriesData, i: usize) -> Result<ArrayView2<'_, f64>> {
    let s = data.lags();
    if i == 0 || i > s + 1 {
        return Err(DipcaError::IndexOutOfRange { index: i, max: s + 1 });
    }
    let n = data.samples();
    Ok(data.x.slice(s![i - 1..i - 1 + n, ..]))
}

/// Builds `Y_i = ½(X_{s+1}ᵀ X_{s+1-i} + X_{s+1-i}ᵀ X_{s+1})` for `i = 1..=s`.
pub fn build_kernels(data: &TimeSeriesData) -> KernelSet {
    let s = data.lags();
    let head = lag_view(data, s + 1).expect("s+1 is a valid lag index");
    let kernels = (1..=s)
        .map(|i| {
            let lagged = lag_view(data, s + 1 - i).expect("lag index in range");
            symmetrize(head.t().dot(&lagged).view())
        })
        .collect();
    KernelSet {
        kernels,
        m: data.features(),
    }
}

/// `Y_β = Σ β_i Y_i`.
pub fn combine_kernels(kernels: &KernelSet, beta: ArrayView1<f64>) -> Result<Array2<f64>> {
    if beta.len() != kernels.lags() {
        return Err(DipcaError::DimensionMismatch {
            what: "beta length",
            expected: kernels.lags(),
            found: beta.len(),
        });
    }
    let m = kernels.features();
    let mut out = Array2::<f64>::zeros((m, m));
    for (b, y) in beta.iter().zip(&kernels.kernels) {
        out.scaled_add(*b, y);
    }
    Ok(out)
}

/// Subtracts each column's mean and records the means.
pub fn center_columns(data: &TimeSeriesData) -> TimeSeriesData {
    let means = data
        .x
        .mean_axis(Axis(0))
        .expect("data has at least one row");
    let x = &data.x - &means.view().insert_axis(Axis(0));
    TimeSeriesData {
        x,
        lags: data.lags,
        column_means: &data.column_means + &means,
        centered: true,
    }
}
