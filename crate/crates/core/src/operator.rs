//! Matrix-vector access to the kernels `Y_1 … Y_s`.
//!
//! The solvers only ever need two things per iterate `w`: the quadratic
//! forms `c_i = wᵀ Y_i w` and the combined product `Y_β w`. Both are exposed
//! through [`KernelOperator`], backed either by the dense [`KernelSet`] or by
//! [`LaggedOperator`], which evaluates the same products directly from the
//! lagged data in `O((n + s) m)` per product without ever storing an `m × m`
//! matrix.

use ndarray::{s, Array1, Array2, ArrayView1};

use crate::lagmat::{KernelSet, TimeSeriesData};

/// Kernel products at a fixed `w`.
pub trait KernelOperator {
    /// Per-`w` intermediate reused by [`quad_forms`](Self::quad_forms) and
    /// [`combine`](Self::combine).
    type Projection;

    fn features(&self) -> usize;
    fn lags(&self) -> usize;

    fn project(&self, w: ArrayView1<f64>) -> Self::Projection;

    /// `c_i = wᵀ Y_i w`, `i = 1..=s`.
    fn quad_forms(&self, p: &Self::Projection) -> Array1<f64>;

    /// `Y_β w = Σ β_i Y_i w`.
    fn combine(&self, p: &Self::Projection, beta: ArrayView1<f64>) -> Array1<f64>;
}

/// Dense projection: rows are `y_i = Y_i w`.
#[derive(Debug, Clone)]
pub struct DenseProjection {
    w: Array1<f64>,
    y: Array2<f64>,
}

impl KernelOperator for KernelSet {
    type Projection = DenseProjection;

    fn features(&self) -> usize {
        KernelSet::features(self)
    }

    fn lags(&self) -> usize {
        KernelSet::lags(self)
    }

    fn project(&self, w: ArrayView1<f64>) -> DenseProjection {
        let mut y = Array2::zeros((self.lags(), self.features()));
        for (mut row, k) in y.rows_mut().into_iter().zip(self.kernels()) {
            row.assign(&k.dot(&w));
        }
        DenseProjection { w: w.to_owned(), y }
    }

    fn quad_forms(&self, p: &DenseProjection) -> Array1<f64> {
        p.y.dot(&p.w)
    }

    fn combine(&self, p: &DenseProjection, beta: ArrayView1<f64>) -> Array1<f64> {
        p.y.t().dot(&beta)
    }
}

/// Matrix-free kernel products computed from the lagged data.
///
/// With scores `t = Xw`, `wᵀ Y_i w` is the inner product of the score
/// windows `t[s..s+n]` and `t[s-i..s-i+n]`, and `Y_β w = ½ Xᵀ v` where `v`
/// scatters the AR prediction of the head window and the β-weighted shifts
/// of the head scores back onto the sample rows.
#[derive(Debug, Clone)]
pub struct LaggedOperator {
    x: Array2<f64>,
    lags: usize,
    n: usize,
}

/// Scores `t = Xw` of the full series.
#[derive(Debug, Clone)]
pub struct ScoreProjection {
    t: Array1<f64>,
}

impl LaggedOperator {
    pub fn new(data: &TimeSeriesData) -> Self {
        Self {
            x: data.x().to_owned(),
            lags: data.lags(),
            n: data.samples(),
        }
    }
}

impl KernelOperator for LaggedOperator {
    type Projection = ScoreProjection;

    fn features(&self) -> usize {
        self.x.ncols()
    }

    fn lags(&self) -> usize {
        self.lags
    }

    fn project(&self, w: ArrayView1<f64>) -> ScoreProjection {
        ScoreProjection { t: self.x.dot(&w) }
    }

    fn quad_forms(&self, p: &ScoreProjection) -> Array1<f64> {
        let (s, n) = (self.lags, self.n);
        let head = p.t.slice(s![s..s + n]);
        (1..=s)
            .map(|i| head.dot(&p.t.slice(s![s - i..s - i + n])))
            .collect()
    }

    fn combine(&self, p: &ScoreProjection, beta: ArrayView1<f64>) -> Array1<f64> {
        let (s, n) = (self.lags, self.n);
        let head = p.t.slice(s![s..s + n]);
        let mut v = Array1::<f64>::zeros(s + n);
        for (i, &b) in (1..=s).zip(beta.iter()) {
            // X_{s+1}ᵀ X_{s+1-i} w: lagged scores land on the head rows.
            v.slice_mut(s![s..s + n])
                .scaled_add(b, &p.t.slice(s![s - i..s - i + n]));
            // X_{s+1-i}ᵀ X_{s+1} w: head scores land on the lagged rows.
            v.slice_mut(s![s - i..s - i + n]).scaled_add(b, &head);
        }
        self.x.t().dot(&v) * 0.5
    }
}
