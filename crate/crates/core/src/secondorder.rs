//! Second-order test for stationary points.
//!
//! At a stationary `(w, β)` with `λ = wᵀ Y_β w`, the (halved) Lagrangian
//! Hessian and the constraint Jacobian are
//!
//! ```text
//! H = [ Y_β − λI    Y_1 w … Y_s w ]      G = [ wᵀ  0  ]
//!     [ (Y_i w)ᵀ    −½λ I_s       ]          [ 0   βᵀ ]
//! ```
//!
//! The point is a strict local maximum when the reduced Hessian `ZᵀHZ` is
//! negative definite, `Z` spanning `ker G`. Equivalently the bordered matrix
//! `K = [[H, Gᵀ], [G, 0]]` has inertia `(2, m + s, 0)`. Both routes are
//! evaluated independently so callers can cross-check them.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{DipcaError, Result};
use crate::lagmat::{combine_kernels, KernelSet};
use crate::linalg::norm2;
use crate::solver::first_order_residuals;

/// KKT residual above which a point is not classified.
pub const FIXED_POINT_GATE: f64 = 1e-4;

/// Relative scale of the default zero tolerance in [`inertia_of`].
pub const ZERO_TOL_SCALE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Inertia {
    pub n_plus: usize,
    pub n_minus: usize,
    pub n_zero: usize,
}

impl Inertia {
    pub fn new(n_plus: usize, n_minus: usize, n_zero: usize) -> Self {
        Self {
            n_plus,
            n_minus,
            n_zero,
        }
    }

    pub fn dim(&self) -> usize {
        self.n_plus + self.n_minus + self.n_zero
    }
}

impl std::fmt::Display for Inertia {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.n_plus, self.n_minus, self.n_zero)
    }
}

/// Second-order objects at `(w, β)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KktSystem {
    pub h: Array2<f64>,
    pub g: Array2<f64>,
    pub k: Array2<f64>,
    pub z: Array2<f64>,
    pub lambda: f64,
}

impl KktSystem {
    pub fn reduced_hessian(&self) -> Array2<f64> {
        self.z.t().dot(&self.h).dot(&self.z)
    }

    /// `K` with its border scaled by `α = √max(1, ‖H‖∞)`, i.e. `D K D` with
    /// `D = diag(I, αI)`. Same inertia as `K`; without the scaling the two
    /// constraint eigenvalues shrink like `1/‖H‖` and fall below any
    /// tolerance relative to `‖K‖`.
    pub fn balanced_k(&self) -> Array2<f64> {
        let dim = self.h.nrows();
        let alpha = matrix_norm_inf(self.h.view()).max(1.0).sqrt();
        let mut k = self.k.clone();
        k.slice_mut(s![dim.., ..dim]).mapv_inplace(|v| v * alpha);
        k.slice_mut(s![..dim, dim..]).mapv_inplace(|v| v * alpha);
        k
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    /// Inertia of `K` equals `(2, m + s, 0)`.
    pub is_max: bool,
    pub inertia: Inertia,
    /// Eigenvalues of `ZᵀHZ`, ascending.
    pub reduced_spectrum: Vec<f64>,
    /// All reduced eigenvalues are below `−zero_tol`.
    pub reduced_negative_definite: bool,
    /// Share of reduced eigenvalues below `−zero_tol`; 1 for an empty spectrum.
    pub fraction_negative: f64,
    pub lambda: f64,
    pub kkt_residual: f64,
}

impl Classification {
    /// The inertia route and the reduced-Hessian route agree.
    pub fn routes_agree(&self) -> bool {
        self.is_max == self.reduced_negative_definite
    }

    pub fn min_reduced_eigenvalue(&self) -> Option<f64> {
        self.reduced_spectrum.first().copied()
    }

    pub fn max_reduced_eigenvalue(&self) -> Option<f64> {
        self.reduced_spectrum.last().copied()
    }
}

fn check_unit(what: &str, v: ArrayView1<f64>) -> Result<()> {
    let nrm = norm2(v);
    if (nrm - 1.0).abs() > 1e-9 {
        return Err(DipcaError::InvalidData(format!(
            "{what} must be a unit vector (norm {nrm})"
        )));
    }
    Ok(())
}

/// Assembles `H`, `G`, `K` and an orthonormal null-space basis `Z` of `G`.
pub fn build_kkt_system(
    w: ArrayView1<f64>,
    beta: ArrayView1<f64>,
    kernels: &KernelSet,
) -> Result<KktSystem> {
    let (m, s) = (kernels.features(), kernels.lags());
    if w.len() != m {
        return Err(DipcaError::DimensionMismatch {
            what: "w length",
            expected: m,
            found: w.len(),
        });
    }
    if beta.len() != s {
        return Err(DipcaError::DimensionMismatch {
            what: "beta length",
            expected: s,
            found: beta.len(),
        });
    }
    check_unit("w", w)?;
    check_unit("beta", beta)?;

    let y_beta = combine_kernels(kernels, beta)?;
    let lambda = w.dot(&y_beta.dot(&w));

    let dim = m + s;
    let mut h = Array2::<f64>::zeros((dim, dim));
    h.slice_mut(s![..m, ..m]).assign(&y_beta);
    for j in 0..m {
        h[[j, j]] -= lambda;
    }
    for (i, y) in kernels.kernels().iter().enumerate() {
        let yw = y.dot(&w);
        h.slice_mut(s![..m, m + i]).assign(&yw);
        h.slice_mut(s![m + i, ..m]).assign(&yw);
        h[[m + i, m + i]] = -0.5 * lambda;
    }

    let mut g = Array2::<f64>::zeros((2, dim));
    g.slice_mut(s![0, ..m]).assign(&w);
    g.slice_mut(s![1, m..]).assign(&beta);

    let mut k = Array2::<f64>::zeros((dim + 2, dim + 2));
    k.slice_mut(s![..dim, ..dim]).assign(&h);
    k.slice_mut(s![dim.., ..dim]).assign(&g);
    k.slice_mut(s![..dim, dim..]).assign(&g.t());

    let z = nullspace_basis(g.view())?;
    Ok(KktSystem { h, g, k, z, lambda })
}

fn to_nalgebra(a: ArrayView2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

/// Orthonormal basis of `ker G` for a full-row-rank `G` (`r × N`, `r ≤ N`),
/// from a Householder QR of `Gᵀ`: the trailing `N − r` columns of `Q`.
pub fn nullspace_basis(g: ArrayView2<f64>) -> Result<Array2<f64>> {
    let (r, n) = g.dim();
    if r > n {
        return Err(DipcaError::RankDeficient { sigma_min: 0.0 });
    }
    if r > 0 {
        let sv = to_nalgebra(g).singular_values();
        let sigma_min = sv.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        if !(sigma_min >= 1e-10) {
            return Err(DipcaError::RankDeficient { sigma_min });
        }
    }

    let mut a = g.t().to_owned();
    let mut reflectors: Vec<Array1<f64>> = Vec::with_capacity(r);
    for j in 0..r {
        let x = a.slice(s![j.., j]).to_owned();
        let alpha = -x[0].signum() * norm2(x.view());
        let mut v = x;
        v[0] -= alpha;
        let vn = norm2(v.view());
        let v = if vn > 0.0 { v / vn } else { v };
        let mut block = a.slice_mut(s![j.., j..]);
        let proj = v.dot(&block);
        for (mut col, p) in block.columns_mut().into_iter().zip(proj.iter()) {
            col.scaled_add(-2.0 * p, &v);
        }
        reflectors.push(v);
    }

    let mut q = Array2::<f64>::eye(n);
    for (j, v) in reflectors.iter().enumerate().rev() {
        let mut block = q.slice_mut(s![j.., ..]);
        let proj = v.dot(&block);
        for (mut col, p) in block.columns_mut().into_iter().zip(proj.iter()) {
            col.scaled_add(-2.0 * p, v);
        }
    }
    Ok(q.slice(s![.., r..]).to_owned())
}

/// Matrix ∞-norm (largest absolute row sum).
pub fn matrix_norm_inf(a: ArrayView2<f64>) -> f64 {
    a.rows()
        .into_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Default zero tolerance `1e-8 · max(1, ‖M‖∞)`.
pub fn default_zero_tol(m: ArrayView2<f64>) -> f64 {
    ZERO_TOL_SCALE * matrix_norm_inf(m).max(1.0)
}

/// Ascending eigenvalues of a symmetric matrix.
pub fn symmetric_eigenvalues(m: ArrayView2<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut vals: Vec<f64> = SymmetricEigen::new(to_nalgebra(m)).eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    vals
}

fn count_signs(vals: &[f64], zero_tol: f64) -> Inertia {
    let n_plus = vals.iter().filter(|&&v| v > zero_tol).count();
    let n_minus = vals.iter().filter(|&&v| v < -zero_tol).count();
    Inertia::new(n_plus, n_minus, vals.len() - n_plus - n_minus)
}

/// Eigenvalue sign counts of a symmetric `m`, with eigenvalues in
/// `[−zero_tol, zero_tol]` counted as zero. `None` selects
/// [`default_zero_tol`].
pub fn inertia_of(m: ArrayView2<f64>, zero_tol: Option<f64>) -> Inertia {
    let tol = zero_tol.unwrap_or_else(|| default_zero_tol(m));
    count_signs(&symmetric_eigenvalues(m), tol)
}

/// Classifies a stationary point through the inertia of `K`, and
/// independently through the spectrum of `ZᵀHZ`.
pub fn classify_fixed_point(
    w: ArrayView1<f64>,
    beta: ArrayView1<f64>,
    kernels: &KernelSet,
) -> Result<Classification> {
    let sys = build_kkt_system(w, beta, kernels)?;
    let (rw, rb) = first_order_residuals(w, beta, kernels);
    let kkt_residual = rw.max(rb);
    if !(kkt_residual <= FIXED_POINT_GATE) {
        return Err(DipcaError::NotAFixedPoint {
            residual: kkt_residual,
            gate: FIXED_POINT_GATE,
        });
    }
    let (m, s) = (kernels.features(), kernels.lags());

    let inertia = inertia_of(sys.balanced_k().view(), None);
    let is_max = inertia == Inertia::new(2, m + s, 0);

    let reduced = sys.reduced_hessian();
    let reduced_spectrum = symmetric_eigenvalues(reduced.view());
    let tol = default_zero_tol(reduced.view());
    let negatives = reduced_spectrum.iter().filter(|&&v| v < -tol).count();
    let reduced_negative_definite = negatives == reduced_spectrum.len();
    let fraction_negative = if reduced_spectrum.is_empty() {
        1.0
    } else {
        negatives as f64 / reduced_spectrum.len() as f64
    };

    Ok(Classification {
        is_max,
        inertia,
        reduced_spectrum,
        reduced_negative_definite,
        fraction_negative,
        lambda: sys.lambda,
        kkt_residual,
    })
}
