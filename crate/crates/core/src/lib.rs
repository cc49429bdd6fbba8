//! Dynamic inner PCA (DiPCA).
//!
//! Extracts latent time series `t = Xw` whose order-`s` autoregressive
//! prediction `t̂_i = Σ_j β_j t_{i−j}` is maximally covariant with `t`, by
//! solving
//!
//! ```text
//! max_{w, β}  wᵀ (Σ_i β_i Y_i) w   s.t.  ‖w‖₂ ≤ 1, ‖β‖₂ ≤ 1
//! ```
//!
//! Modules:
//! - [`lagmat`]: lagged views and kernels `Y_i`.
//! - [`operator`]: dense and matrix-free kernel products.
//! - [`solver`]: the single-power-step algorithm and the coordinate
//!   maximization algorithm, plus stationarity metrics.
//! - [`secondorder`]: local-maximum test through the inertia of the bordered
//!   KKT matrix.
//! - [`deflate`]: multi-component extraction, AR prediction, reconstruction.
//! - [`bench`]: planted synthetic data and the benchmark harness.
//! - [`io`]: CSV and JSON formats.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod deflate;
pub mod error;
pub mod io;
pub mod lagmat;
pub mod linalg;
pub mod operator;
pub mod secondorder;
pub mod solver;

pub use error::{DipcaError, Result};
pub use lagmat::{build_kernels, center_columns, combine_kernels, lag_view, KernelSet, TimeSeriesData};
pub use operator::{KernelOperator, LaggedOperator};
pub use solver::{
    Algorithm, Backend, Diagnostic, InitMode, SolveOptions, SolveReport, SolverState,
};
