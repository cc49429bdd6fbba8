//! Small vector helpers shared by the solvers.

use ndarray::{Array1, ArrayView1};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn norm2(v: ArrayView1<f64>) -> f64 {
    v.dot(&v).sqrt()
}

pub fn norm_inf(v: ArrayView1<f64>) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Uniformly distributed point on the unit sphere in `R^dim`.
pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Array1<f64> {
    loop {
        let v: Array1<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let nrm = norm2(v.view());
        if nrm > 1e-300 {
            return v / nrm;
        }
    }
}

/// Flip `v` in place so that its largest-magnitude entry is positive.
/// Returns `true` when a flip happened.
pub fn normalize_sign(v: &mut Array1<f64>) -> bool {
    let mut best = 0.0_f64;
    let mut sign = 1.0;
    for &x in v.iter() {
        if x.abs() > best {
            best = x.abs();
            sign = x.signum();
        }
    }
    if sign < 0.0 {
        v.mapv_inplace(|x| -x);
        true
    } else {
        false
    }
}
