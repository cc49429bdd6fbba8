#![allow(dead_code)]

use dipca::{KernelSet, TimeSeriesData};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.sample::<f64, _>(StandardNormal))
}

pub fn unit_vector(rng: &mut ChaCha8Rng, dim: usize) -> Array1<f64> {
    loop {
        let v = Array1::from_shape_fn(dim, |_| rng.sample::<f64, _>(StandardNormal));
        let n = v.dot(&v).sqrt();
        if n > 1e-8 {
            return v / n;
        }
    }
}

pub fn random_symmetric(rng: &mut ChaCha8Rng, dim: usize) -> Array2<f64> {
    let a = gaussian_matrix(rng, dim, dim);
    (&a + &a.t()) / 2.0
}

pub fn random_data(seed: u64, rows: usize, cols: usize, lags: usize) -> TimeSeriesData {
    TimeSeriesData::new(gaussian_matrix(&mut rng(seed), rows, cols), lags).unwrap()
}

pub fn random_kernels(rng: &mut ChaCha8Rng, m: usize, s: usize) -> KernelSet {
    KernelSet::from_matrices((0..s).map(|_| random_symmetric(rng, m)).collect()).unwrap()
}

/// Reference kernel `½(Σ_t x_{s+t} x_{s+t−i}ᵀ + transpose)` by explicit loops.
pub fn kernel_by_loops(x: &Array2<f64>, s: usize, i: usize) -> Array2<f64> {
    let (rows, m) = x.dim();
    let n = rows - s;
    let mut k = Array2::<f64>::zeros((m, m));
    for t in 0..n {
        let head = s + t;
        let lag = s + t - i;
        for a in 0..m {
            for b in 0..m {
                k[[a, b]] += 0.5 * (x[[head, a]] * x[[lag, b]] + x[[lag, a]] * x[[head, b]]);
            }
        }
    }
    k
}

/// Cyclic Jacobi eigensolver: eigenvalues ascending and matching
/// eigenvectors as columns.
pub fn jacobi_eigen(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = a.nrows();
    let mut a = a.clone();
    let mut v = Array2::<f64>::eye(n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|p| (0..n).filter(move |&q| q != p).map(move |q| (p, q)))
            .map(|(p, q)| a[[p, q]] * a[[p, q]])
            .sum();
        let scale: f64 = a.iter().map(|x| x * x).sum();
        if off <= 1e-30 * scale.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[[i, i]].total_cmp(&a[[j, j]]));
    let vals = order.iter().map(|&i| a[[i, i]]).collect();
    let mut vecs = Array2::<f64>::zeros((n, n));
    for (col, &i) in order.iter().enumerate() {
        vecs.column_mut(col).assign(&v.column(i));
    }
    (vals, vecs)
}

/// Eigenpair of largest magnitude.
pub fn dominant_eigenpair(a: &Array2<f64>) -> (f64, Array1<f64>) {
    let (vals, vecs) = jacobi_eigen(a);
    let i = (0..vals.len())
        .max_by(|&i, &j| vals[i].abs().total_cmp(&vals[j].abs()))
        .unwrap();
    (vals[i], vecs.column(i).to_owned())
}

pub fn sign_counts(vals: &[f64], tol: f64) -> (usize, usize, usize) {
    let plus = vals.iter().filter(|&&v| v > tol).count();
    let minus = vals.iter().filter(|&&v| v < -tol).count();
    (plus, minus, vals.len() - plus - minus)
}

pub fn frobenius(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}
