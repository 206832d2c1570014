//! Perron eigenpairs of small nonnegative matrices and log-domain sums.

use rayon::prelude::*;

use crate::error::{Error, Result};

pub const PERRON_TOL: f64 = 1e-12;
pub const PERRON_MAX_ITER: usize = 100_000;

/// Perron root with Collatz-Wielandt bounds `lower <= lambda <= upper`
/// certified by the final positive iterate.
#[derive(Debug, Clone)]
pub struct Perron {
    pub lambda: f64,
    pub lower: f64,
    pub upper: f64,
    /// Right eigenvector normalized to unit sum.
    pub vector: Vec<f64>,
    pub iterations: usize,
}

fn mat_vec(m: &[Vec<f64>], x: &[f64], out: &mut [f64]) {
    for (o, row) in out.iter_mut().zip(m) {
        *o = row.iter().zip(x).map(|(a, b)| a * b).sum();
    }
}

fn cw_bounds(x: &[f64], mx: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for (a, b) in x.iter().zip(mx) {
        if *a > 1e-300 {
            let r = b / a;
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    (lo, hi)
}

/// Power iteration on `M + alpha I` (the shift breaks periodicity). Stops
/// once the Collatz-Wielandt bounds agree to `tol` relative, or the
/// eigenvalue estimate changes by less than `tol` relative.
pub fn perron(m: &[Vec<f64>], tol: f64, max_iter: usize) -> Result<Perron> {
    let n = m.len();
    if n == 0 || m.iter().any(|r| r.len() != n) {
        return Err(Error::invalid("Perron root needs a nonempty square matrix"));
    }
    if m.iter().flatten().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::invalid("matrix entries must be finite and nonnegative"));
    }
    let scale = m.iter().flatten().fold(0.0f64, |a, &b| a.max(b));
    if scale == 0.0 {
        return Ok(Perron {
            lambda: 0.0,
            lower: 0.0,
            upper: 0.0,
            vector: vec![1.0 / n as f64; n],
            iterations: 0,
        });
    }
    let a: Vec<Vec<f64>> = m.iter().map(|r| r.iter().map(|v| v / scale).collect()).collect();
    let alpha = 0.5;
    let mut x = vec![1.0 / n as f64; n];
    let mut mx = vec![0.0; n];
    let mut prev = f64::NAN;
    for it in 1..=max_iter {
        mat_vec(&a, &x, &mut mx);
        let (lo, hi) = cw_bounds(&x, &mx);
        let lam: f64 = mx.iter().sum::<f64>() / x.iter().sum::<f64>();
        let settled = (lam - prev).abs() <= tol * lam && it > 2;
        if hi - lo <= tol * hi || (settled && hi.is_finite()) {
            return Ok(Perron {
                lambda: lam * scale,
                lower: lo.min(lam) * scale,
                upper: hi.max(lam) * scale,
                vector: x,
                iterations: it,
            });
        }
        prev = lam;
        let mut s = 0.0;
        for (xi, mi) in x.iter_mut().zip(&mx) {
            *xi = mi + alpha * *xi;
            s += *xi;
        }
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::NonConvergence("power iteration collapsed".into()));
        }
        for xi in x.iter_mut() {
            *xi /= s;
        }
    }
    Err(Error::NonConvergence(format!(
        "power iteration did not settle in {max_iter} iterations"
    )))
}

pub fn transpose(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = m.len();
    (0..n).map(|i| (0..n).map(|j| m[j][i]).collect()).collect()
}

/// Stationary row vector of a stochastic matrix.
pub fn stationary(p: &[Vec<f64>]) -> Result<Vec<f64>> {
    Ok(perron(&transpose(p), PERRON_TOL, PERRON_MAX_ITER)?.vector)
}

/// `log sum exp(x_i)`; `-inf` for an empty slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

const LSE_CHUNK: usize = 1 << 14;

/// Parallel [`log_sum_exp`] whose reduction order depends only on the
/// length of the input, never on the thread count.
pub fn log_sum_exp_par(xs: &[f64]) -> f64 {
    if xs.len() <= LSE_CHUNK {
        return log_sum_exp(xs);
    }
    let parts: Vec<f64> = xs.par_chunks(LSE_CHUNK).map(log_sum_exp).collect();
    log_sum_exp(&parts)
}

/// `log sum exp(t * x_i)`.
pub fn log_sum_exp_scaled(xs: &[f64], t: f64) -> f64 {
    if xs.len() <= LSE_CHUNK {
        let v: Vec<f64> = xs.iter().map(|x| t * x).collect();
        return log_sum_exp(&v);
    }
    let parts: Vec<f64> = xs
        .par_chunks(LSE_CHUNK)
        .map(|c| {
            let v: Vec<f64> = c.iter().map(|x| t * x).collect();
            log_sum_exp(&v)
        })
        .collect();
    log_sum_exp(&parts)
}
