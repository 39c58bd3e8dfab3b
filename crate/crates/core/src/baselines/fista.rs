//! ℓ₁-regularized least squares by accelerated proximal gradient.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};

/// Relative objective change that ends the iteration.
pub const FISTA_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct FistaResult {
    pub x: Vec<f64>,
    /// Objective `½‖y − Jx‖² + λ‖x‖₁` after each iteration (index 0 is x = 0).
    pub objective: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

pub fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

pub fn lasso_objective(j: &Array2<f64>, y: &[f64], lambda: f64, x: &[f64]) -> f64 {
    let r = j.dot(&ArrayView1::from(x)) - ArrayView1::from(y);
    0.5 * r.dot(&r) + lambda * x.iter().map(|v| v.abs()).sum::<f64>()
}

/// Largest eigenvalue of `JᵀJ` by power iteration.
pub fn lipschitz_constant(j: &Array2<f64>) -> f64 {
    let n = j.ncols();
    // Deterministic, non-degenerate start.
    let mut v = Array1::from_shape_fn(n, |i| 1.0 + (i as f64 * 0.618_033_988_75).fract());
    let norm = v.dot(&v).sqrt();
    v /= norm;
    let mut est = 0.0;
    for _ in 0..1000 {
        let w = j.t().dot(&j.dot(&v));
        let nw = w.dot(&w).sqrt();
        if nw == 0.0 {
            return 0.0;
        }
        let next = v.dot(&w);
        v = w / nw;
        if (next - est).abs() <= 1e-12 * next.abs() {
            est = next;
            break;
        }
        est = next;
    }
    est
}

/// Minimizes `½‖y − Jx‖² + λ‖x‖₁` from `x = 0`.
///
/// Momentum restarts whenever the objective would increase, in which case a
/// plain proximal-gradient step is taken instead, so the objective sequence
/// is nonincreasing.
pub fn fista(j: &Array2<f64>, y: &[f64], lambda: f64, iterations: usize) -> Result<FistaResult> {
    fista_with_tolerance(j, y, lambda, iterations, FISTA_TOLERANCE)
}

pub fn fista_with_tolerance(
    j: &Array2<f64>,
    y: &[f64],
    lambda: f64,
    iterations: usize,
    tolerance: f64,
) -> Result<FistaResult> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::invalid(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    if j.nrows() != y.len() {
        return Err(Error::invalid(format!(
            "matrix has {} rows, measurements have length {}",
            j.nrows(),
            y.len()
        )));
    }
    // Small margin over the power-iteration estimate keeps the step stable.
    let lip = lipschitz_constant(j) * 1.01;
    if lip.is_nan() || lip <= 0.0 {
        return Err(Error::invalid("measurement matrix is zero"));
    }
    let step = 1.0 / lip;
    let y = ArrayView1::from(y);
    let objective = |x: &Array1<f64>| {
        let r = j.dot(x) - y;
        0.5 * r.dot(&r) + lambda * x.iter().map(|v| v.abs()).sum::<f64>()
    };
    let prox_step = |z: &Array1<f64>| {
        let grad = j.t().dot(&(j.dot(z) - y));
        let mut x = z - &(grad * step);
        x.mapv_inplace(|v| soft_threshold(v, step * lambda));
        x
    };

    let n = j.ncols();
    let mut x_prev = Array1::<f64>::zeros(n);
    let mut f_prev = objective(&x_prev);
    let mut z = x_prev.clone();
    let mut t = 1.0f64;
    let mut trace = vec![f_prev];
    let mut converged = false;
    let mut iters = 0;

    for _ in 0..iterations {
        iters += 1;
        let mut x = prox_step(&z);
        let mut f = objective(&x);
        if f > f_prev {
            t = 1.0;
            x = prox_step(&x_prev);
            f = objective(&x);
            if f > f_prev {
                // Numerically flat; keep the previous iterate.
                x = x_prev.clone();
                f = f_prev;
            }
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        z = &x + &((&x - &x_prev) * ((t - 1.0) / t_next));
        t = t_next;
        trace.push(f);
        let change = (f_prev - f).abs() / f_prev.abs().max(f64::MIN_POSITIVE);
        x_prev = x;
        f_prev = f;
        if change < tolerance && iters > 1 {
            converged = true;
            break;
        }
    }

    Ok(FistaResult {
        x: x_prev.to_vec(),
        objective: trace,
        iterations: iters,
        converged,
    })
}

/// `count` log-spaced weights from `λ_max = ‖Jᵀy‖_∞` down to `λ_max · 10⁻³`.
pub fn lambda_grid(j: &Array2<f64>, y: &[f64], count: usize) -> Vec<f64> {
    let corr = j.t().dot(&ArrayView1::from(y));
    let lmax = corr.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    match count {
        0 => Vec::new(),
        1 => vec![lmax * 0.1],
        _ => (0..count)
            .map(|k| lmax * 10f64.powf(-3.0 * k as f64 / (count - 1) as f64))
            .collect(),
    }
}

/// FISTA at each weight; the one with the lowest error against `truth` wins.
pub fn fista_oracle_lambda(
    j: &Array2<f64>,
    y: &[f64],
    truth: &[f64],
    lambdas: &[f64],
    iterations: usize,
) -> Result<(f64, Vec<f64>)> {
    let mut best: Option<(f64, f64, Vec<f64>)> = None;
    for &lambda in lambdas {
        let x = fista(j, y, lambda, iterations)?.x;
        let err: f64 = x.iter().zip(truth).map(|(a, b)| (a - b).powi(2)).sum();
        if best.as_ref().map_or(true, |b| err < b.0) {
            best = Some((err, lambda, x));
        }
    }
    let (_, lambda, x) = best.ok_or_else(|| Error::invalid("empty lambda sweep"))?;
    Ok((lambda, x))
}
