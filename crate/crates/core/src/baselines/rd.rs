//! Rate–distortion references: entropy-coded uniform scalar quantization and
//! the Blahut–Arimoto computation of the RD function.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Bound on the rate error, in bits, that ends a Blahut–Arimoto run.
pub const BA_TOLERANCE: f64 = 1e-3;
const BA_MAX_ITERATIONS: usize = 20_000;
/// Kernel entries below `e^-KERNEL_CUTOFF` of their row maximum are dropped.
const KERNEL_CUTOFF: f64 = 60.0;

/// Rate in bits per symbol and mean squared (or given) distortion per symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RDPoint {
    pub rate: f64,
    pub distortion: f64,
}

/// Order-0 empirical entropy of an integer sequence, in bits per symbol.
pub fn empirical_entropy<T: std::hash::Hash + Eq + Copy>(symbols: &[T]) -> f64 {
    let mut counts: HashMap<T, usize> = HashMap::new();
    for &s in symbols {
        *counts.entry(s).or_default() += 1;
    }
    let n = symbols.len() as f64;
    let mut c: Vec<usize> = counts.into_values().collect();
    c.sort_unstable();
    c.iter()
        .map(|&k| {
            let p = k as f64 / n;
            -p * p.log2()
        })
        .sum::<f64>()
        .max(0.0)
}

/// Uniform mid-tread quantizer with the given step; the rate is the order-0
/// empirical entropy of the cell indices.
pub fn ecsq_rd_point(x: &[f64], step: f64) -> Result<RDPoint> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::invalid(format!("step must be positive, got {step}")));
    }
    if x.is_empty() {
        return Err(Error::invalid("empty source sequence"));
    }
    let idx: Vec<i64> = x.iter().map(|v| (v / step).round() as i64).collect();
    let distortion = x
        .iter()
        .zip(&idx)
        .map(|(v, &k)| (v - k as f64 * step).powi(2))
        .sum::<f64>()
        / x.len() as f64;
    Ok(RDPoint {
        rate: empirical_entropy(&idx),
        distortion,
    })
}

/// Discrete source with reproduction alphabet and a distortion matrix
/// (`source × reproduction`, row-major).
#[derive(Debug, Clone)]
pub struct DiscreteSource {
    pub pmf: Vec<f64>,
    pub reproductions: usize,
    pub distortion: Vec<f64>,
}

impl DiscreteSource {
    pub fn new(pmf: Vec<f64>, reproductions: usize, distortion: Vec<f64>) -> Result<Self> {
        let total: f64 = pmf.iter().sum();
        if pmf.is_empty() || pmf.iter().any(|&p| p.is_nan() || p < 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "pmf must be nonnegative and sum to 1 (sum {total})"
            )));
        }
        if reproductions == 0 || distortion.len() != pmf.len() * reproductions {
            return Err(Error::invalid(
                "distortion matrix shape does not match the alphabets",
            ));
        }
        if distortion.iter().any(|&d| !(d >= 0.0 && d.is_finite())) {
            return Err(Error::invalid("distortions must be finite and nonnegative"));
        }
        Ok(DiscreteSource {
            pmf,
            reproductions,
            distortion,
        })
    }

    /// Squared-error source on the given support, reproducing on the same points.
    pub fn squared_error(points: &[f64], pmf: Vec<f64>) -> Result<Self> {
        let d = points
            .iter()
            .flat_map(|&a| points.iter().map(move |&b| (a - b).powi(2)))
            .collect();
        Self::new(pmf, points.len(), d)
    }

    /// `min_x̂ E d(X, x̂)`: the distortion reachable at zero rate.
    pub fn max_distortion(&self) -> f64 {
        let r = self.reproductions;
        (0..r)
            .map(|j| {
                self.pmf
                    .iter()
                    .enumerate()
                    .map(|(i, p)| p * self.distortion[i * r + j])
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Equal-width bins of a Laplace density `exp(−|x|/b)/(2b)` on
/// `[−half_width, half_width]`; returns bin centres and renormalized mass.
pub fn discretized_laplace(scale: f64, half_width: f64, bins: usize) -> (Vec<f64>, Vec<f64>) {
    let width = 2.0 * half_width / (bins - 1) as f64;
    let cdf = |x: f64| {
        if x < 0.0 {
            0.5 * (x / scale).exp()
        } else {
            1.0 - 0.5 * (-x / scale).exp()
        }
    };
    let centres: Vec<f64> = (0..bins).map(|k| -half_width + k as f64 * width).collect();
    let mut pmf: Vec<f64> = centres
        .iter()
        .map(|&c| cdf(c + 0.5 * width) - cdf(c - 0.5 * width))
        .collect();
    let total: f64 = pmf.iter().sum();
    pmf.iter_mut().for_each(|p| *p /= total);
    (centres, pmf)
}

/// Rate–distortion points for each slope `β > 0` (Lagrange multiplier on
/// distortion, in nats per unit distortion), returned in input order.
pub fn blahut_arimoto(source: &DiscreteSource, slopes: &[f64]) -> Result<Vec<RDPoint>> {
    if let Some(&b) = slopes.iter().find(|&&b| !(b.is_finite() && b > 0.0)) {
        return Err(Error::invalid(format!("slopes must be positive, got {b}")));
    }
    // Steepest slope first; each run starts from the previous output law,
    // which is close to the next optimum and saves most of the iterations.
    let mut order: Vec<usize> = (0..slopes.len()).collect();
    order.sort_by(|&a, &b| slopes[b].total_cmp(&slopes[a]));
    let mut q = vec![1.0 / source.reproductions as f64; source.reproductions];
    let mut out = vec![
        RDPoint {
            rate: 0.0,
            distortion: 0.0
        };
        slopes.len()
    ];
    for i in order {
        // Keep every reproduction reachable: a weight that underflowed to
        // zero at one slope would otherwise stay zero at all later ones.
        let floor = 1e-6 / q.len() as f64;
        q.iter_mut().for_each(|v| *v = (*v + floor) / (1.0 + 1e-6));
        out[i] = blahut_arimoto_point(source, slopes[i], &mut q);
    }
    Ok(out)
}

fn blahut_arimoto_point(source: &DiscreteSource, beta: f64, q: &mut [f64]) -> RDPoint {
    let nx = source.pmf.len();
    let nr = source.reproductions;
    let d = &source.distortion;
    // Rows of exp(−β·d), shifted per row for range safety; the shift cancels
    // in Q(x̂|x) and is restored in the rate. Each row keeps only the span
    // of entries above e^-KERNEL_CUTOFF, which for squared error on a fine
    // grid is a narrow band around the diagonal.
    let mut a = vec![0.0; nx * nr];
    let mut shift = vec![0.0; nx];
    let mut span = vec![(0usize, 0usize); nx];
    for i in 0..nx {
        let row = &d[i * nr..(i + 1) * nr];
        let m = row.iter().copied().fold(f64::INFINITY, f64::min);
        shift[i] = m;
        let mut lo = nr;
        let mut hi = 0;
        for j in 0..nr {
            let e = beta * (row[j] - m);
            if e <= KERNEL_CUTOFF {
                a[i * nr + j] = (-e).exp();
                lo = lo.min(j);
                hi = j + 1;
            }
        }
        span[i] = (lo, hi);
    }
    let mut c = vec![0.0; nx];
    let mut colsum = vec![0.0; nr];
    let mut dsum = vec![0.0; nr];
    let mut point = RDPoint {
        rate: 0.0,
        distortion: 0.0,
    };

    for _ in 0..BA_MAX_ITERATIONS {
        for i in 0..nx {
            let (lo, hi) = span[i];
            let row = &a[i * nr + lo..i * nr + hi];
            c[i] = row.iter().zip(&q[lo..hi]).map(|(x, y)| x * y).sum();
        }
        colsum.iter_mut().for_each(|v| *v = 0.0);
        dsum.iter_mut().for_each(|v| *v = 0.0);
        let mut log_term = 0.0;
        for i in 0..nx {
            let p = source.pmf[i];
            if p == 0.0 {
                continue;
            }
            let w = p / c[i];
            log_term += p * (c[i].ln() - beta * shift[i]);
            let (lo, hi) = span[i];
            let row = &a[i * nr + lo..i * nr + hi];
            let drow = &d[i * nr + lo..i * nr + hi];
            for ((cs, ds), (&x, &dd)) in colsum[lo..hi]
                .iter_mut()
                .zip(&mut dsum[lo..hi])
                .zip(row.iter().zip(drow))
            {
                let t = w * x;
                *cs += t;
                *ds += t * dd;
            }
        }
        let distortion: f64 = q.iter().zip(&dsum).map(|(a, b)| a * b).sum();
        // I(Q) against the current output law: −β·D − Σ p ln c (nats).
        let rate = ((-beta * distortion - log_term) / std::f64::consts::LN_2).max(0.0);
        // Gap between the upper and lower bounds on the rate at this slope.
        let max_c = colsum.iter().copied().fold(0.0, f64::max);
        let mean_log: f64 = q
            .iter()
            .zip(&colsum)
            .filter(|(&qj, &cj)| qj > 0.0 && cj > 0.0)
            .map(|(&qj, &cj)| qj * cj * cj.ln())
            .sum();
        let gap = (max_c.ln() - mean_log) / std::f64::consts::LN_2;
        for (qj, s) in q.iter_mut().zip(&colsum) {
            *qj *= s;
        }
        let total: f64 = q.iter().sum();
        q.iter_mut().for_each(|v| *v /= total);
        point = RDPoint { rate, distortion };
        if gap < BA_TOLERANCE {
            break;
        }
    }
    point
}

/// Piecewise-linear interpolation of an RD curve.
#[derive(Debug, Clone)]
pub struct RdCurve {
    points: Vec<RDPoint>,
    max_distortion: f64,
}

impl RdCurve {
    pub fn new(mut points: Vec<RDPoint>, max_distortion: f64) -> Self {
        points.sort_by(|a, b| a.distortion.total_cmp(&b.distortion));
        RdCurve {
            points,
            max_distortion,
        }
    }

    pub fn points(&self) -> &[RDPoint] {
        &self.points
    }

    /// Rate at distortion `d`; zero at or beyond the zero-rate distortion,
    /// the first point's rate below the sampled range.
    pub fn rate_at(&self, d: f64) -> f64 {
        if d >= self.max_distortion || self.points.is_empty() {
            return 0.0;
        }
        let pts = &self.points;
        if d <= pts[0].distortion {
            return pts[0].rate;
        }
        let k = pts.partition_point(|p| p.distortion < d);
        let (lo, hi) = if k == pts.len() {
            (
                pts[k - 1],
                RDPoint {
                    rate: 0.0,
                    distortion: self.max_distortion,
                },
            )
        } else {
            (pts[k - 1], pts[k])
        };
        let t = (d - lo.distortion) / (hi.distortion - lo.distortion);
        lo.rate + t * (hi.rate - lo.rate)
    }
}

/// `h(X) − ½ log₂(2πeD)` for a source of differential entropy `h` bits.
pub fn shannon_lower_bound(h_bits: f64, d: f64) -> f64 {
    h_bits - 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * d).log2()
}

/// Differential entropy of a Laplace law with scale `b`, in bits.
pub fn laplace_entropy_bits(scale: f64) -> f64 {
    (2.0 * std::f64::consts::E * scale).log2()
}
