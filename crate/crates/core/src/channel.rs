//! Measurement systems: an operator `J` followed by a noise law.
//!
//! Log-likelihoods are in nats. The Gibbs sampler needs the likelihood of
//! every candidate value of one coordinate, so the channel keeps a residual
//! `r = y − J x̂` that is updated in O(M) per committed change.

use std::fmt;
use std::sync::Arc;

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};

type MapFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// A user-supplied (possibly nonlinear) operator.
#[derive(Clone)]
pub struct MapOperator {
    name: String,
    output_len: usize,
    func: Arc<MapFn>,
}

impl MapOperator {
    pub fn new(
        name: impl Into<String>,
        output_len: usize,
        func: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        MapOperator {
            name: name.into(),
            output_len,
            func: Arc::new(func),
        }
    }
}

impl fmt::Debug for MapOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MapOperator")
            .field("name", &self.name)
            .field("output_len", &self.output_len)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum SystemOperator {
    Identity,
    /// Dense `M × N` matrix.
    Linear(Array2<f64>),
    Map(MapOperator),
}

impl SystemOperator {
    pub fn linear(matrix: Array2<f64>) -> Result<Self> {
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("operator entries must be finite"));
        }
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(Error::invalid("operator matrix must be nonempty"));
        }
        Ok(SystemOperator::Linear(matrix))
    }

    pub fn matrix(&self) -> Option<&Array2<f64>> {
        match self {
            SystemOperator::Linear(m) => Some(m),
            _ => None,
        }
    }

    /// `w = J(x̂)`.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            SystemOperator::Identity => Ok(x.to_vec()),
            SystemOperator::Linear(j) => {
                if j.ncols() != x.len() {
                    return Err(Error::invalid(format!(
                        "operator has {} columns, input has length {}",
                        j.ncols(),
                        x.len()
                    )));
                }
                Ok(j.dot(&ArrayView1::from(x)).to_vec())
            }
            SystemOperator::Map(op) => {
                let w = (op.func)(x);
                if w.len() != op.output_len {
                    return Err(Error::invalid(format!(
                        "map `{}` returned {} values, expected {}",
                        op.name,
                        w.len(),
                        op.output_len
                    )));
                }
                Ok(w)
            }
        }
    }

    /// `J · 1_S` for the index set `positions` (linear operators only).
    pub(crate) fn apply_indicator(&self, positions: &[usize], input_len: usize) -> Vec<f64> {
        match self {
            SystemOperator::Identity => {
                let mut v = vec![0.0; input_len];
                for &p in positions {
                    v[p] = 1.0;
                }
                v
            }
            SystemOperator::Linear(j) => {
                let mut v = Array1::<f64>::zeros(j.nrows());
                for &p in positions {
                    v += &j.column(p);
                }
                v.to_vec()
            }
            SystemOperator::Map(_) => {
                unreachable!("indicator images are only defined for linear operators")
            }
        }
    }
}

/// Noise law `f_{Y|W}`. Only additive white Gaussian noise ships.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    Awgn { variance: f64 },
}

impl NoiseModel {
    pub fn awgn(variance: f64) -> Result<Self> {
        if !(variance.is_finite() && variance > 0.0) {
            return Err(Error::invalid(format!(
                "noise variance must be positive, got {variance}"
            )));
        }
        Ok(NoiseModel::Awgn { variance })
    }

    pub fn variance(&self) -> f64 {
        match *self {
            NoiseModel::Awgn { variance } => variance,
        }
    }

    /// `log f_{Y|W}` from the squared residual norm over `m` measurements.
    fn log_likelihood(&self, sq_norm: f64, m: usize) -> f64 {
        match *self {
            NoiseModel::Awgn { variance } => {
                -0.5 * m as f64 * (2.0 * std::f64::consts::PI * variance).ln()
                    - sq_norm / (2.0 * variance)
            }
        }
    }
}

/// Operator, noise law and observed measurements.
#[derive(Debug, Clone)]
pub struct ChannelModel {
    operator: SystemOperator,
    noise: NoiseModel,
    y: Vec<f64>,
    input_len: usize,
    /// `‖J e_n‖²` per input coordinate (linear operators).
    column_sq_norms: Vec<f64>,
}

impl ChannelModel {
    pub fn identity(y: Vec<f64>, noise: NoiseModel) -> Result<Self> {
        let n = y.len();
        Self::new(SystemOperator::Identity, noise, y, n)
    }

    pub fn linear(matrix: Array2<f64>, y: Vec<f64>, noise: NoiseModel) -> Result<Self> {
        let n = matrix.ncols();
        Self::new(SystemOperator::linear(matrix)?, noise, y, n)
    }

    pub fn new(
        operator: SystemOperator,
        noise: NoiseModel,
        y: Vec<f64>,
        input_len: usize,
    ) -> Result<Self> {
        if y.is_empty() || input_len == 0 {
            return Err(Error::invalid(
                "channel needs nonempty input and measurements",
            ));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("measurements must be finite"));
        }
        let expected = match &operator {
            SystemOperator::Identity => input_len,
            SystemOperator::Linear(j) => {
                if j.ncols() != input_len {
                    return Err(Error::invalid(format!(
                        "operator has {} columns, input length is {input_len}",
                        j.ncols()
                    )));
                }
                j.nrows()
            }
            SystemOperator::Map(op) => op.output_len,
        };
        if y.len() != expected {
            return Err(Error::invalid(format!(
                "{} measurements but operator produces {expected}",
                y.len()
            )));
        }
        let column_sq_norms = match &operator {
            SystemOperator::Linear(j) => j.columns().into_iter().map(|c| c.dot(&c)).collect(),
            _ => Vec::new(),
        };
        Ok(ChannelModel {
            operator,
            noise,
            y,
            input_len,
            column_sq_norms,
        })
    }

    /// Lossy-compression channel: identity operator with `σ² = 1/(2λ)`, so the
    /// negative log-likelihood is `λ‖y − x̂‖²` nats plus a constant.
    pub fn lossy(y: Vec<f64>, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::invalid(format!(
                "slope must be positive, got {lambda}"
            )));
        }
        Self::identity(y, NoiseModel::awgn(1.0 / (2.0 * lambda))?)
    }

    /// Same operator and measurements with a different noise law.
    pub fn with_noise(&self, noise: NoiseModel) -> Self {
        ChannelModel {
            noise,
            ..self.clone()
        }
    }

    pub fn operator(&self) -> &SystemOperator {
        &self.operator
    }

    pub fn noise(&self) -> NoiseModel {
        self.noise
    }

    pub fn measurements(&self) -> &[f64] {
        &self.y
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn output_len(&self) -> usize {
        self.y.len()
    }

    pub fn apply_operator(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        self.operator.apply(x)
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_len {
            return Err(Error::invalid(format!(
                "estimate has length {}, channel expects {}",
                x.len(),
                self.input_len
            )));
        }
        Ok(())
    }

    pub fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        let w = self.apply_operator(x)?;
        Ok(self.y.iter().zip(&w).map(|(y, w)| y - w).collect())
    }

    /// `log f_{Y|W}(y | w = J(x̂))` in nats.
    pub fn log_likelihood(&self, x: &[f64]) -> Result<f64> {
        let r = self.residual(x)?;
        let sq: f64 = r.iter().map(|v| v * v).sum();
        self.finite(self.noise.log_likelihood(sq, self.y.len()))
    }

    fn finite(&self, v: f64) -> Result<f64> {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Numeric("non-finite log-likelihood".into()))
        }
    }

    fn log_likelihood_from_sq(&self, sq_norm: f64) -> f64 {
        self.noise.log_likelihood(sq_norm, self.y.len())
    }

    /// Negative log-likelihood with every position in `positions` of `x`
    /// replaced by `value`.
    pub(crate) fn neg_log_likelihood_with(
        &self,
        x: &[f64],
        positions: &[usize],
        value: f64,
    ) -> Result<f64> {
        let mut x = x.to_vec();
        for &p in positions {
            x[p] = value;
        }
        Ok(-self.log_likelihood(&x)?)
    }

    /// Data-aware starting point: `y` for the identity, per-column
    /// back-projection `⟨J e_n, y⟩ / ‖J e_n‖²` for matrices, zero otherwise.
    pub fn back_projection(&self) -> Vec<f64> {
        match &self.operator {
            SystemOperator::Identity => self.y.clone(),
            SystemOperator::Linear(j) => {
                let y = ArrayView1::from(&self.y[..]);
                j.columns()
                    .into_iter()
                    .zip(&self.column_sq_norms)
                    .map(|(c, &nn)| if nn > 0.0 { c.dot(&y) / nn } else { 0.0 })
                    .collect()
            }
            SystemOperator::Map(_) => vec![0.0; self.input_len],
        }
    }

    /// Residual cache for the estimate `x`.
    pub fn residual_cache(&self, x: &[f64]) -> Result<ResidualCache> {
        let residual = self.residual(x)?;
        let sq_norm = residual.iter().map(|v| v * v).sum();
        Ok(ResidualCache {
            residual,
            sq_norm,
            x: x.to_vec(),
        })
    }

    /// Writes into `out[k]` the log-likelihood (nats) obtained by setting
    /// coordinate `n` to `values[k]`; the cache is not modified.
    pub fn candidate_log_likelihoods(
        &self,
        cache: &ResidualCache,
        n: usize,
        values: &[f64],
        out: &mut [f64],
    ) {
        let current = cache.x[n];
        let NoiseModel::Awgn { variance } = self.noise;
        let offset = self.noise.log_likelihood(0.0, self.y.len());
        let inv = 1.0 / (2.0 * variance);
        match &self.operator {
            SystemOperator::Identity => {
                let r = cache.residual[n];
                for (slot, &v) in out.iter_mut().zip(values) {
                    let d = v - current;
                    let sq = cache.sq_norm - 2.0 * d * r + d * d;
                    *slot = offset - sq.max(0.0) * inv;
                }
            }
            SystemOperator::Linear(j) => {
                let c = j.column(n).dot(&ArrayView1::from(&cache.residual[..]));
                let jj = self.column_sq_norms[n];
                for (slot, &v) in out.iter_mut().zip(values) {
                    let d = v - current;
                    let sq = cache.sq_norm - 2.0 * d * c + d * d * jj;
                    *slot = offset - sq.max(0.0) * inv;
                }
            }
            SystemOperator::Map(_) => {
                let mut x = cache.x.clone();
                for (slot, &v) in out.iter_mut().zip(values) {
                    x[n] = v;
                    *slot = self.log_likelihood(&x).unwrap_or(f64::NEG_INFINITY);
                }
            }
        }
    }

    /// Changes coordinate `n` from `old` to `new`, updating the cached
    /// residual, and returns the new log-likelihood in nats.
    pub fn delta_log_likelihood(
        &self,
        cache: &mut ResidualCache,
        n: usize,
        old: f64,
        new: f64,
    ) -> Result<f64> {
        if n >= self.input_len {
            return Err(Error::invalid(format!(
                "coordinate {n} out of range for input length {}",
                self.input_len
            )));
        }
        debug_assert!((cache.x[n] - old).abs() <= 1e-12 * old.abs().max(1.0));
        let d = new - old;
        if d != 0.0 {
            match &self.operator {
                SystemOperator::Identity => {
                    let r = &mut cache.residual[n];
                    cache.sq_norm -= *r * *r;
                    *r -= d;
                    cache.sq_norm += *r * *r;
                }
                SystemOperator::Linear(j) => {
                    for (r, a) in cache.residual.iter_mut().zip(j.column(n)) {
                        *r -= d * a;
                    }
                    cache.sq_norm = cache.residual.iter().map(|v| v * v).sum();
                }
                SystemOperator::Map(_) => {
                    cache.x[n] = new;
                    *cache = self.residual_cache(&cache.x)?;
                }
            }
            cache.x[n] = new;
        }
        self.finite(self.log_likelihood_from_sq(cache.sq_norm.max(0.0)))
    }

    /// Recomputes the cached residual from scratch.
    pub fn refresh(&self, cache: &mut ResidualCache) -> Result<()> {
        let x = std::mem::take(&mut cache.x);
        *cache = self.residual_cache(&x)?;
        Ok(())
    }

    pub fn cached_log_likelihood(&self, cache: &ResidualCache) -> f64 {
        self.log_likelihood_from_sq(cache.sq_norm.max(0.0))
    }
}

/// `r = y − J x̂` together with `‖r‖²` and the estimate it was computed for.
#[derive(Debug, Clone)]
pub struct ResidualCache {
    residual: Vec<f64>,
    sq_norm: f64,
    x: Vec<f64>,
}

impl ResidualCache {
    pub fn residual(&self) -> &[f64] {
        &self.residual
    }

    pub fn sq_norm(&self) -> f64 {
        self.sq_norm
    }

    pub fn estimate(&self) -> &[f64] {
        &self.x
    }
}

/// Parses a whitespace-separated row-major matrix, one row per line.
pub fn parse_matrix(text: &str) -> Result<Array2<f64>> {
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(parse_vector)
        .collect::<Result<_>>()?;
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 {
        return Err(Error::invalid("empty matrix"));
    }
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(Error::invalid(format!(
            "row {i} has {} entries, expected {ncols}",
            r.len()
        )));
    }
    let nrows = rows.len();
    Array2::from_shape_vec((nrows, ncols), rows.into_iter().flatten().collect())
        .map_err(|e| Error::invalid(e.to_string()))
}

pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    text.split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|e| Error::invalid(format!("bad number `{t}`: {e}")))
        })
        .collect()
}

pub fn format_matrix(m: &Array2<f64>) -> String {
    m.rows()
        .into_iter()
        .map(|r| format_vector(r.as_slice().map_or(&r.to_vec()[..], |s| s)))
        .collect::<Vec<_>>()
        .join("")
}

/// One line, values separated by single spaces.
pub fn format_vector(v: &[f64]) -> String {
    let mut s = v
        .iter()
        .map(|x| format!("{x}"))
        .collect::<Vec<_>>()
        .join(" ");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn awgn(v: f64) -> NoiseModel {
        NoiseModel::awgn(v).unwrap()
    }

    fn random_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> Array2<f64> {
        Array2::from_shape_fn((m, n), |_| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn identity_and_unit_matrix() {
        assert_eq!(
            SystemOperator::Identity.apply(&[1.0, 2.0]).unwrap(),
            vec![1.0, 2.0]
        );
        let op = SystemOperator::linear(Array2::eye(2)).unwrap();
        assert_eq!(op.apply(&[3.0, -1.0]).unwrap(), vec![3.0, -1.0]);
        assert!(op.apply(&[1.0]).is_err());
    }

    #[test]
    fn matrix_product_matches_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let (m, n) = (rng.random_range(1..=8), rng.random_range(1..=8));
            let j = random_matrix(&mut rng, m, n);
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let w = SystemOperator::linear(j.clone())
                .unwrap()
                .apply(&x)
                .unwrap();
            for r in 0..m {
                let mut acc = 0.0;
                for c in 0..n {
                    acc += j[[r, c]] * x[c];
                }
                assert!((w[r] - acc).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn map_operator_output_checked() {
        let op = MapOperator::new("square", 2, |x: &[f64]| x.iter().map(|v| v * v).collect());
        let ch = ChannelModel::new(SystemOperator::Map(op), awgn(1.0), vec![1.0, 4.0], 2).unwrap();
        assert_eq!(ch.apply_operator(&[1.0, -2.0]).unwrap(), vec![1.0, 4.0]);
        let bad = MapOperator::new("short", 2, |_: &[f64]| vec![0.0]);
        let ch = ChannelModel::new(SystemOperator::Map(bad), awgn(1.0), vec![1.0, 4.0], 2).unwrap();
        assert!(ch.apply_operator(&[1.0, 1.0]).is_err());
    }

    #[test]
    fn zero_residual_is_maximum() {
        let ch = ChannelModel::identity(vec![0.5, -0.25], awgn(0.3)).unwrap();
        let expect = -(2.0 / 2.0) * (2.0 * std::f64::consts::PI * 0.3).ln();
        assert!((ch.log_likelihood(&[0.5, -0.25]).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn unit_residual_standard_normal() {
        let ch = ChannelModel::identity(vec![1.0], awgn(1.0)).unwrap();
        let expect = -0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5;
        assert!((ch.log_likelihood(&[0.0]).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn likelihood_matches_density_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..30 {
            let (m, n) = (rng.random_range(1..=6), rng.random_range(1..=6));
            let j = random_matrix(&mut rng, m, n);
            let y: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let var = rng.random_range(0.2..2.0);
            let ch = ChannelModel::linear(j.clone(), y.clone(), awgn(var)).unwrap();
            let mut log_prod = 0.0;
            for r in 0..m {
                let w: f64 = (0..n).map(|c| j[[r, c]] * x[c]).sum();
                let pdf = (-(y[r] - w).powi(2) / (2.0 * var)).exp()
                    / (2.0 * std::f64::consts::PI * var).sqrt();
                log_prod += pdf.ln();
            }
            assert!((ch.log_likelihood(&x).unwrap() - log_prod).abs() < 1e-10);
        }
    }

    #[test]
    fn incremental_matches_recompute() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..40 {
            let (m, n) = (rng.random_range(1..=8), rng.random_range(1..=8));
            let ch = if trial % 2 == 0 {
                let y = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
                ChannelModel::identity(y, awgn(0.7)).unwrap()
            } else {
                let y = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
                ChannelModel::linear(random_matrix(&mut rng, m, n), y, awgn(0.4)).unwrap()
            };
            let n = ch.input_len();
            let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut cache = ch.residual_cache(&x).unwrap();
            let values = [-1.0, 0.0, 0.5];
            let mut out = [0.0; 3];
            for _ in 0..100 {
                let k = rng.random_range(0..n);
                ch.candidate_log_likelihoods(&cache, k, &values, &mut out);
                for (v, ll) in values.iter().zip(out) {
                    let mut t = x.clone();
                    t[k] = *v;
                    let full = ch.log_likelihood(&t).unwrap();
                    assert!((ll - full).abs() <= 1e-9 * full.abs().max(1.0));
                }
                let new = rng.random_range(-1.0..1.0);
                let ll = ch.delta_log_likelihood(&mut cache, k, x[k], new).unwrap();
                x[k] = new;
                let full = ch.log_likelihood(&x).unwrap();
                assert!((ll - full).abs() <= 1e-9 * full.abs().max(1.0));
            }
            assert!(ch.delta_log_likelihood(&mut cache, n, 0.0, 1.0).is_err());
        }
    }

    #[test]
    fn residual_drift_stays_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ch = ChannelModel::linear(
            random_matrix(&mut rng, 20, 30),
            (0..20).map(|_| rng.random_range(-1.0..1.0)).collect(),
            awgn(0.1),
        )
        .unwrap();
        let mut x = vec![0.0; 30];
        let mut cache = ch.residual_cache(&x).unwrap();
        for _ in 0..10_000 {
            let k = rng.random_range(0..30);
            let new = rng.random_range(-3.0..3.0);
            ch.delta_log_likelihood(&mut cache, k, x[k], new).unwrap();
            x[k] = new;
        }
        let fresh = ch.residual_cache(&x).unwrap();
        assert!((cache.sq_norm() - fresh.sq_norm()).abs() <= 1e-6 * fresh.sq_norm());
        ch.refresh(&mut cache).unwrap();
        assert_eq!(cache.sq_norm(), fresh.sq_norm());
    }

    #[test]
    fn lossy_channel_variance() {
        let ch = ChannelModel::lossy(vec![0.0, 1.0], 2.0).unwrap();
        assert_eq!(ch.noise().variance(), 0.25);
        assert!(ChannelModel::lossy(vec![0.0], 0.0).is_err());
    }

    #[test]
    fn identity_update_touches_one_entry() {
        let ch = ChannelModel::identity(vec![1.0, 2.0, 3.0], awgn(1.0)).unwrap();
        let mut cache = ch.residual_cache(&[0.0, 0.0, 0.0]).unwrap();
        ch.delta_log_likelihood(&mut cache, 1, 0.0, 0.5).unwrap();
        assert_eq!(cache.residual(), &[1.0, 1.5, 3.0]);
        let before = cache.residual().to_vec();
        ch.delta_log_likelihood(&mut cache, 2, 0.0, 0.0).unwrap();
        assert_eq!(cache.residual(), &before[..]);
    }

    #[test]
    fn back_projection_of_identity_matrix() {
        let ch = ChannelModel::linear(array![[2.0, 0.0], [0.0, 1.0]], vec![4.0, -1.0], awgn(1.0))
            .unwrap();
        assert_eq!(ch.back_projection(), vec![2.0, -1.0]);
    }

    #[test]
    fn rejects_inconsistent_dimensions() {
        assert!(ChannelModel::linear(Array2::zeros((2, 3)), vec![0.0; 3], awgn(1.0)).is_err());
        assert!(NoiseModel::awgn(0.0).is_err());
        assert!(NoiseModel::awgn(f64::NAN).is_err());
        assert!(SystemOperator::linear(array![[f64::INFINITY]]).is_err());
    }

    #[test]
    fn matrix_text_roundtrip() {
        let m = array![[1.5, -2.0, 0.0], [3.25e-3, 4.0, 5.0]];
        let back = parse_matrix(&format_matrix(&m)).unwrap();
        assert_eq!(back, m);
        assert!(parse_matrix("1 2\n3\n").is_err());
        assert_eq!(parse_vector("1 2\n 3").unwrap(), vec![1.0, 2.0, 3.0]);
    }
}
