//! Brute-force references for tiny instances.
//!
//! Everything here is recomputed from definitions: context counts with hash
//! maps, likelihoods as products of Gaussian densities with explicit loops,
//! and posteriors by enumerating every grid sequence. None of it shares code
//! with the incremental paths used by the sampler.

use std::collections::HashMap;
use std::f64::consts::{LN_2, PI};

use ndarray::Array2;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::channel::{ChannelModel, NoiseModel, SystemOperator};
use crate::error::{Error, Result};
use crate::quantizer::QuantGrid;
use crate::rng;
use crate::sampler::{estimate_map, estimate_mmse, GridChoice, MapConfig, PosteriorConfig};

/// Sequences are enumerated only up to this many.
pub const MAX_ENUMERATION: usize = 1 << 20;

/// `N·H_q` in bits with circular contexts.
pub fn coding_bits(symbols: &[usize], order: usize) -> f64 {
    let n = symbols.len();
    let mut joint: HashMap<(Vec<usize>, usize), f64> = HashMap::new();
    let mut ctx: HashMap<Vec<usize>, f64> = HashMap::new();
    for i in 0..n {
        let u: Vec<usize> = (0..order)
            .map(|k| symbols[(i + n - order + k) % n])
            .collect();
        *joint.entry((u.clone(), symbols[i])).or_default() += 1.0;
        *ctx.entry(u).or_default() += 1.0;
    }
    joint
        .iter()
        .map(|((u, _), &c)| -c * (c / ctx[u]).log2())
        .sum::<f64>()
        .max(0.0)
}

/// `−log₂ f_{Y|W}(y | J x)` from per-entry Gaussian densities.
pub fn neg_log_likelihood_bits(channel: &ChannelModel, x: &[f64]) -> Result<f64> {
    let y = channel.measurements();
    let w: Vec<f64> = match channel.operator() {
        SystemOperator::Identity => x.to_vec(),
        SystemOperator::Linear(j) => (0..j.nrows())
            .map(|r| {
                let mut acc = 0.0;
                for c in 0..j.ncols() {
                    acc += j[[r, c]] * x[c];
                }
                acc
            })
            .collect(),
        SystemOperator::Map(_) => channel.apply_operator(x)?,
    };
    let NoiseModel::Awgn { variance } = channel.noise();
    let mut nats = 0.0;
    for (yi, wi) in y.iter().zip(&w) {
        let d = yi - wi;
        nats += 0.5 * (2.0 * PI * variance).ln() + d * d / (2.0 * variance);
    }
    Ok(nats / LN_2)
}

pub fn energy_bits(
    channel: &ChannelModel,
    grid: &QuantGrid,
    order: usize,
    symbols: &[usize],
) -> Result<f64> {
    Ok(coding_bits(symbols, order) + neg_log_likelihood_bits(channel, &grid.dequantize(symbols))?)
}

/// Every grid sequence of the channel's input length with its energy.
pub fn enumerate(
    channel: &ChannelModel,
    grid: &QuantGrid,
    order: usize,
) -> Result<Vec<(Vec<usize>, f64)>> {
    let n = channel.input_len();
    let a = grid.len();
    let total = (a as f64).powi(n as i32);
    if total > MAX_ENUMERATION as f64 {
        return Err(Error::invalid(format!(
            "{a}^{n} sequences is too many to enumerate"
        )));
    }
    let total = total as usize;
    let mut out = Vec::with_capacity(total);
    for code in 0..total {
        let mut c = code;
        let symbols: Vec<usize> = (0..n)
            .map(|_| {
                let s = c % a;
                c /= a;
                s
            })
            .collect();
        let e = energy_bits(channel, grid, order, &symbols)?;
        out.push((symbols, e));
    }
    Ok(out)
}

/// Minimum-energy sequence (first in enumeration order on ties).
pub fn exhaustive_map(
    channel: &ChannelModel,
    grid: &QuantGrid,
    order: usize,
) -> Result<(Vec<usize>, f64)> {
    enumerate(channel, grid, order)?
        .into_iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or_else(|| Error::invalid("nothing to enumerate"))
}

/// Posterior weights `∝ 2^{−energy}` over all sequences.
pub fn posterior(
    channel: &ChannelModel,
    grid: &QuantGrid,
    order: usize,
) -> Result<Vec<(Vec<usize>, f64)>> {
    let all = enumerate(channel, grid, order)?;
    let emin = all.iter().map(|(_, e)| *e).fold(f64::INFINITY, f64::min);
    let z: f64 = all.iter().map(|(_, e)| (-(e - emin) * LN_2).exp()).sum();
    Ok(all
        .into_iter()
        .map(|(s, e)| (s, (-(e - emin) * LN_2).exp() / z))
        .collect())
}

/// Exact posterior mean `Σ x̂·2^{−U}f / Σ 2^{−U}f`.
pub fn posterior_mean(channel: &ChannelModel, grid: &QuantGrid, order: usize) -> Result<Vec<f64>> {
    let post = posterior(channel, grid, order)?;
    let mut mean = vec![0.0; channel.input_len()];
    for (s, p) in &post {
        for (m, &k) in mean.iter_mut().zip(s) {
            *m += p * grid.level(k);
        }
    }
    Ok(mean)
}

/// Conditional law of coordinate `n` under `exp(−s·ln2·energy)` with the
/// other coordinates of `symbols` held fixed.
pub fn conditional(
    channel: &ChannelModel,
    grid: &QuantGrid,
    order: usize,
    symbols: &[usize],
    n: usize,
    s: f64,
) -> Result<Vec<f64>> {
    let energies = (0..grid.len())
        .map(|k| {
            let mut t = symbols.to_vec();
            t[n] = k;
            energy_bits(channel, grid, order, &t)
        })
        .collect::<Result<Vec<_>>>()?;
    let emin = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = energies
        .iter()
        .map(|e| (-s * LN_2 * (e - emin)).exp())
        .collect();
    let z: f64 = w.iter().sum();
    Ok(w.into_iter().map(|v| v / z).collect())
}

/// Random tiny instance over the grid `{0, 1}` with noise variance drawn
/// from `variance`: identity channel for even `trial`, square Gaussian matrix
/// for odd.
pub fn tiny_instance(
    len: usize,
    variance: std::ops::Range<f64>,
    seed: u64,
    trial: u64,
) -> Result<(ChannelModel, QuantGrid)> {
    let mut rng = rng::stream(seed, rng::mix(&[0x0AC1E, trial]));
    let x: Vec<f64> = (0..len)
        .map(|_| f64::from(u8::from(rng.random::<f64>() < 0.4)))
        .collect();
    let variance = rng.random_range(variance);
    let noise = NoiseModel::awgn(variance)?;
    let sd = variance.sqrt();
    let ch = if trial % 2 == 0 {
        let y = x
            .iter()
            .map(|v| v + sd * Distribution::<f64>::sample(&StandardNormal, &mut rng))
            .collect();
        ChannelModel::identity(y, noise)?
    } else {
        let scale = 1.0 / (len as f64).sqrt();
        let j = Array2::from_shape_simple_fn((len, len), || {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * scale
        });
        let y = (0..len)
            .map(|r| {
                let w: f64 = (0..len).map(|c| j[[r, c]] * x[c]).sum();
                let z: f64 = StandardNormal.sample(&mut rng);
                w + sd * z
            })
            .collect();
        ChannelModel::linear(j, y, noise)?
    };
    Ok((ch, QuantGrid::adaptive(vec![0.0, 1.0])?))
}

/// Agreement of the samplers with exhaustive enumeration on tiny instances.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub trials: usize,
    /// MAP estimates equal to the exhaustive argmin.
    pub map_matches: usize,
    /// Largest energy excess of a non-matching MAP estimate, in bits.
    pub map_worst_gap: f64,
    /// Posterior means within three standard errors of the exact mean.
    pub mmse_within: usize,
}

/// Noise variances of the MAP checks.
pub const MAP_NOISE: std::ops::Range<f64> = 0.05..0.5;
/// Noise variances of the MMSE checks, high enough that no coordinate's
/// posterior is so concentrated that a short chain never leaves one level.
pub const MMSE_NOISE: std::ops::Range<f64> = 0.5..2.0;

/// Chain length of the MMSE checks; standard errors from a 200-sample chain
/// are themselves too noisy for a three-sigma test to hold its nominal rate.
pub const MMSE_BURN_IN: usize = 100;
pub const MMSE_SAMPLES: usize = 1000;

/// Runs `trials` MAP checks at length 6 and MMSE checks at length 4.
pub fn run_checks(trials: usize, seed: u64) -> Result<OracleReport> {
    let mut report = OracleReport {
        trials,
        map_matches: 0,
        map_worst_gap: 0.0,
        mmse_within: 0,
    };
    for t in 0..trials as u64 {
        let (ch, grid) = tiny_instance(6, MAP_NOISE, seed, t)?;
        let (best, best_energy) = exhaustive_map(&ch, &grid, 1)?;
        let cfg = MapConfig {
            grid: GridChoice::Given(grid.clone()),
            order: Some(1),
            seed,
            stream: t,
            ..MapConfig::default()
        };
        let est = estimate_map(&ch, &cfg)?;
        if est.symbols == best {
            report.map_matches += 1;
        } else {
            let gap = energy_bits(&ch, &grid, 1, &est.symbols)? - best_energy;
            report.map_worst_gap = report.map_worst_gap.max(gap);
        }

        let (ch, grid) = tiny_instance(4, MMSE_NOISE, seed ^ 0x5EED, t)?;
        let exact = posterior_mean(&ch, &grid, 1)?;
        let cfg = PosteriorConfig {
            order: Some(1),
            burn_in: MMSE_BURN_IN,
            samples: MMSE_SAMPLES,
            seed,
            stream: t,
        };
        let post = estimate_mmse(&ch, &grid, &cfg)?;
        let ok = post
            .estimate
            .iter()
            .zip(&post.std_error)
            .zip(&exact)
            .all(|((m, se), e)| (m - e).abs() <= 3.0 * se);
        if ok {
            report.mmse_within += 1;
        }
    }
    Ok(report)
}
