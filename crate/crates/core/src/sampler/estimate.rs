use std::sync::Arc;

use rand::Rng as _;
use rayon::prelude::*;

use super::{anneal_with_adaptation, AnnealSchedule, AnnealState, EnergyTerms, TracePoint};
use crate::channel::ChannelModel;
use crate::entropy::default_order;
use crate::error::{Error, Result};
use crate::quantizer::{build_fixed_grid_with_base, GridKind, QuantGrid};
use crate::rng;

/// How the reproduction grid is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum GridChoice {
    /// Fixed grid from the input length with `γ = ⌈log_base N⌉`.
    Fixed { log_base: f64 },
    /// This grid, as given.
    Given(QuantGrid),
    /// `levels` adaptive levels spread over the range of the back-projection.
    Adaptive { levels: usize },
}

impl Default for GridChoice {
    fn default() -> Self {
        GridChoice::Fixed {
            log_base: std::f64::consts::E,
        }
    }
}

impl GridChoice {
    pub fn resolve(&self, channel: &ChannelModel) -> Result<QuantGrid> {
        match self {
            GridChoice::Fixed { log_base } => {
                build_fixed_grid_with_base(channel.input_len().max(2), *log_base)
            }
            GridChoice::Given(g) => Ok(g.clone()),
            GridChoice::Adaptive { levels } => {
                let start = channel.back_projection();
                let lo = start.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = start.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let (lo, hi) = if hi - lo < 1e-9 {
                    (lo - 1.0, hi + 1.0)
                } else {
                    (lo, hi)
                };
                QuantGrid::uniform_adaptive(lo, hi, *levels)
            }
        }
    }
}

/// Starting point of restarts after the first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RestartInit {
    /// The data-aware start of the first restart.
    DataAware,
    /// Uniformly random grid symbols.
    Random,
}

#[derive(Debug, Clone)]
pub struct MapConfig {
    pub grid: GridChoice,
    /// Context order; `None` picks [`default_order`].
    pub order: Option<usize>,
    pub schedule: AnnealSchedule,
    pub restarts: usize,
    pub restart_init: RestartInit,
    /// Sweeps between level adaptations (adaptive grids).
    pub adapt_every: usize,
    pub seed: u64,
    /// Stream label separating independent estimates under one seed.
    pub stream: u64,
}

impl Default for MapConfig {
    fn default() -> Self {
        MapConfig {
            grid: GridChoice::default(),
            order: None,
            schedule: AnnealSchedule::default(),
            restarts: 3,
            restart_init: RestartInit::Random,
            adapt_every: 10,
            seed: 0,
            stream: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MapEstimate {
    pub estimate: Vec<f64>,
    pub symbols: Vec<usize>,
    pub grid: QuantGrid,
    pub order: usize,
    pub energy: EnergyTerms,
    /// Energy of the quantized back-projection the first restart starts from.
    pub initial_energy: EnergyTerms,
    /// Trace of the winning restart.
    pub trace: Vec<TracePoint>,
    pub restart: usize,
}

fn resolve_order(order: Option<usize>, len: usize, alphabet: usize) -> usize {
    order
        .unwrap_or_else(|| default_order(len, alphabet))
        .min(len.saturating_sub(1))
}

/// The lower-energy of the quantized back-projection and the constant
/// sequence at the back-projection's median. The first suits well-posed
/// channels; the second avoids starting underdetermined problems deep inside
/// the dense configurations that fit the noise.
fn data_aware_start(channel: &ChannelModel, grid: &QuantGrid, order: usize) -> Result<Vec<usize>> {
    let bp = channel.back_projection();
    let projected = grid.quantize(&bp);
    let mut sorted = bp;
    sorted.sort_by(f64::total_cmp);
    let constant = vec![grid.nearest(sorted[sorted.len() / 2]); sorted.len()];
    let e_proj = super::energy_of(&projected, grid, order, channel)?.total_bits;
    let e_const = super::energy_of(&constant, grid, order, channel)?.total_bits;
    Ok(if e_const < e_proj {
        constant
    } else {
        projected
    })
}

/// Approximate minimizer of `N·H_q(x̂) − log₂ f_{Y|W}(y | J(x̂))` over grid
/// sequences, by annealed Gibbs sampling with restarts.
pub fn estimate_map(channel: &ChannelModel, config: &MapConfig) -> Result<MapEstimate> {
    config.schedule.validate()?;
    if config.restarts == 0 {
        return Err(Error::invalid("at least one restart is required"));
    }
    let grid = config.grid.resolve(channel)?;
    let n = channel.input_len();
    let order = resolve_order(config.order, n, grid.len());
    let adapt_every = match grid.kind() {
        GridKind::Adaptive if matches!(config.grid, GridChoice::Adaptive { .. }) => {
            Some(config.adapt_every)
        }
        _ => None,
    };
    let start = data_aware_start(channel, &grid, order)?;

    let runs = (0..config.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(config.seed, rng::mix(&[config.stream, r as u64]));
            let init = if r == 0 || config.restart_init == RestartInit::DataAware {
                start.clone()
            } else {
                (0..n).map(|_| rng.random_range(0..grid.len())).collect()
            };
            let mut state = AnnealState::new(init, &grid, channel, order, rng)?;
            let initial = state.energy();
            let outcome = anneal_with_adaptation(
                &mut state,
                &config.schedule,
                grid.clone(),
                channel,
                adapt_every,
            )?;
            Ok((initial, outcome))
        })
        .collect::<Result<Vec<_>>>()?;

    let initial_energy = runs[0].0;
    let (restart, (_, best)) = runs
        .into_iter()
        .enumerate()
        .min_by(|(ia, (_, a)), (ib, (_, b))| {
            a.best_energy
                .total_bits
                .total_cmp(&b.best_energy.total_bits)
                .then(ia.cmp(ib))
        })
        .expect("at least one restart");
    Ok(MapEstimate {
        estimate: best.best_estimate(),
        symbols: best.best_symbols,
        grid: best.best_grid,
        order,
        energy: best.best_energy,
        initial_energy,
        trace: best.trace,
        restart,
    })
}

#[derive(Debug, Clone)]
pub struct PosteriorConfig {
    pub order: Option<usize>,
    pub burn_in: usize,
    pub samples: usize,
    pub seed: u64,
    pub stream: u64,
}

impl Default for PosteriorConfig {
    fn default() -> Self {
        PosteriorConfig {
            order: None,
            burn_in: 50,
            samples: 200,
            seed: 0,
            stream: 0,
        }
    }
}

/// Dequantized states of a Gibbs chain at `s = 1`, one per sweep.
#[derive(Debug, Clone)]
pub struct PosteriorSamples {
    pub samples: Vec<Vec<f64>>,
}

impl PosteriorSamples {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    fn dim(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim()];
        for s in &self.samples {
            for (a, b) in m.iter_mut().zip(s) {
                *a += b;
            }
        }
        let k = self.samples.len() as f64;
        m.iter_mut().for_each(|v| *v /= k);
        m
    }

    /// Per-coordinate Monte-Carlo standard error of the mean. The chain's
    /// autocorrelation is accounted for with Geyer's initial monotone
    /// sequence estimator of the asymptotic variance.
    pub fn std_error(&self) -> Vec<f64> {
        let n = self.samples.len();
        if n < 2 {
            return vec![f64::INFINITY; self.dim()];
        }
        let mean = self.mean();
        (0..self.dim())
            .map(|d| {
                let xs: Vec<f64> = self.samples.iter().map(|s| s[d] - mean[d]).collect();
                let acov = |k: usize| {
                    xs[..n - k]
                        .iter()
                        .zip(&xs[k..])
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
                        / n as f64
                };
                let g0 = acov(0);
                if g0 == 0.0 {
                    return 0.0;
                }
                // Sum of adjacent-lag pairs while positive, forced nonincreasing.
                let mut sum = 0.0;
                let mut prev = f64::INFINITY;
                let mut k = 0;
                while 2 * k + 1 < n {
                    let pair = (acov(2 * k) + acov(2 * k + 1)).min(prev);
                    if pair <= 0.0 {
                        break;
                    }
                    sum += pair;
                    prev = pair;
                    k += 1;
                }
                ((2.0 * sum - g0).max(0.0) / n as f64).sqrt()
            })
            .collect()
    }

    pub fn median(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|d| {
                let mut col: Vec<f64> = self.samples.iter().map(|s| s[d]).collect();
                col.sort_by(f64::total_cmp);
                let k = col.len();
                if k % 2 == 1 {
                    col[k / 2]
                } else {
                    0.5 * (col[k / 2 - 1] + col[k / 2])
                }
            })
            .collect()
    }

    /// Per-coordinate most frequent value (ties to the smaller value).
    pub fn mode(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|d| {
                let mut col: Vec<f64> = self.samples.iter().map(|s| s[d]).collect();
                col.sort_by(f64::total_cmp);
                let mut best = (col[0], 0usize);
                let mut i = 0;
                while i < col.len() {
                    let j = col[i..].iter().take_while(|&&v| v == col[i]).count();
                    if j > best.1 {
                        best = (col[i], j);
                    }
                    i += j;
                }
                best.0
            })
            .collect()
    }
}

/// Runs a Gibbs chain at `s = 1` and collects `config.samples` states, one
/// per sweep, after `config.burn_in` sweeps.
pub fn posterior_samples(
    channel: &ChannelModel,
    grid: &QuantGrid,
    config: &PosteriorConfig,
) -> Result<PosteriorSamples> {
    if config.samples == 0 {
        return Err(Error::invalid(
            "posterior sampling needs at least one sample",
        ));
    }
    let n = channel.input_len();
    let order = resolve_order(config.order, n, grid.len());
    let rng = rng::stream(config.seed, rng::mix(&[config.stream, u64::MAX]));
    let start = data_aware_start(channel, grid, order)?;
    let mut state = AnnealState::new(start, grid, channel, order, rng)?;
    state.set_inverse_temperature(1.0);
    for _ in 0..config.burn_in {
        state.sweep_observed(grid, channel, |_, _| {})?;
    }
    let mut samples = Vec::with_capacity(config.samples);
    for _ in 0..config.samples {
        state.sweep_observed(grid, channel, |_, _| {})?;
        samples.push(grid.dequantize(state.symbols()));
    }
    Ok(PosteriorSamples { samples })
}

#[derive(Debug, Clone)]
pub struct PosteriorEstimate {
    pub estimate: Vec<f64>,
    pub std_error: Vec<f64>,
    pub samples: usize,
}

/// Posterior-mean estimate under the coding-length prior.
pub fn estimate_mmse(
    channel: &ChannelModel,
    grid: &QuantGrid,
    config: &PosteriorConfig,
) -> Result<PosteriorEstimate> {
    let samples = posterior_samples(channel, grid, config)?;
    Ok(PosteriorEstimate {
        estimate: samples.mean(),
        std_error: samples.std_error(),
        samples: samples.len(),
    })
}

type DistortionFn = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;

/// Per-sequence distortion `D(x, w)`.
#[derive(Clone)]
pub enum Distortion {
    SquaredError,
    AbsoluteError,
    /// Number of entries that differ.
    Hamming,
    Custom(Arc<DistortionFn>),
}

impl std::fmt::Debug for Distortion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Distortion::SquaredError => f.write_str("SquaredError"),
            Distortion::AbsoluteError => f.write_str("AbsoluteError"),
            Distortion::Hamming => f.write_str("Hamming"),
            Distortion::Custom(_) => f.write_str("Custom"),
        }
    }
}

impl Distortion {
    pub fn eval(&self, x: &[f64], w: &[f64]) -> f64 {
        match self {
            Distortion::SquaredError => x.iter().zip(w).map(|(a, b)| (a - b).powi(2)).sum(),
            Distortion::AbsoluteError => x.iter().zip(w).map(|(a, b)| (a - b).abs()).sum(),
            Distortion::Hamming => x
                .iter()
                .zip(w)
                .filter(|(a, b)| (*a - *b).abs() > 1e-12)
                .count() as f64,
            Distortion::Custom(f) => f(x, w),
        }
    }
}

/// Candidate minimizing the sample-average distortion.
///
/// Candidates are the per-coordinate mean, median and mode of the posterior
/// samples followed by the distinct samples themselves.
pub fn select_min_distortion(samples: &PosteriorSamples, distortion: &Distortion) -> Vec<f64> {
    let mut candidates = vec![samples.mean(), samples.median(), samples.mode()];
    let mut seen: Vec<&Vec<f64>> = Vec::new();
    for s in &samples.samples {
        if !seen.contains(&s) {
            seen.push(s);
            candidates.push(s.clone());
        }
    }
    let risk = |w: &[f64]| {
        samples
            .samples
            .iter()
            .map(|s| distortion.eval(s, w))
            .sum::<f64>()
    };
    let mut best = 0;
    let mut best_risk = risk(&candidates[0]);
    for (i, c) in candidates.iter().enumerate().skip(1) {
        let r = risk(c);
        if r < best_risk {
            best = i;
            best_risk = r;
        }
    }
    candidates.swap_remove(best)
}

/// Posterior-risk minimizer for `distortion` over a sample-derived
/// candidate set.
pub fn estimate_min_distortion(
    channel: &ChannelModel,
    grid: &QuantGrid,
    distortion: &Distortion,
    config: &PosteriorConfig,
) -> Result<Vec<f64>> {
    let samples = posterior_samples(channel, grid, config)?;
    Ok(select_min_distortion(&samples, distortion))
}
