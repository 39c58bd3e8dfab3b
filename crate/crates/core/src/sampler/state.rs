use std::f64::consts::{LN_2, LOG2_E};

use rand::seq::SliceRandom;
use rand::Rng as _;

use super::EnergyTerms;
use crate::channel::{ChannelModel, ResidualCache};
use crate::entropy::ContextCounts;
use crate::error::{Error, Result};
use crate::quantizer::QuantGrid;
use crate::rng::Rng;

/// Candidates more than this many bits (scaled by `1/s`) above the current
/// energy are treated as having zero probability.
pub const NEGLIGIBLE_BITS: f64 = 100.0;

/// A Gibbs chain: the current symbols with their cached counts, residual and
/// energy, the RNG stream, and the inverse temperature.
#[derive(Debug, Clone)]
pub struct AnnealState {
    symbols: Vec<usize>,
    counts: ContextCounts,
    cache: ResidualCache,
    energy: EnergyTerms,
    rng: Rng,
    s: f64,
    coding: Vec<f64>,
    log_lik: Vec<f64>,
    probs: Vec<f64>,
    order_buf: Vec<usize>,
}

impl AnnealState {
    pub fn new(
        symbols: Vec<usize>,
        grid: &QuantGrid,
        channel: &ChannelModel,
        order: usize,
        rng: Rng,
    ) -> Result<Self> {
        if symbols.len() != channel.input_len() {
            return Err(Error::invalid(format!(
                "{} symbols for a channel with input length {}",
                symbols.len(),
                channel.input_len()
            )));
        }
        let counts = ContextCounts::build(&symbols, order, grid.len())?;
        let cache = channel.residual_cache(&grid.dequantize(&symbols))?;
        let energy = EnergyTerms::from_log_likelihood(
            counts.coding_bits(),
            channel.cached_log_likelihood(&cache),
        );
        let a = grid.len();
        Ok(AnnealState {
            order_buf: (0..symbols.len()).collect(),
            symbols,
            counts,
            cache,
            energy,
            rng,
            s: 1.0,
            coding: vec![0.0; a],
            log_lik: vec![0.0; a],
            probs: vec![0.0; a],
        })
    }

    pub fn symbols(&self) -> &[usize] {
        &self.symbols
    }

    pub fn counts(&self) -> &ContextCounts {
        &self.counts
    }

    pub fn energy(&self) -> EnergyTerms {
        self.energy
    }

    pub fn inverse_temperature(&self) -> f64 {
        self.s
    }

    pub fn set_inverse_temperature(&mut self, s: f64) {
        assert!(
            s >= 0.0 && !s.is_nan(),
            "inverse temperature must be nonnegative"
        );
        self.s = s;
    }

    pub fn rng_mut(&mut self) -> &mut Rng {
        &mut self.rng
    }

    /// Energy recomputed from the symbols alone.
    pub fn recomputed_energy(
        &self,
        grid: &QuantGrid,
        channel: &ChannelModel,
    ) -> Result<EnergyTerms> {
        super::energy_of(&self.symbols, grid, self.counts.order(), channel)
    }

    /// Rebuilds counts and residual from the symbols.
    pub fn refresh(&mut self, channel: &ChannelModel) -> Result<()> {
        self.counts.refresh(&self.symbols);
        channel.refresh(&mut self.cache)?;
        self.energy = EnergyTerms::from_log_likelihood(
            self.counts.coding_bits(),
            channel.cached_log_likelihood(&self.cache),
        );
        Ok(())
    }

    /// Rebinds the chain to a new grid: `symbols` are replaced and every
    /// cache is rebuilt.
    pub(crate) fn rebind(
        &mut self,
        symbols: Vec<usize>,
        grid: &QuantGrid,
        channel: &ChannelModel,
    ) -> Result<()> {
        let order = self.counts.order();
        self.counts = ContextCounts::build(&symbols, order, grid.len())?;
        self.cache = channel.residual_cache(&grid.dequantize(&symbols))?;
        self.symbols = symbols;
        let a = grid.len();
        self.coding.resize(a, 0.0);
        self.log_lik.resize(a, 0.0);
        self.probs.resize(a, 0.0);
        self.energy = EnergyTerms::from_log_likelihood(
            self.counts.coding_bits(),
            channel.cached_log_likelihood(&self.cache),
        );
        Ok(())
    }

    /// Conditional distribution of coordinate `n` over all grid levels at the
    /// current inverse temperature, the rest of the sequence held fixed.
    ///
    /// Coding bits are nonnegative and the current energy bounds the minimum
    /// from above, so a level whose likelihood term alone exceeds the current
    /// energy by [`NEGLIGIBLE_BITS`]`/s` has probability below
    /// `2^-NEGLIGIBLE_BITS`; it is assigned zero without evaluating its coding
    /// cost.
    pub fn conditional(&mut self, grid: &QuantGrid, channel: &ChannelModel, n: usize) -> &[f64] {
        channel.candidate_log_likelihoods(&self.cache, n, grid.levels(), &mut self.log_lik);
        let cutoff = if self.s > 0.0 {
            self.energy.total_bits + NEGLIGIBLE_BITS / self.s
        } else {
            f64::INFINITY
        };
        let log_lik = &self.log_lik;
        let current = self.symbols[n];
        self.coding.iter_mut().for_each(|c| *c = f64::INFINITY);
        self.counts
            .candidate_bits_where(&self.symbols, n, &mut self.coding, |k| {
                k == current || -log_lik[k] * LOG2_E <= cutoff
            });
        let scale = self.s * LN_2;
        let mut max_logit = f64::NEG_INFINITY;
        for k in 0..self.probs.len() {
            let e = self.coding[k] - self.log_lik[k] * LOG2_E;
            let logit = if scale == 0.0 { 0.0 } else { -scale * e };
            self.probs[k] = logit;
            max_logit = max_logit.max(logit);
        }
        let mut total = 0.0;
        for p in &mut self.probs {
            *p = if *p == f64::NEG_INFINITY {
                0.0
            } else {
                (*p - max_logit).exp()
            };
            total += *p;
        }
        for p in &mut self.probs {
            *p /= total;
        }
        &self.probs
    }

    /// Candidate energies from the last [`AnnealState::conditional`] call.
    pub fn candidate_energy(&self, k: usize) -> EnergyTerms {
        EnergyTerms::from_log_likelihood(self.coding[k], self.log_lik[k])
    }

    /// Sets coordinate `n` to grid level `k`, updating every cache.
    pub fn commit(
        &mut self,
        grid: &QuantGrid,
        channel: &ChannelModel,
        n: usize,
        k: usize,
    ) -> Result<()> {
        let old = self.symbols[n];
        if old == k {
            return Ok(());
        }
        self.counts.delta_h_q(&mut self.symbols, n, k)?;
        let ll =
            channel.delta_log_likelihood(&mut self.cache, n, grid.level(old), grid.level(k))?;
        self.energy = EnergyTerms::from_log_likelihood(self.counts.coding_bits(), ll);
        Ok(())
    }

    /// Draws coordinate `n` from its conditional, reporting the distribution
    /// to `observe` before sampling.
    fn resample(
        &mut self,
        grid: &QuantGrid,
        channel: &ChannelModel,
        n: usize,
        observe: &mut impl FnMut(usize, &[f64]),
    ) -> Result<()> {
        self.conditional(grid, channel, n);
        observe(n, &self.probs);
        let u: f64 = self.rng.random();
        let mut acc = 0.0;
        let mut pick = self.probs.len() - 1;
        for (k, &p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                pick = k;
                break;
            }
        }
        // Guard against rounding leaving `pick` on a zero-probability tail.
        while self.probs[pick] == 0.0 && pick > 0 {
            pick -= 1;
        }
        self.commit(grid, channel, n, pick)
    }

    /// One sweep over all coordinates in random order, calling `observe` with
    /// each coordinate's conditional distribution before it is resampled.
    pub fn sweep_observed(
        &mut self,
        grid: &QuantGrid,
        channel: &ChannelModel,
        mut observe: impl FnMut(usize, &[f64]),
    ) -> Result<()> {
        debug_assert_eq!(self.probs.len(), grid.len());
        let mut order = std::mem::take(&mut self.order_buf);
        order.shuffle(&mut self.rng);
        for &n in &order {
            self.resample(grid, channel, n, &mut observe)?;
        }
        self.order_buf = order;
        self.refresh(channel)
    }
}

/// One Gibbs sweep at the state's current inverse temperature.
pub fn gibbs_sweep(
    state: &mut AnnealState,
    grid: &QuantGrid,
    channel: &ChannelModel,
) -> Result<()> {
    state.sweep_observed(grid, channel, |_, _| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::NoiseModel;
    use crate::rng;

    fn setup() -> (QuantGrid, ChannelModel) {
        let grid = QuantGrid::adaptive(vec![-1.0, 0.0, 1.0]).unwrap();
        let ch = ChannelModel::identity(
            vec![0.9, -0.2, 0.1, 1.2, -0.8],
            NoiseModel::awgn(0.2).unwrap(),
        )
        .unwrap();
        (grid, ch)
    }

    #[test]
    fn zero_inverse_temperature_is_uniform() {
        let (grid, ch) = setup();
        let mut st = AnnealState::new(vec![1; 5], &grid, &ch, 1, rng::stream(1, 0)).unwrap();
        st.set_inverse_temperature(0.0);
        for n in 0..5 {
            for &p in st.conditional(&grid, &ch, n) {
                assert!((p - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn cold_sweep_is_greedy() {
        let (grid, ch) = setup();
        let mut st = AnnealState::new(vec![1; 5], &grid, &ch, 1, rng::stream(2, 0)).unwrap();
        st.set_inverse_temperature(1e6);
        let before = st.energy().total_bits;
        // Every committed move is the conditional argmin, so energy never rises.
        let mut last = before;
        for _ in 0..5 {
            gibbs_sweep(&mut st, &grid, &ch).unwrap();
            assert!(st.energy().total_bits <= last + 1e-9);
            last = st.energy().total_bits;
        }
        for n in 0..5 {
            let probs = st.conditional(&grid, &ch, n).to_vec();
            let best = (0..3)
                .min_by(|&a, &b| {
                    st.candidate_energy(a)
                        .total_bits
                        .total_cmp(&st.candidate_energy(b).total_bits)
                })
                .unwrap();
            assert!(probs[best] > 0.999_999);
        }
    }

    #[test]
    fn cached_energy_tracks_recompute() {
        let (grid, ch) = setup();
        let mut st =
            AnnealState::new(vec![0, 1, 2, 1, 0], &grid, &ch, 2, rng::stream(3, 0)).unwrap();
        for _ in 0..50 {
            gibbs_sweep(&mut st, &grid, &ch).unwrap();
            let fresh = st.recomputed_energy(&grid, &ch).unwrap();
            assert!(
                (fresh.total_bits - st.energy().total_bits).abs()
                    <= 1e-6 * fresh.total_bits.abs().max(1.0)
            );
        }
    }

    #[test]
    fn same_seed_same_trajectory() {
        let (grid, ch) = setup();
        let run = |seed| {
            let mut st = AnnealState::new(vec![1; 5], &grid, &ch, 1, rng::stream(seed, 0)).unwrap();
            (0..20)
                .map(|_| {
                    gibbs_sweep(&mut st, &grid, &ch).unwrap();
                    st.symbols().to_vec()
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(9), run(9));
        assert_ne!(run(9), run(10));
    }
}
