//! Annealed Gibbs sampling over a reproduction grid.
//!
//! The energy of a candidate `x̂` is `N·H_q(x̂) − log₂ f_{Y|W}(y | J(x̂))` in
//! bits. At inverse temperature `s` the sampler targets
//! `f_s(x̂) ∝ exp(−s · ln 2 · energy)`, so `s = 1` is the posterior under the
//! prior `2^{−N·H_q}` and large `s` concentrates on the minimum-energy
//! sequence.

mod anneal;
mod estimate;
mod state;

pub use anneal::{anneal, anneal_with_adaptation, AnnealOutcome, AnnealSchedule, TracePoint};
pub use estimate::{
    estimate_map, estimate_min_distortion, estimate_mmse, posterior_samples, Distortion,
    GridChoice, MapConfig, MapEstimate, PosteriorConfig, PosteriorEstimate, PosteriorSamples,
    RestartInit,
};
pub use state::{gibbs_sweep, AnnealState};

use std::f64::consts::LOG2_E;

use crate::channel::ChannelModel;
use crate::entropy::ContextCounts;
use crate::error::{Error, Result};
use crate::quantizer::QuantGrid;

/// Energy split into its coding-length and likelihood parts, in bits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyTerms {
    /// `N · H_q(x̂)`.
    pub coding_bits: f64,
    /// `−log f_{Y|W}` converted to bits.
    pub likelihood_bits: f64,
    pub total_bits: f64,
}

impl EnergyTerms {
    pub fn new(coding_bits: f64, likelihood_bits: f64) -> Self {
        EnergyTerms {
            coding_bits,
            likelihood_bits,
            total_bits: coding_bits + likelihood_bits,
        }
    }

    pub(crate) fn from_log_likelihood(coding_bits: f64, log_likelihood_nats: f64) -> Self {
        Self::new(coding_bits, -log_likelihood_nats * LOG2_E)
    }
}

/// Energy of the symbol sequence whose counts are `counts`.
pub fn energy(
    symbols: &[usize],
    grid: &QuantGrid,
    counts: &ContextCounts,
    channel: &ChannelModel,
) -> Result<EnergyTerms> {
    if symbols.len() != counts.len() {
        return Err(Error::invalid("counts do not match the symbol sequence"));
    }
    let x = grid.dequantize(symbols);
    let ll = channel.log_likelihood(&x)?;
    Ok(EnergyTerms::from_log_likelihood(counts.coding_bits(), ll))
}

/// Energy of `symbols` with order-`order` contexts, computed from scratch.
pub fn energy_of(
    symbols: &[usize],
    grid: &QuantGrid,
    order: usize,
    channel: &ChannelModel,
) -> Result<EnergyTerms> {
    let counts = ContextCounts::build(symbols, order, grid.len())?;
    energy(symbols, grid, &counts, channel)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::NoiseModel;
    use crate::quantizer::build_fixed_grid;

    #[test]
    fn on_grid_noiseless_measurements_have_zero_residual() {
        let grid = build_fixed_grid(6).unwrap();
        let y = vec![0.5, -1.0, 0.0, 1.5, 0.5, 0.5];
        let ch = ChannelModel::identity(y.clone(), NoiseModel::awgn(1e-3).unwrap()).unwrap();
        let s = grid.quantize(&y);
        let e = energy_of(&s, &grid, 1, &ch).unwrap();
        let max_ll = -(6.0 / 2.0) * (2.0 * std::f64::consts::PI * 1e-3).ln();
        assert!((e.likelihood_bits + max_ll * LOG2_E).abs() < 1e-12);
    }

    #[test]
    fn constant_estimate_has_no_coding_cost() {
        let grid = build_fixed_grid(8).unwrap();
        let ch = ChannelModel::identity(vec![0.3; 8], NoiseModel::awgn(0.5).unwrap()).unwrap();
        let e = energy_of(&[4; 8], &grid, 2, &ch).unwrap();
        assert_eq!(e.coding_bits, 0.0);
        assert_eq!(e.total_bits, e.likelihood_bits);
    }
}
