use std::io::Write;

use super::{AnnealState, EnergyTerms};
use crate::channel::ChannelModel;
use crate::error::{Error, Result};
use crate::quantizer::{adapt_levels, QuantGrid};

/// Geometric schedule: `sweeps_per_stage` sweeps at each `s = s0 · rho^k`
/// until `budget` sweeps have run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealSchedule {
    pub s0: f64,
    pub rho: f64,
    pub sweeps_per_stage: usize,
    pub budget: usize,
}

impl Default for AnnealSchedule {
    /// Starts below the posterior temperature (`s = 1`) so that early sweeps
    /// can cross between isolated low-entropy configurations, such as
    /// periodic sequences, that single-site moves separate by large barriers.
    fn default() -> Self {
        AnnealSchedule {
            s0: 0.25,
            rho: 1.15,
            sweeps_per_stage: 2,
            budget: 400,
        }
    }
}

impl AnnealSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.s0.is_finite() && self.s0 > 0.0) {
            return Err(Error::invalid(format!(
                "s0 must be positive, got {}",
                self.s0
            )));
        }
        if !(self.rho.is_finite() && self.rho > 1.0) {
            return Err(Error::invalid(format!(
                "rho must exceed 1, got {}",
                self.rho
            )));
        }
        if self.sweeps_per_stage == 0 {
            return Err(Error::invalid("sweeps_per_stage must be at least 1"));
        }
        Ok(())
    }

    /// Inverse temperature of the `sweep`-th sweep (0-based).
    pub fn inverse_temperature(&self, sweep: usize) -> f64 {
        self.s0 * self.rho.powi((sweep / self.sweeps_per_stage) as i32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    /// 0 is the initial state; sweep `k` is recorded after the k-th sweep.
    pub sweep: usize,
    pub s: f64,
    pub energy: EnergyTerms,
}

#[derive(Debug, Clone)]
pub struct AnnealOutcome {
    /// Lowest-energy symbols ever visited.
    pub best_symbols: Vec<usize>,
    /// Grid the best symbols index into.
    pub best_grid: QuantGrid,
    pub best_energy: EnergyTerms,
    /// Energy after every sweep (current state, not best-so-far).
    pub trace: Vec<TracePoint>,
}

impl AnnealOutcome {
    pub fn best_estimate(&self) -> Vec<f64> {
        self.best_grid.dequantize(&self.best_symbols)
    }

    /// Running minimum of the traced total energy.
    pub fn best_so_far(&self) -> Vec<f64> {
        self.trace
            .iter()
            .scan(f64::INFINITY, |best, t| {
                *best = best.min(t.energy.total_bits);
                Some(*best)
            })
            .collect()
    }

    /// Trace as CSV: `sweep,s,coding_bits,likelihood_bits,total_bits`.
    pub fn write_trace_csv(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "sweep,s,coding_bits,likelihood_bits,total_bits")?;
        for t in &self.trace {
            writeln!(
                out,
                "{},{},{},{},{}",
                t.sweep,
                crate::harness::fmt_float(t.s),
                crate::harness::fmt_float(t.energy.coding_bits),
                crate::harness::fmt_float(t.energy.likelihood_bits),
                crate::harness::fmt_float(t.energy.total_bits)
            )?;
        }
        Ok(())
    }
}

/// Anneals `state` on a fixed grid and returns the best state visited.
pub fn anneal(
    state: &mut AnnealState,
    schedule: &AnnealSchedule,
    grid: &QuantGrid,
    channel: &ChannelModel,
) -> Result<AnnealOutcome> {
    anneal_with_adaptation(state, schedule, grid.clone(), channel, None)
}

/// Anneals `state`; when `adapt_every` is set the grid levels are
/// re-optimized every that many sweeps (adaptive grids only).
pub fn anneal_with_adaptation(
    state: &mut AnnealState,
    schedule: &AnnealSchedule,
    mut grid: QuantGrid,
    channel: &ChannelModel,
    adapt_every: Option<usize>,
) -> Result<AnnealOutcome> {
    schedule.validate()?;
    if adapt_every == Some(0) {
        return Err(Error::invalid(
            "adaptation cadence must be at least 1 sweep",
        ));
    }
    let mut best_symbols = state.symbols().to_vec();
    let mut best_grid = grid.clone();
    let mut best_energy = state.energy();
    let mut trace = Vec::with_capacity(schedule.budget + 1);
    trace.push(TracePoint {
        sweep: 0,
        s: schedule.s0,
        energy: state.energy(),
    });

    for sweep in 0..schedule.budget {
        let s = schedule.inverse_temperature(sweep);
        state.set_inverse_temperature(s);
        state.sweep_observed(&grid, channel, |_, _| {})?;

        if let Some(every) = adapt_every {
            if (sweep + 1) % every == 0 {
                let adapted = adapt_levels(state.symbols(), channel, &grid)?;
                let mut symbols = state.symbols().to_vec();
                adapted.remap_symbols(&mut symbols);
                grid = adapted.grid;
                state.rebind(symbols, &grid, channel)?;
            }
        }

        let e = state.energy();
        trace.push(TracePoint {
            sweep: sweep + 1,
            s,
            energy: e,
        });
        if e.total_bits < best_energy.total_bits {
            best_energy = e;
            best_symbols.copy_from_slice(state.symbols());
            if best_grid != grid {
                best_grid = grid.clone();
            }
        }
    }

    Ok(AnnealOutcome {
        best_symbols,
        best_grid,
        best_energy,
        trace,
    })
}
