//! Reproduction-level grids.
//!
//! All estimation happens over a finite set of real levels. The fixed grid is
//! data independent and depends only on the sequence length; the adaptive grid
//! starts from any level set and is refined against the measurements.

use std::fmt::Write as _;

use crate::channel::{ChannelModel, SystemOperator};
use crate::error::{Error, Result};

/// Levels closer than this after adaptation are merged.
pub const MERGE_TOLERANCE: f64 = 1e-12;

/// Interval tolerance for the golden-section level search.
pub const LEVEL_SEARCH_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridKind {
    /// Data-independent grid `{(i - γ²)/γ : i = 0..=2γ²}`.
    Fixed {
        gamma: u32,
    },
    Adaptive,
}

/// Strictly increasing, finite, nonempty set of reproduction levels.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantGrid {
    levels: Vec<f64>,
    kind: GridKind,
}

/// `γ = ⌈log_base(n)⌉`, never below 1.
pub fn gamma_for(n: usize, log_base: f64) -> Result<u32> {
    if n < 2 {
        return Err(Error::invalid(format!("grid needs n >= 2, got {n}")));
    }
    if !(log_base.is_finite() && log_base > 1.0) {
        return Err(Error::invalid(format!(
            "log base must be > 1, got {log_base}"
        )));
    }
    let g = ((n as f64).ln() / log_base.ln()).ceil();
    Ok((g as u32).max(1))
}

/// Fixed grid for sequence length `n` with natural-log `γ`.
pub fn build_fixed_grid(n: usize) -> Result<QuantGrid> {
    build_fixed_grid_with_base(n, std::f64::consts::E)
}

pub fn build_fixed_grid_with_base(n: usize, log_base: f64) -> Result<QuantGrid> {
    let gamma = gamma_for(n, log_base)?;
    Ok(QuantGrid::fixed(gamma))
}

impl QuantGrid {
    /// The fixed grid with parameter `gamma`: `2γ² + 1` levels spaced `1/γ`.
    pub fn fixed(gamma: u32) -> Self {
        assert!(gamma >= 1, "gamma must be positive");
        let g = gamma as i64;
        let g2 = g * g;
        let levels = (0..=2 * g2).map(|i| (i - g2) as f64 / g as f64).collect();
        QuantGrid {
            levels,
            kind: GridKind::Fixed { gamma },
        }
    }

    /// An adaptive grid seeded with `levels` (sorted and deduplicated here).
    pub fn adaptive(mut levels: Vec<f64>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::invalid("grid needs at least one level"));
        }
        if levels.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("grid levels must be finite"));
        }
        levels.sort_by(f64::total_cmp);
        levels.dedup_by(|a, b| (*a - *b).abs() < MERGE_TOLERANCE);
        Ok(QuantGrid {
            levels,
            kind: GridKind::Adaptive,
        })
    }

    /// `count` evenly spaced adaptive levels over `[lo, hi]`.
    pub fn uniform_adaptive(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if count == 0 || !(lo.is_finite() && hi.is_finite()) || lo > hi {
            return Err(Error::invalid(format!(
                "bad uniform grid: [{lo}, {hi}] with {count} levels"
            )));
        }
        if count == 1 || lo == hi {
            return Self::adaptive(vec![0.5 * (lo + hi)]);
        }
        let step = (hi - lo) / (count - 1) as f64;
        Self::adaptive((0..count).map(|i| lo + step * i as f64).collect())
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn level(&self, index: usize) -> f64 {
        self.levels[index]
    }

    /// Index of the level nearest `value`; ties go to the lower index and
    /// out-of-range values clamp to the extremes.
    pub fn nearest(&self, value: f64) -> usize {
        let levels = &self.levels;
        if value.is_nan() {
            return 0;
        }
        // First index with level >= value.
        let hi = levels.partition_point(|&l| l < value);
        if hi == 0 {
            return 0;
        }
        if hi == levels.len() {
            return levels.len() - 1;
        }
        let lo = hi - 1;
        if value - levels[lo] <= levels[hi] - value {
            lo
        } else {
            hi
        }
    }

    pub fn quantize(&self, x: &[f64]) -> Vec<usize> {
        x.iter().map(|&v| self.nearest(v)).collect()
    }

    pub fn dequantize(&self, symbols: &[usize]) -> Vec<f64> {
        symbols.iter().map(|&s| self.levels[s]).collect()
    }

    /// One decimal level per line.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.levels.len() * 8);
        for l in &self.levels {
            let _ = writeln!(out, "{l}");
        }
        out
    }

    /// Parses [`QuantGrid::to_text`] output as an adaptive grid.
    pub fn from_text(text: &str) -> Result<Self> {
        let levels = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(|l| {
                l.parse::<f64>()
                    .map_err(|e| Error::invalid(format!("bad level `{l}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let grid = Self::adaptive(levels)?;
        Ok(grid)
    }
}

/// Result of [`adapt_levels`]: the new grid and where each old index went.
#[derive(Debug, Clone)]
pub struct AdaptedGrid {
    pub grid: QuantGrid,
    /// `remap[old_index] = new_index`.
    pub remap: Vec<usize>,
}

impl AdaptedGrid {
    pub fn remap_symbols(&self, symbols: &mut [usize]) {
        for s in symbols {
            *s = self.remap[*s];
        }
    }
}

/// Re-optimizes every used level with symbol assignments held fixed.
///
/// With assignments fixed the coding-length term does not depend on level
/// values, so each level is moved to minimize the negative log-likelihood
/// alone. Levels are visited in order (coordinate descent), which makes the
/// total energy nonincreasing. Quadratic likelihoods with a linear operator
/// use the closed-form centroid; other operators use golden-section search.
pub fn adapt_levels(
    symbols: &[usize],
    channel: &ChannelModel,
    grid: &QuantGrid,
) -> Result<AdaptedGrid> {
    if let GridKind::Fixed { .. } = grid.kind {
        return Err(Error::InvalidOperation(
            "the fixed grid is data independent and cannot be adapted".into(),
        ));
    }
    if symbols.len() != channel.input_len() {
        return Err(Error::invalid(format!(
            "{} symbols for a channel with input length {}",
            symbols.len(),
            channel.input_len()
        )));
    }
    if let Some(&bad) = symbols.iter().find(|&&s| s >= grid.len()) {
        return Err(Error::invalid(format!(
            "symbol {bad} outside grid of {}",
            grid.len()
        )));
    }

    let mut levels = grid.levels.clone();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); levels.len()];
    for (pos, &s) in symbols.iter().enumerate() {
        members[s].push(pos);
    }
    let mut x = grid.dequantize(symbols);

    match channel.operator() {
        SystemOperator::Identity | SystemOperator::Linear(_) => {
            let mut residual = channel.residual(&x)?;
            for (k, pos) in members.iter().enumerate() {
                if pos.is_empty() {
                    continue;
                }
                // v = J · 1_{S_k}; optimal shift is <v, r> / <v, v>.
                let v = channel.operator().apply_indicator(pos, channel.input_len());
                let vv: f64 = v.iter().map(|a| a * a).sum();
                if vv <= 0.0 {
                    continue;
                }
                let vr: f64 = v.iter().zip(&residual).map(|(a, b)| a * b).sum();
                let shift = vr / vv;
                if !shift.is_finite() {
                    return Err(Error::Numeric("non-finite level shift".into()));
                }
                levels[k] += shift;
                for (r, a) in residual.iter_mut().zip(&v) {
                    *r -= shift * a;
                }
                for &p in pos {
                    x[p] = levels[k];
                }
            }
        }
        SystemOperator::Map(_) => {
            for k in 0..levels.len() {
                let pos = &members[k];
                if pos.is_empty() {
                    continue;
                }
                let gap = neighbour_gap(&levels, k);
                let (lo, hi) = (levels[k] - gap, levels[k] + gap);
                let current = channel.neg_log_likelihood_with(&x, pos, levels[k])?;
                let candidate = golden_section(lo, hi, LEVEL_SEARCH_TOLERANCE, |c| {
                    channel
                        .neg_log_likelihood_with(&x, pos, c)
                        .unwrap_or(f64::INFINITY)
                });
                let value = channel.neg_log_likelihood_with(&x, pos, candidate)?;
                if value <= current {
                    levels[k] = candidate;
                    for &p in pos {
                        x[p] = candidate;
                    }
                }
            }
        }
    }

    Ok(sort_and_merge(levels))
}

fn neighbour_gap(levels: &[f64], k: usize) -> f64 {
    let left = k.checked_sub(1).map(|j| levels[k] - levels[j]);
    let right = levels.get(k + 1).map(|v| v - levels[k]);
    match (left, right) {
        (Some(a), Some(b)) => a.max(b),
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => 1.0,
    }
    .max(1e-6)
}

fn sort_and_merge(levels: Vec<f64>) -> AdaptedGrid {
    let mut order: Vec<usize> = (0..levels.len()).collect();
    order.sort_by(|&a, &b| levels[a].total_cmp(&levels[b]).then(a.cmp(&b)));
    let mut merged: Vec<f64> = Vec::with_capacity(levels.len());
    let mut remap = vec![0; levels.len()];
    for &old in &order {
        let v = levels[old];
        match merged.last() {
            Some(&last) if (v - last).abs() < MERGE_TOLERANCE => {}
            _ => merged.push(v),
        }
        remap[old] = merged.len() - 1;
    }
    AdaptedGrid {
        grid: QuantGrid {
            levels: merged,
            kind: GridKind::Adaptive,
        },
        remap,
    }
}

/// Minimizes a unimodal `f` on `[lo, hi]` to interval width `tol`.
pub fn golden_section(mut lo: f64, mut hi: f64, tol: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    while (hi - lo).abs() > tol {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::NoiseModel;
    use proptest::prelude::*;

    #[test]
    fn fixed_grid_for_long_input() {
        let g = build_fixed_grid(15000).unwrap();
        assert_eq!(g.kind(), GridKind::Fixed { gamma: 10 });
        assert_eq!(g.len(), 201);
        assert_eq!(g.level(0), -10.0);
        assert_eq!(g.level(200), 10.0);
        assert!((g.level(101) - g.level(100) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn smallest_fixed_grid() {
        let g = build_fixed_grid(2).unwrap();
        assert_eq!(g.levels(), &[-1.0, 0.0, 1.0]);
        assert!(matches!(
            build_fixed_grid(1),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            build_fixed_grid(0),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn log_base_override() {
        // log2(1000) ≈ 9.97
        let g = build_fixed_grid_with_base(1000, 2.0).unwrap();
        assert_eq!(g.kind(), GridKind::Fixed { gamma: 10 });
        assert!(build_fixed_grid_with_base(1000, 1.0).is_err());
    }

    #[test]
    fn quantize_rounds_and_clamps() {
        let g = build_fixed_grid(15000).unwrap();
        let idx = g.quantize(&[0.26, -50.0, 50.0]);
        assert!((g.level(idx[0]) - 0.3).abs() < 1e-12);
        assert_eq!(idx[1], 0);
        assert_eq!(idx[2], 200);
    }

    #[test]
    fn quantize_ties_go_low() {
        let g = QuantGrid::adaptive(vec![0.0, 1.0]).unwrap();
        assert_eq!(g.nearest(0.5), 0);
        assert_eq!(g.nearest(0.5000001), 1);
    }

    #[test]
    fn on_grid_values_are_fixed_points() {
        let g = build_fixed_grid(100).unwrap();
        let idx: Vec<usize> = (0..g.len()).collect();
        assert_eq!(g.quantize(&g.dequantize(&idx)), idx);
    }

    #[test]
    fn text_roundtrip() {
        let g = QuantGrid::adaptive(vec![-0.3, 0.1, 2.5e-7]).unwrap();
        let back = QuantGrid::from_text(&g.to_text()).unwrap();
        assert_eq!(back.levels(), g.levels());
        assert!(QuantGrid::from_text("1.0\nabc\n").is_err());
    }

    #[test]
    fn adapt_rejects_fixed_grid() {
        let g = build_fixed_grid(4).unwrap();
        let ch = ChannelModel::identity(vec![0.0; 4], NoiseModel::awgn(1.0).unwrap()).unwrap();
        assert!(matches!(
            adapt_levels(&[0, 0, 0, 0], &ch, &g),
            Err(Error::InvalidOperation(_))
        ));
    }

    #[test]
    fn adapt_moves_single_level_to_mean() {
        let g = QuantGrid::adaptive(vec![0.0, 5.0]).unwrap();
        let y = vec![1.0, 2.0, 4.0];
        let ch = ChannelModel::identity(y, NoiseModel::awgn(0.5).unwrap()).unwrap();
        let out = adapt_levels(&[0, 0, 0], &ch, &g).unwrap();
        // Level 0 moves to 7/3, level 1 unused and unchanged.
        assert_eq!(out.grid.len(), 2);
        assert!((out.grid.level(out.remap[0]) - 7.0 / 3.0).abs() < 1e-12);
        assert_eq!(out.grid.level(out.remap[1]), 5.0);
    }

    #[test]
    fn adapt_resorts_crossing_levels() {
        let g = QuantGrid::adaptive(vec![0.0, 1.0]).unwrap();
        let ch = ChannelModel::identity(vec![3.0, -2.0], NoiseModel::awgn(1.0).unwrap()).unwrap();
        let out = adapt_levels(&[0, 1], &ch, &g).unwrap();
        assert_eq!(out.grid.levels(), &[-2.0, 3.0]);
        assert_eq!(out.remap, vec![1, 0]);
    }

    #[test]
    fn adapt_merges_coincident_levels() {
        let g = QuantGrid::adaptive(vec![0.0, 1.0]).unwrap();
        let ch = ChannelModel::identity(vec![2.0, 2.0], NoiseModel::awgn(1.0).unwrap()).unwrap();
        let out = adapt_levels(&[0, 1], &ch, &g).unwrap();
        assert_eq!(out.grid.levels(), &[2.0]);
        assert_eq!(out.remap, vec![0, 0]);
    }

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let m = golden_section(-3.0, 5.0, 1e-10, |x| (x - 1.25).powi(2));
        assert!((m - 1.25).abs() < 1e-8);
    }

    proptest! {
        #[test]
        fn fixed_grid_shape(n in 2usize..200_000) {
            let g = build_fixed_grid(n).unwrap();
            let gamma = (n as f64).ln().ceil().max(1.0) as usize;
            prop_assert_eq!(g.len(), 2 * gamma * gamma + 1);
            prop_assert_eq!(g.level(0), -(gamma as f64));
            prop_assert_eq!(g.level(g.len() - 1), gamma as f64);
            for i in 0..g.len() {
                prop_assert_eq!(g.level(i), -g.level(g.len() - 1 - i));
            }
            for w in g.levels().windows(2) {
                prop_assert!((w[1] - w[0] - 1.0 / gamma as f64).abs() < 1e-12);
            }
        }

        #[test]
        fn fixed_grid_monotone_in_n(a in 2usize..100_000, b in 2usize..100_000) {
            let (n1, n2) = if a <= b { (a, b) } else { (b, a) };
            let (g1, g2) = (build_fixed_grid(n1).unwrap(), build_fixed_grid(n2).unwrap());
            prop_assert!(g2.level(g2.len() - 1) >= g1.level(g1.len() - 1));
            prop_assert!(g2.level(1) - g2.level(0) <= g1.level(1) - g1.level(0) + 1e-15);
        }

        #[test]
        fn quantize_idempotent_and_bounded(x in proptest::collection::vec(-12.0f64..12.0, 1..40)) {
            let g = build_fixed_grid(500).unwrap();
            let q = g.quantize(&x);
            prop_assert_eq!(g.quantize(&g.dequantize(&q)), q.clone());
            let half_gap = 0.5 / 7.0 + 1e-12;
            for (&v, &s) in x.iter().zip(&q) {
                if v.abs() <= 7.0 {
                    prop_assert!((g.level(s) - v).abs() <= half_gap);
                }
            }
        }
    }
}
