//! Brute-force references for tiny instances, written from the definitions
//! and sharing nothing with the library's incremental code paths.

#![allow(dead_code)]

use std::collections::HashMap;
use std::f64::consts::{LN_2, PI};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use univest::{ChannelModel, NoiseModel, QuantGrid};

/// A tiny instance: measurements, optional square matrix and noise variance.
#[derive(Debug, Clone)]
pub struct Tiny {
    pub y: Vec<f64>,
    pub j: Option<Array2<f64>>,
    pub variance: f64,
    pub x: Vec<f64>,
}

impl Tiny {
    /// Binary input with `P(1) = 0.4`; even trials observe through the
    /// identity, odd trials through a square Gaussian matrix.
    pub fn draw(len: usize, variance: (f64, f64), seed: u64, trial: u64) -> Tiny {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1_000_003).wrapping_add(trial));
        let variance = rng.random_range(variance.0..variance.1);
        let x: Vec<f64> = (0..len)
            .map(|_| f64::from(rng.random_bool(0.4) as u8))
            .collect();
        let j = (trial % 2 == 1).then(|| {
            let scale = (len as f64).sqrt();
            Array2::from_shape_fn((len, len), |_| {
                let g: f64 = StandardNormal.sample(&mut rng);
                g / scale
            })
        });
        let clean = match &j {
            None => x.clone(),
            Some(j) => matvec(j, &x),
        };
        let y = clean
            .iter()
            .map(|c| {
                let g: f64 = StandardNormal.sample(&mut rng);
                c + variance.sqrt() * g
            })
            .collect();
        Tiny { y, j, variance, x }
    }

    pub fn channel(&self) -> ChannelModel {
        let noise = NoiseModel::awgn(self.variance).unwrap();
        match &self.j {
            None => ChannelModel::identity(self.y.clone(), noise).unwrap(),
            Some(j) => ChannelModel::linear(j.clone(), self.y.clone(), noise).unwrap(),
        }
    }
}

pub fn binary_grid() -> QuantGrid {
    QuantGrid::adaptive(vec![0.0, 1.0]).unwrap()
}

pub fn matvec(j: &Array2<f64>, x: &[f64]) -> Vec<f64> {
    (0..j.nrows())
        .map(|r| (0..j.ncols()).map(|c| j[[r, c]] * x[c]).sum())
        .collect()
}

/// `N·H_q` in bits, circular contexts, from hash-map counts.
pub fn coding_bits(symbols: &[usize], q: usize) -> f64 {
    let n = symbols.len();
    let mut joint: HashMap<(Vec<usize>, usize), usize> = HashMap::new();
    let mut ctx: HashMap<Vec<usize>, usize> = HashMap::new();
    for i in 0..n {
        let u: Vec<usize> = (1..=q).rev().map(|k| symbols[(i + n - k) % n]).collect();
        *joint.entry((u.clone(), symbols[i])).or_default() += 1;
        *ctx.entry(u).or_default() += 1;
    }
    let mut terms: Vec<f64> = joint
        .iter()
        .map(|((u, _), &c)| {
            let c = c as f64;
            -c * (c / ctx[u] as f64).log2()
        })
        .collect();
    terms.sort_by(f64::total_cmp);
    terms.iter().sum::<f64>().max(0.0)
}

/// `−ln f(y | x)` in nats.
pub fn neg_log_likelihood(y: &[f64], j: Option<&Array2<f64>>, variance: f64, x: &[f64]) -> f64 {
    let w = match j {
        None => x.to_vec(),
        Some(j) => matvec(j, x),
    };
    y.iter()
        .zip(&w)
        .map(|(yi, wi)| 0.5 * (2.0 * PI * variance).ln() + (yi - wi).powi(2) / (2.0 * variance))
        .sum()
}

/// Energy in bits of a symbol sequence.
pub fn energy(t: &Tiny, levels: &[f64], q: usize, symbols: &[usize]) -> f64 {
    let x: Vec<f64> = symbols.iter().map(|&s| levels[s]).collect();
    coding_bits(symbols, q) + neg_log_likelihood(&t.y, t.j.as_ref(), t.variance, &x) / LN_2
}

/// All `alphabet^len` sequences in lexicographic order.
pub fn all_sequences(len: usize, alphabet: usize) -> Vec<Vec<usize>> {
    let total = alphabet.pow(len as u32);
    (0..total)
        .map(|mut k| {
            let mut s = vec![0; len];
            for slot in s.iter_mut().rev() {
                *slot = k % alphabet;
                k /= alphabet;
            }
            s
        })
        .collect()
}

/// Minimum-energy sequence and its energy.
pub fn argmin(t: &Tiny, levels: &[f64], q: usize) -> (Vec<usize>, f64) {
    all_sequences(t.x.len(), levels.len())
        .into_iter()
        .map(|s| {
            let e = energy(t, levels, q, &s);
            (s, e)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap()
}

/// Exact posterior mean under `p(x) ∝ 2^{−energy}`.
pub fn posterior_mean(t: &Tiny, levels: &[f64], q: usize) -> Vec<f64> {
    let seqs = all_sequences(t.x.len(), levels.len());
    let energies: Vec<f64> = seqs.iter().map(|s| energy(t, levels, q, s)).collect();
    let min = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let mut mean = vec![0.0; t.x.len()];
    let mut z = 0.0;
    for (s, e) in seqs.iter().zip(&energies) {
        let w = (-(e - min) * LN_2).exp();
        z += w;
        for (m, &k) in mean.iter_mut().zip(s) {
            *m += w * levels[k];
        }
    }
    mean.iter().map(|m| m / z).collect()
}

/// Distribution of coordinate `n` given the others, proportional to
/// `exp(−s·ln2·energy)`.
pub fn conditional(
    t: &Tiny,
    levels: &[f64],
    q: usize,
    symbols: &[usize],
    n: usize,
    s: f64,
) -> Vec<f64> {
    let energies: Vec<f64> = (0..levels.len())
        .map(|k| {
            let mut c = symbols.to_vec();
            c[n] = k;
            energy(t, levels, q, &c)
        })
        .collect();
    let min = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = energies
        .iter()
        .map(|e| (-s * LN_2 * (e - min)).exp())
        .collect();
    let z: f64 = w.iter().sum();
    w.iter().map(|v| v / z).collect()
}
