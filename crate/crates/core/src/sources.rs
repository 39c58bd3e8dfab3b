//! Seeded synthetic inputs, measurement matrices and noise.

use ndarray::Array2;
use rand::Rng as _;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::channel::SystemOperator;
use crate::error::{Error, Result};
use crate::rng;

const SOURCE_STREAM: u64 = 1;
const MATRIX_STREAM: u64 = 2;
const NOISE_STREAM: u64 = 3;

/// Amplitude law of the nonzero entries of a Bernoulli source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Amplitude {
    /// ±1 with equal probability.
    #[default]
    Sign,
    /// Standard normal.
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SourceKind {
    /// Entry nonzero with probability `p`.
    Bernoulli {
        p: f64,
        #[serde(default)]
        amplitude: Amplitude,
    },
    /// Density `exp(−|x|/b) / (2b)`.
    Laplace { scale: f64 },
    /// Two-state Markov chain; `stay[i]` is the probability of remaining in
    /// state `i` and `levels[i]` the value emitted there.
    TwoStateMarkov { stay: [f64; 2], levels: [f64; 2] },
}

impl SourceKind {
    pub fn validate(&self) -> Result<()> {
        let prob = |p: f64, name: &str| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::invalid(format!(
                    "{name} must lie in [0, 1], got {p}"
                )))
            }
        };
        match *self {
            SourceKind::Bernoulli { p, .. } => prob(p, "p"),
            SourceKind::Laplace { scale } => {
                if scale.is_finite() && scale > 0.0 {
                    Ok(())
                } else {
                    Err(Error::invalid(format!(
                        "scale must be positive, got {scale}"
                    )))
                }
            }
            SourceKind::TwoStateMarkov { stay, levels } => {
                prob(stay[0], "stay[0]")?;
                prob(stay[1], "stay[1]")?;
                if levels.iter().all(|l| l.is_finite()) {
                    Ok(())
                } else {
                    Err(Error::invalid("emission levels must be finite"))
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceSpec {
    pub kind: SourceKind,
    pub len: usize,
    pub seed: u64,
}

/// Draws the sequence described by `spec`; a pure function of the spec.
pub fn generate(spec: &SourceSpec) -> Result<Vec<f64>> {
    spec.kind.validate()?;
    if spec.len == 0 {
        return Err(Error::invalid("source length must be positive"));
    }
    let mut rng = rng::stream(spec.seed, SOURCE_STREAM);
    let n = spec.len;
    let x = match spec.kind {
        SourceKind::Bernoulli { p, amplitude } => (0..n)
            .map(|_| {
                if rng.random::<f64>() < p {
                    match amplitude {
                        Amplitude::Sign => {
                            if rng.random::<bool>() {
                                1.0
                            } else {
                                -1.0
                            }
                        }
                        Amplitude::Gaussian => StandardNormal.sample(&mut rng),
                    }
                } else {
                    0.0
                }
            })
            .collect(),
        SourceKind::Laplace { scale } => (0..n)
            .map(|_| {
                let e: f64 = Exp1.sample(&mut rng);
                if rng.random::<bool>() {
                    scale * e
                } else {
                    -scale * e
                }
            })
            .collect(),
        SourceKind::TwoStateMarkov { stay, levels } => {
            let leave = [1.0 - stay[0], 1.0 - stay[1]];
            let p0 = if leave[0] + leave[1] > 0.0 {
                leave[1] / (leave[0] + leave[1])
            } else {
                1.0
            };
            let mut state = usize::from(rng.random::<f64>() >= p0);
            (0..n)
                .map(|i| {
                    if i > 0 && rng.random::<f64>() >= stay[state] {
                        state = 1 - state;
                    }
                    levels[state]
                })
                .collect()
        }
    };
    Ok(x)
}

/// `M × N` matrix of iid `N(0, 1/M)` entries.
pub fn gaussian_matrix(m: usize, n: usize, seed: u64) -> Result<SystemOperator> {
    if m == 0 || n == 0 {
        return Err(Error::invalid(format!(
            "matrix dimensions must be positive, got {m}x{n}"
        )));
    }
    let mut rng = rng::stream(seed, MATRIX_STREAM);
    let sd = 1.0 / (m as f64).sqrt();
    let j = Array2::from_shape_simple_fn((m, n), || {
        let z: f64 = StandardNormal.sample(&mut rng);
        z * sd
    });
    SystemOperator::linear(j)
}

/// Adds white Gaussian noise at measurement-domain SNR `snr_db`
/// (`σ² = ‖w‖² / (M · 10^{snr/10})`) and returns `(y, σ²)`. An infinite SNR
/// returns `w` unchanged with `σ² = 0`.
pub fn add_awgn(w: &[f64], snr_db: f64, seed: u64) -> Result<(Vec<f64>, f64)> {
    if w.is_empty() || w.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("signal must be nonempty and finite"));
    }
    if snr_db == f64::INFINITY {
        return Ok((w.to_vec(), 0.0));
    }
    if snr_db.is_nan() {
        return Err(Error::invalid("SNR is NaN"));
    }
    let power: f64 = w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64;
    if power == 0.0 {
        return Err(Error::invalid(
            "cannot set a finite SNR on an all-zero signal",
        ));
    }
    let variance = power / 10f64.powf(snr_db / 10.0);
    Ok((gaussian_noise(w, variance, seed)?, variance))
}

/// `w + N(0, variance)` entrywise.
pub fn gaussian_noise(w: &[f64], variance: f64, seed: u64) -> Result<Vec<f64>> {
    if !(variance >= 0.0 && variance.is_finite()) {
        return Err(Error::invalid(format!(
            "noise variance must be finite and nonnegative, got {variance}"
        )));
    }
    let sd = variance.sqrt();
    let mut rng = rng::stream(seed, NOISE_STREAM);
    Ok(w.iter()
        .map(|v| {
            let z: f64 = StandardNormal.sample(&mut rng);
            v + sd * z
        })
        .collect())
}
