//! Experiment configuration.
//!
//! Configs are TOML. Every table rejects unknown keys, and keys that the
//! chosen experiment does not use are rejected during validation, so a typo
//! in a sweep definition never silently falls back to a default.
//!
//! ```toml
//! experiment = "cs-recovery"   # cs-recovery | lossy-compression | denoise-scalar
//! n = 256                      # input length
//! seeds = [1, 2, 3]
//!
//! [source]                     # bernoulli | laplace | two-state-markov
//! kind = "bernoulli"
//! p = 0.03
//! amplitude = "sign"           # sign | gaussian
//!
//! [sweep]
//! delta = [0.3, 0.4, 0.5, 0.7] # cs: M = round(delta * n)
//! snr_db = [5.0, 10.0]         # cs; `inf` for noiseless
//! # lambda = [...]             # lossy: rate-distortion slopes
//! # ecsq_steps = [...]         # lossy: ECSQ step sizes
//! # rd_slopes = [...]          # lossy: Blahut-Arimoto slopes
//! # noise_variance = [...]     # denoise
//!
//! [estimator]
//! grid = "fixed"               # fixed | adaptive
//! # levels = 16                # adaptive grid size
//! log_base = 10.0              # fixed grid: gamma = ceil(log_base(n)); default e
//! # order = 1                  # context order; default max(1, ceil(0.5 log_A n))
//! s0 = 1.0                     # default 0.25
//! rho = 1.05                   # default 1.15
//! sweeps_per_stage = 2
//! sweeps = 400
//! restarts = 3
//! restart_init = "data-aware"  # random | data-aware
//! adapt_every = 10
//! burn_in = 50
//! samples = 200
//!
//! [baseline]
//! fista_lambdas = 13
//! fista_iterations = 5000
//! rd_half_width = 14.0
//! rd_bins = 401
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::{AnnealSchedule, GridChoice, MapConfig, PosteriorConfig, RestartInit};
use crate::sources::{Amplitude, SourceKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    CsRecovery,
    LossyCompression,
    DenoiseScalar,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::CsRecovery => "cs-recovery",
            ExperimentKind::LossyCompression => "lossy-compression",
            ExperimentKind::DenoiseScalar => "denoise-scalar",
        }
    }

    /// File stem of the emitted table.
    pub fn stem(self) -> &'static str {
        match self {
            ExperimentKind::CsRecovery => "cs",
            ExperimentKind::LossyCompression => "lossy",
            ExperimentKind::DenoiseScalar => "denoise",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GridKindConfig {
    #[default]
    Fixed,
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum RestartInitConfig {
    #[default]
    Random,
    DataAware,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ecsq_steps: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rd_slopes: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_variance: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorConfig {
    pub grid: GridKindConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<usize>,
    pub log_base: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    pub s0: f64,
    pub rho: f64,
    pub sweeps_per_stage: usize,
    pub sweeps: usize,
    pub restarts: usize,
    pub restart_init: RestartInitConfig,
    pub adapt_every: usize,
    pub burn_in: usize,
    pub samples: usize,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        let s = AnnealSchedule::default();
        let p = PosteriorConfig::default();
        EstimatorConfig {
            grid: GridKindConfig::Fixed,
            levels: None,
            log_base: std::f64::consts::E,
            order: None,
            s0: s.s0,
            rho: s.rho,
            sweeps_per_stage: s.sweeps_per_stage,
            sweeps: s.budget,
            restarts: 3,
            restart_init: RestartInitConfig::Random,
            adapt_every: 10,
            burn_in: p.burn_in,
            samples: p.samples,
        }
    }
}

impl EstimatorConfig {
    pub fn schedule(&self) -> AnnealSchedule {
        AnnealSchedule {
            s0: self.s0,
            rho: self.rho,
            sweeps_per_stage: self.sweeps_per_stage,
            budget: self.sweeps,
        }
    }

    pub fn grid_choice(&self) -> GridChoice {
        match self.grid {
            GridKindConfig::Fixed => GridChoice::Fixed {
                log_base: self.log_base,
            },
            GridKindConfig::Adaptive => GridChoice::Adaptive {
                levels: self.levels.unwrap_or(DEFAULT_ADAPTIVE_LEVELS),
            },
        }
    }

    pub fn map_config(&self, seed: u64, stream: u64) -> MapConfig {
        MapConfig {
            grid: self.grid_choice(),
            order: self.order,
            schedule: self.schedule(),
            restarts: self.restarts,
            restart_init: match self.restart_init {
                RestartInitConfig::Random => RestartInit::Random,
                RestartInitConfig::DataAware => RestartInit::DataAware,
            },
            adapt_every: self.adapt_every,
            seed,
            stream,
        }
    }

    pub fn posterior_config(&self, seed: u64, stream: u64) -> PosteriorConfig {
        PosteriorConfig {
            order: self.order,
            burn_in: self.burn_in,
            samples: self.samples,
            seed,
            stream,
        }
    }
}

pub const DEFAULT_ADAPTIVE_LEVELS: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineConfig {
    pub fista_lambdas: usize,
    pub fista_iterations: usize,
    pub rd_half_width: f64,
    pub rd_bins: usize,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            fista_lambdas: 13,
            fista_iterations: 5000,
            rd_half_width: 14.0,
            rd_bins: 401,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub n: usize,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub source: SourceKind,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub baseline: BaselineConfig,
}

fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| {
            let t = k as f64 / (count - 1) as f64;
            let v = lo * (hi / lo).powf(t);
            // Trim to 6 significant digits so configs print cleanly.
            let mag = 10f64.powi(v.log10().floor() as i32 - 5);
            (v / mag).round() * mag
        })
        .collect()
}

impl ExperimentConfig {
    /// Desk-scale defaults for each experiment.
    pub fn default_for(kind: ExperimentKind) -> Self {
        let seeds: Vec<u64> = (1..=10).collect();
        match kind {
            ExperimentKind::CsRecovery => ExperimentConfig {
                experiment: kind,
                n: 256,
                seeds,
                output_dir: None,
                source: SourceKind::Bernoulli {
                    p: 0.03,
                    amplitude: Amplitude::Sign,
                },
                sweep: SweepConfig {
                    delta: Some(vec![0.3, 0.4, 0.5, 0.7]),
                    snr_db: Some(vec![5.0, 10.0]),
                    ..Default::default()
                },
                // A coarse grid keeps the MAP from fitting noise with small
                // levels; sparse signals also need the data-aware start.
                estimator: EstimatorConfig {
                    log_base: 10.0,
                    s0: 1.0,
                    rho: 1.05,
                    restart_init: RestartInitConfig::DataAware,
                    ..EstimatorConfig::default()
                },
                baseline: BaselineConfig::default(),
            },
            ExperimentKind::LossyCompression => ExperimentConfig {
                experiment: kind,
                n: 2000,
                seeds: (1..=4).collect(),
                output_dir: None,
                source: SourceKind::Laplace { scale: 1.0 },
                sweep: SweepConfig {
                    lambda: Some(log_space(0.75, 6.0, 8)),
                    ecsq_steps: Some(log_space(0.1, 4.0, 40)),
                    rd_slopes: Some(log_space(0.1, 20.0, 40)),
                    ..Default::default()
                },
                estimator: EstimatorConfig {
                    order: Some(0),
                    ..EstimatorConfig::default()
                },
                baseline: BaselineConfig::default(),
            },
            ExperimentKind::DenoiseScalar => ExperimentConfig {
                experiment: kind,
                n: 256,
                seeds,
                output_dir: None,
                source: SourceKind::TwoStateMarkov {
                    stay: [0.9, 0.9],
                    levels: [0.0, 1.0],
                },
                sweep: SweepConfig {
                    noise_variance: Some(vec![0.05, 0.25, 1.0]),
                    ..Default::default()
                },
                // At n = 256 a context model over dozens of fixed levels
                // learns little; a few adapted levels suit a scalar channel.
                estimator: EstimatorConfig {
                    grid: GridKindConfig::Adaptive,
                    levels: Some(4),
                    ..EstimatorConfig::default()
                },
                baseline: BaselineConfig::default(),
            },
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let field = e
                .message()
                .split('`')
                .nth(1)
                .filter(|_| {
                    e.message().contains("unknown field") || e.message().contains("missing field")
                })
                .unwrap_or("config")
                .to_string();
            Error::config(field, e.message().trim().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::config("n", "input length must be at least 2"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config(
                "seeds",
                "at least one explicit seed is required",
            ));
        }
        self.source
            .validate()
            .map_err(|e| Error::config("source", e.to_string()))?;
        let e = &self.estimator;
        if !(e.s0 > 0.0 && e.s0.is_finite()) {
            return Err(Error::config("estimator.s0", "must be positive"));
        }
        if !(e.rho > 1.0 && e.rho.is_finite()) {
            return Err(Error::config("estimator.rho", "must exceed 1"));
        }
        if e.sweeps_per_stage == 0 {
            return Err(Error::config(
                "estimator.sweeps_per_stage",
                "must be at least 1",
            ));
        }
        if e.restarts == 0 {
            return Err(Error::config("estimator.restarts", "must be at least 1"));
        }
        if e.adapt_every == 0 {
            return Err(Error::config("estimator.adapt_every", "must be at least 1"));
        }
        if e.samples == 0 {
            return Err(Error::config("estimator.samples", "must be at least 1"));
        }
        if !(e.log_base > 1.0 && e.log_base.is_finite()) {
            return Err(Error::config("estimator.log_base", "must exceed 1"));
        }
        if e.levels.is_some() && e.grid != GridKindConfig::Adaptive {
            return Err(Error::config(
                "estimator.levels",
                "only used with grid = \"adaptive\"",
            ));
        }
        if e.levels == Some(0) {
            return Err(Error::config("estimator.levels", "must be at least 1"));
        }
        if let Some(q) = e.order {
            if q >= self.n {
                return Err(Error::config("estimator.order", "must be below n"));
            }
        }

        let s = &self.sweep;
        let used: &[&str] = match self.experiment {
            ExperimentKind::CsRecovery => &["delta", "snr_db"],
            ExperimentKind::LossyCompression => &["lambda", "ecsq_steps", "rd_slopes"],
            ExperimentKind::DenoiseScalar => &["noise_variance"],
        };
        let all: [(&str, &Option<Vec<f64>>); 6] = [
            ("delta", &s.delta),
            ("snr_db", &s.snr_db),
            ("lambda", &s.lambda),
            ("ecsq_steps", &s.ecsq_steps),
            ("rd_slopes", &s.rd_slopes),
            ("noise_variance", &s.noise_variance),
        ];
        for (name, values) in all {
            let field = format!("sweep.{name}");
            match values {
                Some(_) if !used.contains(&name) => {
                    return Err(Error::config(
                        field,
                        format!("not used by the {} experiment", self.experiment.name()),
                    ))
                }
                None if used.contains(&name) => {
                    return Err(Error::config(field, "required sweep is missing"))
                }
                Some(v) if v.is_empty() => {
                    return Err(Error::config(field, "sweep must be nonempty"))
                }
                Some(v) => {
                    let ok = match name {
                        "snr_db" => v.iter().all(|x| !x.is_nan() && *x != f64::NEG_INFINITY),
                        "delta" => v.iter().all(|x| *x > 0.0 && x.is_finite()),
                        _ => v.iter().all(|x| *x > 0.0 && x.is_finite()),
                    };
                    if !ok {
                        return Err(Error::config(field, "values out of range"));
                    }
                }
                None => {}
            }
        }
        if self.experiment == ExperimentKind::CsRecovery {
            for &d in s.delta.as_deref().unwrap_or_default() {
                let m = (d * self.n as f64).round() as usize;
                if m == 0 {
                    return Err(Error::config(
                        "sweep.delta",
                        format!("delta {d} gives zero measurements"),
                    ));
                }
            }
        }
        let b = &self.baseline;
        if b.fista_lambdas == 0 || b.fista_iterations == 0 {
            return Err(Error::config(
                "baseline.fista_lambdas",
                "FISTA sweep must be nonempty",
            ));
        }
        if b.rd_bins < 3 || b.rd_half_width.is_nan() || b.rd_half_width <= 0.0 {
            return Err(Error::config(
                "baseline.rd_bins",
                "RD discretization too small",
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_roundtrip() {
        for kind in [
            ExperimentKind::CsRecovery,
            ExperimentKind::LossyCompression,
            ExperimentKind::DenoiseScalar,
        ] {
            let cfg = ExperimentConfig::default_for(kind);
            cfg.validate().unwrap();
            let text = cfg.to_toml_string();
            assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = r#"
            experiment = "cs-recovery"
            n = 64
            seeds = [1]
            [source]
            kind = "bernoulli"
            p = 0.03
            [sweep]
            delta = [0.5]
            snr_db = [10.0]
            [estimator]
            sweepz = 10
        "#;
        match ExperimentConfig::from_toml_str(text) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "sweepz"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unused_sweep_rejected() {
        let text = r#"
            experiment = "denoise-scalar"
            n = 64
            seeds = [1]
            [source]
            kind = "laplace"
            scale = 1.0
            [sweep]
            noise_variance = [0.1]
            lambda = [1.0]
        "#;
        match ExperimentConfig::from_toml_str(text) {
            Err(Error::Config { field, .. }) => assert_eq!(field, "sweep.lambda"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn infinite_snr_parses() {
        let text = r#"
            experiment = "cs-recovery"
            n = 32
            seeds = [4]
            [source]
            kind = "bernoulli"
            p = 0.1
            amplitude = "gaussian"
            [sweep]
            delta = [1.0]
            snr_db = [inf]
        "#;
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.sweep.snr_db, Some(vec![f64::INFINITY]));
    }

    #[test]
    fn missing_sweep_and_seeds() {
        let mut cfg = ExperimentConfig::default_for(ExperimentKind::CsRecovery);
        cfg.sweep.snr_db = None;
        assert!(
            matches!(cfg.validate(), Err(Error::Config { field, .. }) if field == "sweep.snr_db")
        );
        let mut cfg = ExperimentConfig::default_for(ExperimentKind::CsRecovery);
        cfg.seeds.clear();
        assert!(matches!(cfg.validate(), Err(Error::Config { field, .. }) if field == "seeds"));
    }
}
