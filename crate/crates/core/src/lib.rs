//! Universal estimation of signals observed through noisy channels.
//!
//! An estimate is a sequence over a finite reproduction grid that minimizes
//! its conditional empirical entropy in bits plus the negative log-likelihood
//! of the measurements. The minimization is done by annealed Gibbs sampling,
//! which at unit inverse temperature also samples the posterior used for
//! MMSE and general minimum-distortion estimates.
//!
//! ```
//! use univest::{estimate_map, ChannelModel, MapConfig, NoiseModel};
//!
//! let y = vec![1.02, 0.97, 1.01, 0.99, 1.0, 1.03, 0.98, 1.0];
//! let ch = ChannelModel::identity(y, NoiseModel::awgn(0.01).unwrap()).unwrap();
//! let est = estimate_map(&ch, &MapConfig::default()).unwrap();
//! assert!(est.estimate.iter().all(|v| (v - 1.0).abs() < 0.2));
//! ```

pub mod baselines;
pub mod channel;
pub mod entropy;
pub mod error;
pub mod harness;
pub mod oracle;
pub mod quantizer;
pub mod rng;
pub mod sampler;
pub mod sources;

pub use baselines::{blahut_arimoto, ecsq_rd_point, fista, FistaResult, RDPoint, RdCurve};
pub use channel::{ChannelModel, MapOperator, NoiseModel, SystemOperator};
pub use entropy::ContextCounts;
pub use error::{Error, Result};
pub use harness::{emit_csv, ExperimentConfig, ExperimentKind, ResultsTable};
pub use quantizer::{build_fixed_grid, GridKind, QuantGrid};
pub use sampler::{
    anneal, estimate_map, estimate_min_distortion, estimate_mmse, AnnealSchedule, AnnealState,
    Distortion, EnergyTerms, GridChoice, MapConfig, MapEstimate, PosteriorConfig,
    PosteriorEstimate,
};
pub use sources::{generate, SourceKind, SourceSpec};
