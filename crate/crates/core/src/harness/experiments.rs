//! The three experiment drivers.
//!
//! Each driver expands its sweep into independent points, evaluates them on
//! the rayon pool, and merges rows back in sweep order, so output does not
//! depend on the number of workers.

use rayon::prelude::*;

use super::config::{ExperimentConfig, ExperimentKind};
use super::table::{Cell, ResultsTable};
use crate::baselines::{
    blahut_arimoto, discretized_laplace, ecsq_rd_point, fista_oracle_lambda, lambda_grid,
    DiscreteSource,
};
use crate::channel::{ChannelModel, NoiseModel};
use crate::error::{Error, Result};
use crate::sampler::{estimate_map, estimate_mmse};
use crate::sources::{add_awgn, gaussian_matrix, gaussian_noise, generate, SourceKind, SourceSpec};
use crate::{entropy, rng};

/// Noise variance assumed by the estimator when the measurements are
/// noiseless, relative to the mean measurement power.
pub const NOISELESS_VARIANCE_FLOOR: f64 = 1e-3;

pub fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64
}

fn expect_kind(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<()> {
    if cfg.experiment != kind {
        return Err(Error::config(
            "experiment",
            format!(
                "expected `{}`, config describes `{}`",
                kind.name(),
                cfg.experiment.name()
            ),
        ));
    }
    cfg.validate()
}

fn source(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<f64>> {
    generate(&SourceSpec {
        kind: cfg.source.clone(),
        len: cfg.n,
        seed,
    })
}

fn collect_rows(kind: ExperimentKind, rows: Vec<Result<Vec<Vec<Cell>>>>) -> Result<ResultsTable> {
    let mut table = ResultsTable::new(kind);
    for group in rows {
        for row in group? {
            table.push(row)?;
        }
    }
    Ok(table)
}

/// Runs whichever experiment `cfg` describes.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ResultsTable> {
    match cfg.experiment {
        ExperimentKind::CsRecovery => run_cs_experiment(cfg),
        ExperimentKind::LossyCompression => run_lossy_experiment(cfg),
        ExperimentKind::DenoiseScalar => run_denoise_experiment(cfg),
    }
}

/// Runs `f` on a dedicated pool of `threads` workers (all cores if `None`).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(Error::config("threads", "must be at least 1"));
        }
        b = b.num_threads(t);
    }
    let pool = b
        .build()
        .map_err(|e| Error::InvalidOperation(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Compressed sensing: MCMC MAP against FISTA with the best weight in
/// hindsight, at each measurement ratio, SNR and seed.
pub fn run_cs_experiment(cfg: &ExperimentConfig) -> Result<ResultsTable> {
    expect_kind(cfg, ExperimentKind::CsRecovery)?;
    let n = cfg.n;
    let deltas = cfg.sweep.delta.clone().unwrap_or_default();
    let snrs = cfg.sweep.snr_db.clone().unwrap_or_default();
    let mut points = Vec::new();
    for &delta in &deltas {
        for &snr in &snrs {
            for &seed in &cfg.seeds {
                points.push((delta, snr, seed));
            }
        }
    }
    let rows: Vec<Result<Vec<Vec<Cell>>>> = points
        .par_iter()
        .map(|&(delta, snr, seed)| {
            let m = ((delta * n as f64).round() as usize).max(1);
            let x = source(cfg, seed)?;
            let op = gaussian_matrix(m, n, rng::mix(&[seed, m as u64]))?;
            let j = op.matrix().expect("gaussian operator is linear").clone();
            let w = op.apply(&x)?;
            let power = w.iter().map(|v| v * v).sum::<f64>() / m as f64;
            let (y, variance) = if power == 0.0 {
                // All-zero input: there is no signal to set an SNR against.
                (w.clone(), 0.0)
            } else {
                add_awgn(&w, snr, rng::mix(&[seed, m as u64, snr.to_bits()]))?
            };
            let model_variance = if variance > 0.0 {
                variance
            } else {
                (NOISELESS_VARIANCE_FLOOR * power).max(1e-12)
            };
            let ch = ChannelModel::linear(j.clone(), y.clone(), NoiseModel::awgn(model_variance)?)?;
            let map = estimate_map(
                &ch,
                &cfg.estimator
                    .map_config(seed, rng::mix(&[m as u64, snr.to_bits()])),
            )?;

            let lambdas = lambda_grid(&j, &y, cfg.baseline.fista_lambdas);
            let (lambda, xf) =
                fista_oracle_lambda(&j, &y, &x, &lambdas, cfg.baseline.fista_iterations)?;

            let energy: f64 = x.iter().map(|v| v * v).sum();
            let row = |alg: &str, est: &[f64], lambda: Option<f64>| -> Vec<Cell> {
                let e = mse(est, &x);
                let nmse = if energy > 0.0 {
                    e * n as f64 / energy
                } else {
                    f64::NAN
                };
                vec![
                    n.into(),
                    m.into(),
                    delta.into(),
                    snr.into(),
                    seed.into(),
                    alg.into(),
                    variance.into(),
                    lambda.into(),
                    e.into(),
                    nmse.into(),
                ]
            };
            Ok(vec![
                row("mcmc", &map.estimate, None),
                row("fista", &xf, Some(lambda)),
            ])
        })
        .collect();
    collect_rows(ExperimentKind::CsRecovery, rows)
}

/// Lossy compression: rate `H_q(x̂)` and distortion of the MCMC coder across
/// slopes, with ECSQ and (for Laplace sources) the Blahut–Arimoto curve.
pub fn run_lossy_experiment(cfg: &ExperimentConfig) -> Result<ResultsTable> {
    expect_kind(cfg, ExperimentKind::LossyCompression)?;
    let n = cfg.n;
    let lambdas = cfg.sweep.lambda.clone().unwrap_or_default();
    let steps = cfg.sweep.ecsq_steps.clone().unwrap_or_default();
    let slopes = cfg.sweep.rd_slopes.clone().unwrap_or_default();

    let mut points = Vec::new();
    for &seed in &cfg.seeds {
        for &lambda in &lambdas {
            points.push((seed, lambda));
        }
    }
    let mcmc: Vec<Result<Vec<Vec<Cell>>>> = points
        .par_iter()
        .map(|&(seed, lambda)| {
            let x = source(cfg, seed)?;
            let ch = ChannelModel::lossy(x.clone(), lambda)?;
            let map = estimate_map(&ch, &cfg.estimator.map_config(seed, lambda.to_bits()))?;
            let rate =
                entropy::ContextCounts::build(&map.symbols, map.order, map.grid.len())?.h_q();
            Ok(vec![vec![
                "mcmc".into(),
                lambda.into(),
                seed.into(),
                n.into(),
                rate.into(),
                mse(&map.estimate, &x).into(),
            ]])
        })
        .collect();
    let mut table = collect_rows(ExperimentKind::LossyCompression, mcmc)?;

    let ecsq: Vec<Result<Vec<Vec<Cell>>>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let x = source(cfg, seed)?;
            steps
                .iter()
                .map(|&step| {
                    let p = ecsq_rd_point(&x, step)?;
                    Ok(vec![
                        "ecsq".into(),
                        step.into(),
                        seed.into(),
                        n.into(),
                        p.rate.into(),
                        p.distortion.into(),
                    ])
                })
                .collect()
        })
        .collect();
    table.extend(collect_rows(ExperimentKind::LossyCompression, ecsq)?)?;

    if let SourceKind::Laplace { scale } = cfg.source {
        let b = &cfg.baseline;
        let (centres, pmf) = discretized_laplace(scale, b.rd_half_width * scale, b.rd_bins);
        let src = DiscreteSource::squared_error(&centres, pmf)?;
        for (beta, p) in slopes.iter().zip(blahut_arimoto(&src, &slopes)?) {
            table.push(vec![
                "blahut-arimoto".into(),
                (*beta).into(),
                Cell::Empty,
                Cell::Empty,
                p.rate.into(),
                p.distortion.into(),
            ])?;
        }
    }
    Ok(table)
}

/// Scalar-channel denoising: MAP against posterior-mean error.
pub fn run_denoise_experiment(cfg: &ExperimentConfig) -> Result<ResultsTable> {
    expect_kind(cfg, ExperimentKind::DenoiseScalar)?;
    let n = cfg.n;
    let variances = cfg.sweep.noise_variance.clone().unwrap_or_default();
    let mut points = Vec::new();
    for &v in &variances {
        for &seed in &cfg.seeds {
            points.push((v, seed));
        }
    }
    let rows: Vec<Result<Vec<Vec<Cell>>>> = points
        .par_iter()
        .map(|&(variance, seed)| {
            let x = source(cfg, seed)?;
            let y = gaussian_noise(&x, variance, rng::mix(&[seed, variance.to_bits()]))?;
            let ch = ChannelModel::identity(y, NoiseModel::awgn(variance)?)?;
            let stream = variance.to_bits();
            let map = estimate_map(&ch, &cfg.estimator.map_config(seed, stream))?;
            let post = estimate_mmse(
                &ch,
                &map.grid,
                &cfg.estimator.posterior_config(seed, stream),
            )?;
            let (a, b) = (mse(&map.estimate, &x), mse(&post.estimate, &x));
            Ok(vec![vec![
                n.into(),
                variance.into(),
                seed.into(),
                a.into(),
                b.into(),
                (a / b).into(),
            ]])
        })
        .collect();
    collect_rows(ExperimentKind::DenoiseScalar, rows)
}
