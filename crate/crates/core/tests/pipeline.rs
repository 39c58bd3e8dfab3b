mod common;

use univest::harness::{self, read_csv};
use univest::sources::{add_awgn, gaussian_matrix, Amplitude};
use univest::{
    estimate_map, estimate_min_distortion, estimate_mmse, generate, ChannelModel, Distortion,
    ExperimentConfig, ExperimentKind, NoiseModel, PosteriorConfig, SourceKind, SourceSpec,
};

#[test]
fn sparse_signal_is_recovered_at_ten_db() {
    let n = 64;
    let x = generate(&SourceSpec {
        kind: SourceKind::Bernoulli {
            p: 0.05,
            amplitude: Amplitude::Sign,
        },
        len: n,
        seed: 5,
    })
    .unwrap();
    let op = gaussian_matrix(40, n, 6).unwrap();
    let j = op.matrix().unwrap().clone();
    let w = op.apply(&x).unwrap();
    let (y, var) = add_awgn(&w, 10.0, 7).unwrap();
    let ch = ChannelModel::linear(j, y, NoiseModel::awgn(var).unwrap()).unwrap();
    let cs = ExperimentConfig::default_for(ExperimentKind::CsRecovery);
    let est = estimate_map(&ch, &cs.estimator.map_config(1, 0)).unwrap();
    assert_eq!(est.estimate, x);
}

#[test]
fn posterior_estimates_agree_with_enumeration_on_average() {
    let levels = [0.0, 1.0];
    let mut err = 0.0;
    for trial in 0..10 {
        let t = common::Tiny::draw(5, (0.3, 1.0), 9, trial);
        let exact = common::posterior_mean(&t, &levels, 1);
        let cfg = PosteriorConfig {
            order: Some(1),
            burn_in: 200,
            samples: 4000,
            seed: 3,
            stream: trial,
        };
        let est = estimate_mmse(&t.channel(), &common::binary_grid(), &cfg).unwrap();
        err += harness::mse(&est.estimate, &exact);
    }
    assert!(err / 10.0 < 1e-3, "{}", err / 10.0);
}

#[test]
fn mmse_beats_map_on_a_noisy_scalar_channel() {
    let cfg = ExperimentConfig {
        n: 128,
        seeds: vec![1, 2, 3, 4],
        ..ExperimentConfig::default_for(ExperimentKind::DenoiseScalar)
    };
    let table = harness::run_denoise_experiment(&cfg).unwrap();
    let col = |name| -> f64 {
        table
            .column(name)
            .unwrap()
            .iter()
            .map(|c| c.as_f64().unwrap())
            .sum()
    };
    assert!(col("mse_mmse") < col("mse_map"));
}

#[test]
fn hamming_minimum_distortion_picks_the_marginal_mode() {
    let t = common::Tiny::draw(4, (0.01, 0.02), 2, 0);
    let cfg = PosteriorConfig {
        order: Some(1),
        seed: 1,
        ..PosteriorConfig::default()
    };
    let est = estimate_min_distortion(
        &t.channel(),
        &common::binary_grid(),
        &Distortion::Hamming,
        &cfg,
    )
    .unwrap();
    assert_eq!(est, t.x);
}

#[test]
fn emitted_tables_read_back() {
    let mut cfg = ExperimentConfig::default_for(ExperimentKind::LossyCompression);
    cfg.n = 100;
    cfg.seeds = vec![3];
    cfg.sweep.lambda = Some(vec![2.0]);
    cfg.sweep.ecsq_steps = Some(vec![0.5]);
    cfg.sweep.rd_slopes = Some(vec![2.0]);
    cfg.baseline.rd_bins = 101;
    cfg.estimator.sweeps = 60;
    let table = harness::run_experiment(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lossy.csv");
    harness::emit_csv(&table, &cfg, &path).unwrap();
    let back = read_csv(ExperimentKind::LossyCompression, &path).unwrap();
    assert_eq!(
        back.to_csv_string().unwrap(),
        table.to_csv_string().unwrap()
    );
    let meta = std::fs::read_to_string(harness::metadata_path(&path)).unwrap();
    assert!(meta.contains("lossy-compression"));
}
