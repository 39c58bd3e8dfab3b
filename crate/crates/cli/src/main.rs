use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use univest::harness::{self, Cell, ExperimentConfig, ExperimentKind, ResultsTable};
use univest::{oracle, Error};

#[derive(Parser)]
#[command(
    name = "univest",
    version,
    about = "Universal estimation by annealed Gibbs sampling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compressed-sensing recovery: MCMC against FISTA.
    Cs(RunArgs),
    /// Lossy compression of a source: MCMC, ECSQ and the RD function.
    Lossy(RunArgs),
    /// Scalar-channel denoising: MAP against MMSE.
    Denoise(RunArgs),
    /// Compares the samplers with exhaustive enumeration on tiny instances.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment config; built-in desk-scale defaults if omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run this single seed instead of the config's seed list.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides the config's `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; all cores if omitted.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long)]
    threads: Option<usize>,
    /// Accepted for symmetry with the other verbs; the oracle writes nothing.
    #[arg(long, hide = true)]
    config: Option<PathBuf>,
    #[arg(long, hide = true)]
    out: Option<PathBuf>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } => 2,
        Error::Numeric(_) => 3,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Cs(a) => run(ExperimentKind::CsRecovery, a),
        Command::Lossy(a) => run(ExperimentKind::LossyCompression, a),
        Command::Denoise(a) => run(ExperimentKind::DenoiseScalar, a),
        Command::Oracle(a) => run_oracle(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn load_config(kind: ExperimentKind, path: Option<&Path>) -> univest::Result<ExperimentConfig> {
    let Some(path) = path else {
        return Ok(ExperimentConfig::default_for(kind));
    };
    let text = fs::read_to_string(path).map_err(|e| Error::Config {
        field: "config".into(),
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    let cfg = ExperimentConfig::from_toml_str(&text)?;
    if cfg.experiment != kind {
        return Err(Error::Config {
            field: "experiment".into(),
            message: format!(
                "this verb runs `{}`, config describes `{}`",
                kind.name(),
                cfg.experiment.name()
            ),
        });
    }
    Ok(cfg)
}

fn run(kind: ExperimentKind, args: RunArgs) -> univest::Result<ExitCode> {
    let mut cfg = load_config(kind, args.config.as_deref())?;
    if let Some(seed) = args.seed {
        cfg.seeds = vec![seed];
    }
    let out = args
        .out
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("results"));
    cfg.validate()?;
    let table = harness::with_threads(args.threads, || harness::run_experiment(&cfg))??;
    let path = out.join(format!("{}.csv", kind.stem()));
    harness::emit_csv(&table, &cfg, &path)?;
    summarize(&table)?;
    println!("wrote {} rows to {}", table.len(), path.display());
    Ok(ExitCode::SUCCESS)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Groups rows by the rendered values of `keys` (first-seen order) and
/// reports the median of `value` per group and per `split` label.
/// Group key with the median per split label.
type Medians = Vec<(String, Vec<(String, f64)>)>;

fn grouped(
    table: &ResultsTable,
    keys: &[&str],
    split: Option<&str>,
    value: &str,
) -> univest::Result<Medians> {
    let key_idx: Vec<usize> = keys
        .iter()
        .map(|k| table.column_index(k).expect("known column"))
        .collect();
    let split_idx = split.map(|s| table.column_index(s).expect("known column"));
    let v_idx = table.column_index(value).expect("known column");
    #[allow(clippy::type_complexity)]
    let mut groups: Vec<(String, Vec<(String, Vec<f64>)>)> = Vec::new();
    for row in table.rows() {
        let key = key_idx
            .iter()
            .zip(keys)
            .map(|(&i, k)| format!("{k}={}", render(&row[i])))
            .collect::<Vec<_>>()
            .join(" ");
        let label = split_idx.map_or_else(String::new, |i| render(&row[i]));
        let Some(v) = row[v_idx].as_f64() else {
            continue;
        };
        let g = match groups.iter().position(|g| g.0 == key) {
            Some(p) => &mut groups[p].1,
            None => {
                groups.push((key, Vec::new()));
                &mut groups.last_mut().expect("just pushed").1
            }
        };
        match g.iter().position(|s| s.0 == label) {
            Some(p) => g[p].1.push(v),
            None => g.push((label, vec![v])),
        }
    }
    Ok(groups
        .into_iter()
        .map(|(k, g)| (k, g.into_iter().map(|(l, v)| (l, median(v))).collect()))
        .collect())
}

fn render(c: &Cell) -> String {
    match c {
        Cell::UInt(v) => v.to_string(),
        Cell::Float(v) => harness::fmt_float(*v),
        Cell::Text(s) => s.clone(),
        Cell::Empty => "-".into(),
    }
}

fn summarize(table: &ResultsTable) -> univest::Result<()> {
    match table.kind() {
        ExperimentKind::CsRecovery => {
            for (key, algs) in grouped(table, &["delta", "snr_db"], Some("algorithm"), "mse")? {
                let parts: Vec<String> = algs
                    .iter()
                    .map(|(a, m)| format!("{a} {}", harness::fmt_float(*m)))
                    .collect();
                println!("{key}: median mse {}", parts.join(", "));
            }
        }
        ExperimentKind::LossyCompression => {
            let rates = grouped(table, &["param"], Some("curve"), "rate")?;
            let dists = grouped(table, &["param"], Some("curve"), "distortion")?;
            for ((key, r), (_, d)) in rates.iter().zip(&dists) {
                let pick = |v: &[(String, f64)]| v.iter().find(|c| c.0 == "mcmc").map(|c| c.1);
                if let (Some(r), Some(d)) = (pick(r), pick(d)) {
                    println!(
                        "mcmc lambda {}: median rate {} bits/symbol, distortion {}",
                        key.trim_start_matches("param="),
                        harness::fmt_float(r),
                        harness::fmt_float(d)
                    );
                }
            }
        }
        ExperimentKind::DenoiseScalar => {
            // Reported only: how far MAP error is from the MMSE error.
            for (key, v) in grouped(table, &["noise_variance"], None, "ratio")? {
                println!(
                    "{key}: median MAP/MMSE mse ratio {}",
                    harness::fmt_float(v[0].1)
                );
            }
        }
    }
    Ok(())
}

fn run_oracle(args: OracleArgs) -> univest::Result<ExitCode> {
    let report =
        harness::with_threads(args.threads, || oracle::run_checks(args.trials, args.seed))??;
    println!(
        "map: {}/{} exhaustive argmin matches, worst miss {} bits",
        report.map_matches,
        report.trials,
        harness::fmt_float(report.map_worst_gap)
    );
    println!(
        "mmse: {}/{} within three standard errors of the exact posterior mean",
        report.mmse_within, report.trials
    );
    let ok = report.map_matches * 100 >= 95 * report.trials
        && report.mmse_within * 100 >= 95 * report.trials
        && report.map_worst_gap < 0.5;
    Ok(if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}
