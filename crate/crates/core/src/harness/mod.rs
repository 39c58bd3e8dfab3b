//! Experiment configuration, drivers and result tables.

mod config;
mod experiments;
mod table;

pub use config::{
    BaselineConfig, EstimatorConfig, ExperimentConfig, ExperimentKind, GridKindConfig,
    RestartInitConfig, SweepConfig, DEFAULT_ADAPTIVE_LEVELS,
};
pub use experiments::{
    mse, run_cs_experiment, run_denoise_experiment, run_experiment, run_lossy_experiment,
    with_threads, NOISELESS_VARIANCE_FLOOR,
};
pub use table::{emit_csv, metadata_path, read_csv, schema, Cell, ColumnType, ResultsTable};

/// Formats like C's `%.9g`: nine significant digits, trailing zeros dropped,
/// exponent notation outside `[1e-4, 1e9)`.
pub fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let trim = |s: &str| -> String {
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s.to_string()
        }
    };
    if !(-4..9).contains(&exp) {
        format!("{}e{}", trim(mantissa), exp)
    } else {
        let decimals = (8 - exp).max(0) as usize;
        trim(&format!("{v:.decimals$}"))
    }
}

#[cfg(test)]
mod tests {
    use super::fmt_float;
    use proptest::prelude::*;

    #[test]
    fn matches_printf_g() {
        assert_eq!(fmt_float(0.0), "0");
        assert_eq!(fmt_float(1.0), "1");
        assert_eq!(fmt_float(-2.5), "-2.5");
        assert_eq!(fmt_float(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_float(123456789.0), "123456789");
        assert_eq!(fmt_float(1234567890.0), "1.23456789e9");
        assert_eq!(fmt_float(0.0001), "0.0001");
        assert_eq!(fmt_float(0.00001234), "1.234e-5");
        assert_eq!(fmt_float(f64::INFINITY), "inf");
        assert_eq!(fmt_float(9.9999999999), "10");
    }

    proptest! {
        #[test]
        fn nine_significant_digits(v in -1e12f64..1e12) {
            let back: f64 = fmt_float(v).parse().unwrap();
            prop_assert!((back - v).abs() <= 5e-9 * v.abs() + 1e-300);
        }
    }
}
