//! Small descriptive-statistics helpers shared across modules.

use serde::{Deserialize, Serialize};

/// Divisor used for variance and standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StdConvention {
    /// Divide by `n`.
    #[default]
    Population,
    /// Divide by `n - 1`; a single value has zero spread.
    Sample,
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn variance(values: &[f64], convention: StdConvention) -> f64 {
    let n = values.len();
    if n == 0 {
        return f64::NAN;
    }
    let mu = mean(values);
    let ss: f64 = values.iter().map(|v| (v - mu) * (v - mu)).sum();
    match convention {
        StdConvention::Population => ss / n as f64,
        StdConvention::Sample if n < 2 => 0.0,
        StdConvention::Sample => ss / (n - 1) as f64,
    }
}

pub fn std_dev(values: &[f64], convention: StdConvention) -> f64 {
    variance(values, convention).sqrt()
}

pub fn min_max(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}
