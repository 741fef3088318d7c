//! Backpropagation check against central finite differences.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::{loss_and_grad, EvaluatorConfig, Params};

/// Finite-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Shape of the random network and data used for a check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckProbe {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub samples: usize,
    /// Number of randomly chosen parameters to compare; `None` checks all.
    pub probes: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub probed: usize,
    pub tolerance: f64,
    pub passed: bool,
}

fn rel_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < 1e-12 {
        return 0.0;
    }
    (analytic - numeric).abs() / scale
}

/// Compares analytic MSE gradients with `(L(θ+h) − L(θ−h)) / 2h`.
///
/// Dropout is taken from `config`; any nonzero rate draws new masks for every
/// loss evaluation, so the check is expected to fail with dropout on.
pub fn grad_check(
    config: &EvaluatorConfig,
    probe: &GradCheckProbe,
    tolerance: f64,
) -> GradCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = Params::glorot(probe.input_dim, probe.hidden_dim, &mut rng);
    // Random biases keep pre-activations away from the ReLU kink at 0.
    let bias_start = probe.hidden_dim * probe.input_dim;
    for b in &mut params.data[bias_start..bias_start + probe.hidden_dim] {
        *b = rng.random_range(-0.5..0.5);
    }
    *params.b2_mut() = rng.random_range(-0.5..0.5);

    let xs: Vec<Vec<f64>> = (0..probe.samples)
        .map(|_| {
            (0..probe.input_dim)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect()
        })
        .collect();
    let ys: Vec<f64> = (0..probe.samples)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let x_refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();

    let n = params.data.len();
    let mut analytic = vec![0.0; n];
    loss_and_grad(&params, &x_refs, &ys, config.dropout, &mut rng, &mut analytic);

    let indices: Vec<usize> = match probe.probes {
        Some(k) if k < n => sample(&mut rng, n, k).into_vec(),
        _ => (0..n).collect(),
    };

    let mut scratch = vec![0.0; n];
    let mut max_rel_error: f64 = 0.0;
    for &i in &indices {
        let original = params.data[i];
        params.data[i] = original + FD_STEP;
        let plus = loss_and_grad(&params, &x_refs, &ys, config.dropout, &mut rng, &mut scratch);
        params.data[i] = original - FD_STEP;
        let minus = loss_and_grad(&params, &x_refs, &ys, config.dropout, &mut rng, &mut scratch);
        params.data[i] = original;
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        max_rel_error = max_rel_error.max(rel_error(analytic[i], numeric));
    }
    GradCheckReport {
        max_rel_error,
        probed: indices.len(),
        tolerance,
        passed: max_rel_error < tolerance,
    }
}
