//! Model snapshot files.
//!
//! A snapshot is one JSON object. Numeric arrays are stored as base64 of
//! little-endian `f64` bytes so a reload reproduces every bit:
//!
//! ```json
//! {
//!   "format": "idea-eval-model/1",
//!   "input_dim": 16, "hidden_dim": 1024, "selected_epoch": 7,
//!   "config": { ... EvaluatorConfig ... },
//!   "feat_mean": "<base64>", "feat_std": "<base64>",
//!   "params": "<base64>"
//! }
//! ```
//!
//! `params` is `W1` (hidden × input, row-major), then `b1`, `w2`, `b2`.

use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{EvalError, Evaluator, EvaluatorConfig, Params, Standardizer};

pub const SNAPSHOT_FORMAT: &str = "idea-eval-model/1";

#[derive(Serialize, Deserialize)]
struct SnapshotFile {
    format: String,
    input_dim: usize,
    hidden_dim: usize,
    selected_epoch: usize,
    config: EvaluatorConfig,
    feat_mean: String,
    feat_std: String,
    params: String,
}

fn encode_f64s(values: &[f64]) -> String {
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

fn decode_f64s(field: &str, text: &str, expected: usize) -> Result<Vec<f64>, EvalError> {
    let bytes = STANDARD
        .decode(text)
        .map_err(|e| EvalError::Snapshot(format!("{field}: {e}")))?;
    if bytes.len() != expected * 8 {
        return Err(EvalError::Snapshot(format!(
            "{field}: expected {expected} values, found {} bytes",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

impl Evaluator {
    pub fn to_json(&self) -> String {
        let file = SnapshotFile {
            format: SNAPSHOT_FORMAT.to_string(),
            input_dim: self.input_dim(),
            hidden_dim: self.hidden_dim(),
            selected_epoch: self.selected_epoch,
            config: self.config.clone(),
            feat_mean: encode_f64s(&self.standardizer.mean),
            feat_std: encode_f64s(&self.standardizer.std),
            params: encode_f64s(&self.params.data),
        };
        serde_json::to_string_pretty(&file).expect("snapshot serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        let file: SnapshotFile =
            serde_json::from_str(text).map_err(|e| EvalError::Snapshot(e.to_string()))?;
        if file.format != SNAPSHOT_FORMAT {
            return Err(EvalError::Snapshot(format!("unknown format \"{}\"", file.format)));
        }
        if file.input_dim == 0 || file.hidden_dim == 0 {
            return Err(EvalError::Snapshot("dimensions must be positive".into()));
        }
        let mean = decode_f64s("feat_mean", &file.feat_mean, file.input_dim)?;
        let std = decode_f64s("feat_std", &file.feat_std, file.input_dim)?;
        let data = decode_f64s(
            "params",
            &file.params,
            Params::len_for(file.input_dim, file.hidden_dim),
        )?;
        if std.iter().any(|s| !(*s > 0.0)) {
            return Err(EvalError::Snapshot("feat_std entries must be positive".into()));
        }
        if data.iter().chain(&mean).any(|v| !v.is_finite()) {
            return Err(EvalError::Snapshot("non-finite parameter".into()));
        }
        Ok(Evaluator {
            params: Params {
                input_dim: file.input_dim,
                hidden_dim: file.hidden_dim,
                data,
            },
            standardizer: Standardizer { mean, std },
            config: file.config,
            selected_epoch: file.selected_epoch,
        })
    }
}

pub fn save_snapshot(evaluator: &Evaluator, path: &Path) -> Result<(), EvalError> {
    fs::write(path, evaluator.to_json())?;
    Ok(())
}

pub fn load_snapshot(path: &Path) -> Result<Evaluator, EvalError> {
    Evaluator::from_json(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluator::train;
    use crate::reptensor::FeatureVector;

    #[test]
    fn round_trip_predicts_identically() {
        let xs: Vec<FeatureVector> = (0..10)
            .map(|i| FeatureVector(vec![i as f64 * 0.3, (i * i) as f64 * 0.01, 1.0 / (i + 1) as f64]))
            .collect();
        let ys: Vec<f64> = (0..10).map(|i| 3.0 + 0.4 * i as f64).collect();
        let config = EvaluatorConfig {
            hidden_dim: 8,
            epochs: 5,
            ..EvaluatorConfig::default()
        };
        let (ev, _) = train(&xs, &ys, &config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_snapshot(&ev, &path).unwrap();
        let back = load_snapshot(&path).unwrap();
        assert_eq!(back, ev);
        for x in &xs {
            assert_eq!(
                back.predict(x.values()).unwrap().to_bits(),
                ev.predict(x.values()).unwrap().to_bits()
            );
        }
    }

    #[test]
    fn rejects_wrong_lengths() {
        let ev = Evaluator::constant(2, 3, 1.0);
        let mut v: serde_json::Value = serde_json::from_str(&ev.to_json()).unwrap();
        v["hidden_dim"] = 4.into();
        assert!(matches!(
            Evaluator::from_json(&v.to_string()),
            Err(EvalError::Snapshot(_))
        ));
    }
}
