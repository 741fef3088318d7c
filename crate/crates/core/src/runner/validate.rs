use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::ExperimentConfig;
use crate::corpus::load_manifest;
use crate::reptensor::{read_reps, select_layer, select_tokens, LayerIndex, RepTensor};

/// One problem found before running anything.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    /// Short machine-readable category, e.g. `missing_reps`.
    pub code: &'static str,
    /// The manuscript or file concerned, if any.
    pub subject: Option<String>,
    pub message: String,
}

impl Diagnostic {
    fn new(code: &'static str, subject: Option<&str>, message: impl Into<String>) -> Self {
        Diagnostic {
            code,
            subject: subject.map(str::to_string),
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.subject {
            Some(s) => write!(f, "[{}] {}: {}", self.code, s, self.message),
            None => write!(f, "[{}] {}", self.code, self.message),
        }
    }
}

/// Checks a config against its inputs without training. An empty result
/// means `run_experiment` has everything it needs.
pub fn validate_setup(config: &ExperimentConfig) -> Vec<Diagnostic> {
    let mut out: Vec<Diagnostic> = config
        .grid
        .problems()
        .into_iter()
        .map(|p| Diagnostic::new("config", None, p))
        .collect();

    let mut corpus = match load_manifest(&config.manifest) {
        Ok(c) => c,
        Err(e) => {
            out.push(Diagnostic::new(
                "manifest",
                Some(&config.manifest.display().to_string()),
                e.to_string(),
            ));
            return out;
        }
    };
    if let Some(dir) = &config.tei_dir {
        if !dir.is_dir() {
            out.push(Diagnostic::new(
                "tei_dir",
                Some(&dir.display().to_string()),
                "TEI directory does not exist",
            ));
        } else if let Err(e) = corpus.attach_tei_sections(dir) {
            out.push(Diagnostic::new("tei", None, e.to_string()));
        }
    }

    let criterion = config.grid.criterion();
    let eligible: Vec<String> = corpus.eligible(&criterion).map(|m| m.id.clone()).collect();
    if eligible.is_empty() {
        let known: Vec<String> = corpus.criteria().iter().map(|c| c.to_string()).collect();
        out.push(Diagnostic::new(
            "criterion",
            Some(&criterion.to_string()),
            format!(
                "no manuscript carries this criterion (available: {})",
                if known.is_empty() { "none".to_string() } else { known.join(", ") }
            ),
        ));
        return out;
    }
    for &ratio in &config.grid.ratios {
        let n = eligible.len();
        let train = crate::partition::train_size(n, ratio);
        if ratio > 0.0 && ratio < 1.0 && train >= n {
            out.push(Diagnostic::new(
                "ratio",
                None,
                format!("ratio {ratio} leaves no test papers among {n} eligible manuscripts"),
            ));
        }
    }

    let mut tensors: BTreeMap<String, RepTensor> = BTreeMap::new();
    for id in &eligible {
        let path = config.reps_dir.join(format!("{id}.idrp"));
        if !path.exists() {
            out.push(Diagnostic::new(
                "missing_reps",
                Some(id),
                format!("no representation file at {}", path.display()),
            ));
            continue;
        }
        match read_reps(&path) {
            Ok(t) => {
                if t.manuscript_id != *id {
                    out.push(Diagnostic::new(
                        "reps_id",
                        Some(id),
                        format!("file holds manuscript \"{}\"", t.manuscript_id),
                    ));
                }
                tensors.insert(id.clone(), t);
            }
            Err(e) => out.push(Diagnostic::new("bad_reps", Some(id), e.to_string())),
        }
    }
    out.extend(check_tensors(&tensors, config));
    out
}

fn check_tensors(tensors: &BTreeMap<String, RepTensor>, config: &ExperimentConfig) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let Some((first_id, first)) = tensors.iter().next() else {
        return out;
    };
    let mut shape_ok = true;
    for (id, t) in tensors {
        if (t.num_layers, t.hidden_dim) != (first.num_layers, first.hidden_dim) {
            shape_ok = false;
            out.push(Diagnostic::new(
                "dims",
                Some(id),
                format!(
                    "L={}, m={} differs from \"{first_id}\" (L={}, m={})",
                    t.num_layers, t.hidden_dim, first.num_layers, first.hidden_dim
                ),
            ));
        }
        if t.model_name != first.model_name {
            out.push(Diagnostic::new(
                "model",
                Some(id),
                format!(
                    "model \"{}\" differs from \"{}\" used by \"{first_id}\"",
                    t.model_name, first.model_name
                ),
            ));
        }
    }
    if !shape_ok {
        return out;
    }
    let layers = match config.grid.layers.resolve(first.num_layers) {
        Ok(l) => l,
        Err(e) => {
            out.push(Diagnostic::new("layers", None, e.to_string()));
            return out;
        }
    };
    let probe = layers.first().copied().unwrap_or_else(|| LayerIndex::new(-1).expect("-1 is valid"));
    let strategy = config.grid.strategy;
    let mut dims: Option<(&str, usize)> = None;
    for (id, t) in tensors {
        let feature = select_layer(t, probe).and_then(|s| select_tokens(s, &t.vector_labels, strategy));
        match feature {
            Ok(f) => match dims {
                None => dims = Some((id, f.dim())),
                Some((other, d)) if d != f.dim() => out.push(Diagnostic::new(
                    "feature_dims",
                    Some(id),
                    format!(
                        "strategy {strategy} gives {} values but \"{other}\" gives {d}",
                        f.dim()
                    ),
                )),
                _ => {}
            },
            Err(e) => out.push(Diagnostic::new(
                "labels",
                Some(id),
                format!("strategy {strategy}: {e}"),
            )),
        }
    }
    out
}

/// Checks every `.idrp` file in `dir`: it decodes, its manuscript id
/// matches the file stem, and all files share `(L, m)` and model name.
pub fn verify_reps_dir(dir: &Path) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let entries = match fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) => {
            out.push(Diagnostic::new("io", Some(&dir.display().to_string()), e.to_string()));
            return out;
        }
    };
    let mut paths: Vec<_> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "idrp"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        out.push(Diagnostic::new(
            "empty",
            Some(&dir.display().to_string()),
            "no .idrp files found",
        ));
        return out;
    }
    let mut first: Option<(String, usize, usize, String)> = None;
    for path in paths {
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let t = match read_reps(&path) {
            Ok(t) => t,
            Err(e) => {
                out.push(Diagnostic::new("bad_reps", Some(&stem), e.to_string()));
                continue;
            }
        };
        if t.manuscript_id != stem {
            out.push(Diagnostic::new(
                "reps_id",
                Some(&stem),
                format!("file holds manuscript \"{}\"", t.manuscript_id),
            ));
        }
        match &first {
            None => first = Some((stem, t.num_layers, t.hidden_dim, t.model_name.clone())),
            Some((fid, l, m, model)) => {
                if (t.num_layers, t.hidden_dim) != (*l, *m) {
                    out.push(Diagnostic::new(
                        "dims",
                        Some(&stem),
                        format!(
                            "L={}, m={} differs from \"{fid}\" (L={l}, m={m})",
                            t.num_layers, t.hidden_dim
                        ),
                    ));
                }
                if t.model_name != *model {
                    out.push(Diagnostic::new(
                        "model",
                        Some(&stem),
                        format!("model \"{}\" differs from \"{model}\"", t.model_name),
                    ));
                }
            }
        }
    }
    out
}
