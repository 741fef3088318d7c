use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::RunnerError;
use crate::corpus::Criterion;
use crate::evaluator::EvaluatorConfig;
use crate::reptensor::{LayerIndex, TokenStrategy};

/// Layers to sweep: `"all"` or an explicit list of negative indices.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum LayerSpec {
    #[default]
    All,
    List(Vec<LayerIndex>),
}

impl LayerSpec {
    /// `All` expands to `-1, -2, ..., -L`.
    pub fn resolve(&self, num_layers: usize) -> Result<Vec<LayerIndex>, RunnerError> {
        match self {
            LayerSpec::All => Ok(LayerIndex::all(num_layers)),
            LayerSpec::List(list) => {
                for l in list {
                    l.resolve(num_layers)?;
                }
                Ok(list.clone())
            }
        }
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LayerSpec::All => f.write_str("all"),
            LayerSpec::List(l) => {
                let parts: Vec<String> = l.iter().map(|i| i.to_string()).collect();
                f.write_str(&parts.join(","))
            }
        }
    }
}

impl FromStr for LayerSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("all") {
            return Ok(LayerSpec::All);
        }
        let list = s
            .split(',')
            .map(|p| {
                let v: i32 = p.trim().parse().map_err(|_| format!("bad layer index \"{p}\""))?;
                LayerIndex::new(v).map_err(|e| e.to_string())
            })
            .collect::<Result<Vec<_>, _>>()?;
        if list.is_empty() {
            return Err("empty layer list".into());
        }
        Ok(LayerSpec::List(list))
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum LayerSpecRepr {
    Word(String),
    List(Vec<i32>),
}

impl<'de> Deserialize<'de> for LayerSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match LayerSpecRepr::deserialize(d)? {
            LayerSpecRepr::Word(w) => w.parse().map_err(serde::de::Error::custom),
            LayerSpecRepr::List(v) => v
                .into_iter()
                .map(LayerIndex::new)
                .collect::<Result<Vec<_>, _>>()
                .map(LayerSpec::List)
                .map_err(serde::de::Error::custom),
        }
    }
}

impl Serialize for LayerSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            LayerSpec::All => s.serialize_str("all"),
            LayerSpec::List(l) => l.iter().map(|i| i.get()).collect::<Vec<_>>().serialize(s),
        }
    }
}

fn default_ratios() -> Vec<f64> {
    vec![0.3]
}
fn default_seeds() -> Vec<u64> {
    vec![0, 1, 2]
}
fn default_jobs() -> usize {
    1
}
fn default_bin_width() -> f64 {
    0.5
}
fn default_trials() -> usize {
    1000
}

/// Everything that defines a sweep apart from file locations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSettings {
    pub criterion: String,
    #[serde(default = "default_ratios")]
    pub ratios: Vec<f64>,
    #[serde(default)]
    pub layers: LayerSpec,
    #[serde(default)]
    pub strategy: TokenStrategy,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// `seed` here is ignored; each grid seed replaces it.
    #[serde(default)]
    pub evaluator: EvaluatorConfig,
    /// Clip predictions to the score range before metrics.
    #[serde(default)]
    pub clamp: bool,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    #[serde(default = "default_bin_width")]
    pub hist_bin_width: f64,
    #[serde(default = "default_trials")]
    pub baseline_trials: usize,
    #[serde(default)]
    pub baseline_seed: u64,
}

impl GridSettings {
    pub fn new(criterion: impl Into<String>) -> Self {
        GridSettings {
            criterion: criterion.into(),
            ratios: default_ratios(),
            layers: LayerSpec::All,
            strategy: TokenStrategy::default(),
            seeds: default_seeds(),
            evaluator: EvaluatorConfig::default(),
            clamp: false,
            jobs: default_jobs(),
            hist_bin_width: default_bin_width(),
            baseline_trials: default_trials(),
            baseline_seed: 0,
        }
    }

    pub fn criterion(&self) -> Criterion {
        Criterion::from(self.criterion.as_str())
    }

    /// Problems that make the grid meaningless regardless of data.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.criterion.trim().is_empty() {
            out.push("criterion is empty".to_string());
        }
        if self.ratios.is_empty() {
            out.push("no training ratios given".to_string());
        }
        for r in &self.ratios {
            if !(*r > 0.0 && *r < 1.0) {
                out.push(format!("training ratio {r} is outside (0, 1)"));
            }
        }
        for (i, r) in self.ratios.iter().enumerate() {
            if self.ratios[..i].contains(r) {
                out.push(format!("training ratio {r} is listed twice"));
            }
        }
        if self.seeds.is_empty() {
            out.push("no seeds given".to_string());
        }
        if let LayerSpec::List(l) = &self.layers {
            if l.is_empty() {
                out.push("empty layer list".to_string());
            }
        }
        if self.jobs == 0 {
            out.push("jobs must be at least 1".to_string());
        }
        if !(self.hist_bin_width > 0.0 && self.hist_bin_width.is_finite()) {
            out.push(format!("hist_bin_width {} must be positive", self.hist_bin_width));
        }
        if let Err(e) = self.evaluator.validate() {
            out.push(e.to_string());
        }
        out
    }

    pub(crate) fn check(&self) -> Result<(), RunnerError> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(RunnerError::Config(problems.join("; ")))
        }
    }
}

/// A sweep as read from a TOML file.
///
/// ```toml
/// manifest = "data/manifest.jsonl"
/// reps_dir = "data/reps"
/// output_dir = "out"
/// criterion = "overall_quality"
/// ratios = [0.3, 0.5]
/// layers = "all"            # or [-1, -8, -16]
/// strategy = "last"
/// seeds = [0, 1, 2]
///
/// [evaluator]
/// hidden_dim = 1024
/// epochs = 20
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub manifest: PathBuf,
    pub reps_dir: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tei_dir: Option<PathBuf>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(flatten)]
    pub grid: GridSettings,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, RunnerError> {
        toml::from_str(text).map_err(|e| RunnerError::Config(e.to_string()))
    }

    /// Reads a TOML config; relative paths are taken relative to the file.
    pub fn load(path: &Path) -> Result<Self, RunnerError> {
        let text = std::fs::read_to_string(path).map_err(|e| RunnerError::io(path, e))?;
        let mut config = Self::from_toml(&text)?;
        if let Some(base) = path.parent() {
            let fix = |p: &mut PathBuf| {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            };
            fix(&mut config.manifest);
            fix(&mut config.reps_dir);
            fix(&mut config.output_dir);
            if let Some(t) = config.tei_dir.as_mut() {
                fix(t);
            }
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layer_spec_parses() {
        assert_eq!("all".parse::<LayerSpec>().unwrap(), LayerSpec::All);
        let l: LayerSpec = "-1, -3".parse().unwrap();
        assert_eq!(
            l,
            LayerSpec::List(vec![LayerIndex::new(-1).unwrap(), LayerIndex::new(-3).unwrap()])
        );
        assert!("0".parse::<LayerSpec>().is_err());
        assert!("x".parse::<LayerSpec>().is_err());
        assert_eq!(l.resolve(4).unwrap().len(), 2);
        assert!(l.resolve(2).is_err());
        assert_eq!(LayerSpec::All.resolve(3).unwrap().len(), 3);
    }

    #[test]
    fn toml_round_trip_with_defaults() {
        let text = r#"
            manifest = "m.jsonl"
            reps_dir = "reps"
            criterion = "overall_quality"
            layers = [-1, -2]
            strategy = "segment_last:256"

            [evaluator]
            epochs = 5
        "#;
        let c = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(c.grid.seeds, vec![0, 1, 2]);
        assert_eq!(c.grid.ratios, vec![0.3]);
        assert_eq!(c.grid.evaluator.epochs, 5);
        assert_eq!(c.grid.evaluator.hidden_dim, 1024);
        assert_eq!(c.grid.strategy.to_string(), "segment_last:256");
        let back = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = "manifest='m'\nreps_dir='r'\ncriterion='c'\n[evaluator]\nlr=1\n";
        assert!(ExperimentConfig::from_toml(text).is_err());
    }

    #[test]
    fn problems_listed() {
        let mut g = GridSettings::new("c");
        assert!(g.problems().is_empty());
        g.ratios = vec![0.0, 0.5, 0.5];
        g.seeds.clear();
        let p = g.problems();
        assert_eq!(p.len(), 3, "{p:?}");
    }
}
