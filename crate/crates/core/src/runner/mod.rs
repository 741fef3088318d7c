//! Config-driven sweeps over training ratio × layer × seed, and the report
//! they produce.

mod config;
mod emit;
mod validate;

pub use config::{ExperimentConfig, GridSettings, LayerSpec};
pub use emit::{emit_report, format_ratio, render_layer_svg, EMITTED_CSV};
pub use validate::{validate_setup, verify_reps_dir, Diagnostic};

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{load_manifest, Corpus, CorpusError, Criterion};
use crate::evaluator::{clamp_score, train, EvalError, Evaluator};
use crate::metrics::{
    abs_error_bins, closest_human_corr, domain_stats, human_baseline, score_histogram,
    spearman, CorrResult, DomainRow, ErrorBins, Histogram, HumanBaseline, MetricsError,
};
use crate::partition::{mean_label, sort_by_consistency, split, PartitionError, Split};
use crate::reptensor::{
    read_reps, select_layer, select_tokens, FeatureVector, LayerIndex, RepError, RepTensor,
    TokenStrategy,
};
use crate::stats;

/// Score range used for distribution histograms.
pub const SCORE_RANGE: (f64, f64) = (1.0, 10.0);

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Reps(#[from] RepError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("missing representation files for: {}", .0.join(", "))]
    MissingReps(Vec<String>),
    #[error("dimension mismatch: {0}")]
    DimMismatch(String),
    #[error("invalid experiment config: {0}")]
    Config(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl RunnerError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        RunnerError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Corpus plus one representation tensor per manuscript id.
#[derive(Debug, Clone)]
pub struct ExperimentData {
    pub corpus: Corpus,
    pub reps: BTreeMap<String, RepTensor>,
}

impl ExperimentData {
    /// Loads the manifest, optional TEI sections and `<id>.idrp` for every
    /// manuscript carrying `criterion`.
    pub fn load(config: &ExperimentConfig) -> Result<Self, RunnerError> {
        let mut corpus = load_manifest(&config.manifest)?;
        if let Some(dir) = &config.tei_dir {
            corpus.attach_tei_sections(dir)?;
        }
        let criterion = config.grid.criterion();
        let mut reps = BTreeMap::new();
        let mut missing = Vec::new();
        for m in corpus.eligible(&criterion) {
            let path = config.reps_dir.join(format!("{}.idrp", m.id));
            if !path.exists() {
                missing.push(m.id.clone());
                continue;
            }
            reps.insert(m.id.clone(), read_reps(&path)?);
        }
        if !missing.is_empty() {
            return Err(RunnerError::MissingReps(missing));
        }
        Ok(ExperimentData { corpus, reps })
    }
}

impl From<crate::reptensor::SynthCorpus> for ExperimentData {
    fn from(s: crate::reptensor::SynthCorpus) -> Self {
        ExperimentData {
            corpus: s.corpus,
            reps: s.reps,
        }
    }
}

/// Outcome of training and testing one evaluator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub ratio: f64,
    pub layer: LayerIndex,
    pub seed: u64,
    /// `None` when predictions are constant on the test set.
    pub test_rho: Option<f64>,
    pub test_pvalue: Option<f64>,
    pub selected_epoch: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Test-set predictions in split order.
    #[serde(skip)]
    pub predictions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub ratio: f64,
    pub layer: LayerIndex,
    /// Mean of the defined seed correlations.
    pub mean_rho: Option<f64>,
    pub seeds: usize,
    pub defined_seeds: usize,
}

/// Metrics at the best layer of one ratio, computed on seed-averaged
/// test predictions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsBundle {
    pub ratio: f64,
    pub layer: LayerIndex,
    pub ensemble: Option<CorrResult>,
    pub closest_human: Option<CorrResult>,
    pub human_baseline: Option<HumanBaseline>,
    pub error_bins: ErrorBins,
    pub human_hist: Histogram,
    pub predicted_hist: Histogram,
    pub domains: Vec<DomainRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub criterion: Criterion,
    pub strategy: TokenStrategy,
    pub num_layers: usize,
    /// Grid cells ordered by ratio, then layer, then seed, as configured.
    pub cells: Vec<CellResult>,
    pub summary: Vec<CellSummary>,
    /// Best layer per ratio, in ratio order; `None` when no layer had a
    /// defined correlation.
    pub best_layers: Vec<(f64, Option<LayerIndex>)>,
    pub bundles: Vec<MetricsBundle>,
}

impl Report {
    pub fn summary_for(&self, ratio: f64, layer: LayerIndex) -> Option<&CellSummary> {
        self.summary
            .iter()
            .find(|s| s.ratio == ratio && s.layer == layer)
    }

    pub fn best_layer(&self, ratio: f64) -> Option<LayerIndex> {
        self.best_layers
            .iter()
            .find(|(r, _)| *r == ratio)
            .and_then(|(_, l)| *l)
    }

    pub fn bundle(&self, ratio: f64) -> Option<&MetricsBundle> {
        self.bundles.iter().find(|b| b.ratio == ratio)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, RunnerError> {
        serde_json::from_str(text).map_err(|e| RunnerError::Config(format!("report JSON: {e}")))
    }
}

/// Highest mean rho; ties go to the deeper (more negative) layer.
pub fn best_layer(summaries: &[&CellSummary]) -> Option<LayerIndex> {
    let mut best: Option<(LayerIndex, f64)> = None;
    for s in summaries {
        let Some(rho) = s.mean_rho else { continue };
        best = match best {
            Some((l, b)) if rho < b || (rho == b && l < s.layer) => Some((l, b)),
            _ => Some((s.layer, rho)),
        };
    }
    best.map(|(l, _)| l)
}

/// Common `(L, m)` across all tensors.
pub fn common_shape(reps: &BTreeMap<String, RepTensor>) -> Result<(usize, usize), RunnerError> {
    let mut shape: Option<(&str, usize, usize)> = None;
    for (id, t) in reps {
        match shape {
            None => shape = Some((id, t.num_layers, t.hidden_dim)),
            Some((first, l, m)) if (l, m) != (t.num_layers, t.hidden_dim) => {
                return Err(RunnerError::DimMismatch(format!(
                    "\"{first}\" has L={l}, m={m} but \"{id}\" has L={}, m={}",
                    t.num_layers, t.hidden_dim
                )));
            }
            _ => {}
        }
    }
    shape
        .map(|(_, l, m)| (l, m))
        .ok_or_else(|| RunnerError::Config("no representation tensors".into()))
}

struct Prepared<'a> {
    data: &'a ExperimentData,
    settings: &'a GridSettings,
    criterion: Criterion,
    layers: Vec<LayerIndex>,
    num_layers: usize,
    /// Per layer: features keyed by manuscript id.
    features: Vec<HashMap<String, FeatureVector>>,
    labels: HashMap<String, f64>,
    splits: Vec<Split>,
}

impl<'a> Prepared<'a> {
    fn new(data: &'a ExperimentData, settings: &'a GridSettings) -> Result<Self, RunnerError> {
        settings.check()?;
        let criterion = settings.criterion();
        let ordered = sort_by_consistency(&data.corpus, &criterion)?;

        let missing: Vec<String> = ordered
            .iter()
            .filter(|id| !data.reps.contains_key(*id))
            .cloned()
            .collect();
        if !missing.is_empty() {
            return Err(RunnerError::MissingReps(missing));
        }
        let eligible: BTreeMap<String, RepTensor> = ordered
            .iter()
            .map(|id| (id.clone(), data.reps[id].clone()))
            .collect();
        let (num_layers, _) = common_shape(&eligible)?;
        let layers = settings.layers.resolve(num_layers)?;

        let mut features = Vec::with_capacity(layers.len());
        for &layer in &layers {
            let mut per_layer = HashMap::with_capacity(ordered.len());
            let mut dim: Option<(&str, usize)> = None;
            for id in &ordered {
                let t = &eligible[id];
                let f = select_tokens(select_layer(t, layer)?, &t.vector_labels, settings.strategy)
                    .map_err(|e| match e {
                        RepError::MissingLabel(l) => RunnerError::Reps(RepError::MissingLabel(
                            format!("{l} (manuscript \"{id}\")"),
                        )),
                        other => other.into(),
                    })?;
                match dim {
                    None => dim = Some((id, f.dim())),
                    Some((first, d)) if d != f.dim() => {
                        return Err(RunnerError::DimMismatch(format!(
                            "{} features: \"{first}\" has {d} values, \"{id}\" has {}",
                            settings.strategy,
                            f.dim()
                        )));
                    }
                    _ => {}
                }
                per_layer.insert(id.clone(), f);
            }
            features.push(per_layer);
        }

        let mut labels = HashMap::with_capacity(ordered.len());
        for id in &ordered {
            let m = data.corpus.get(id).expect("ordered ids come from the corpus");
            labels.insert(id.clone(), mean_label(m, &criterion)?);
        }
        let splits = settings
            .ratios
            .iter()
            .map(|&r| split(&ordered, r, &criterion))
            .collect::<Result<Vec<_>, _>>()?;

        Ok(Prepared {
            data,
            settings,
            criterion,
            layers,
            num_layers,
            features,
            labels,
            splits,
        })
    }

    fn run_cell(&self, ratio_idx: usize, layer_idx: usize, seed: u64) -> Result<CellResult, RunnerError> {
        self.fit_cell(ratio_idx, layer_idx, seed).map(|(cell, _)| cell)
    }

    fn fit_cell(
        &self,
        ratio_idx: usize,
        layer_idx: usize,
        seed: u64,
    ) -> Result<(CellResult, Evaluator), RunnerError> {
        let split = &self.splits[ratio_idx];
        let feats = &self.features[layer_idx];
        let gather = |ids: &[String]| -> (Vec<FeatureVector>, Vec<f64>) {
            ids.iter()
                .map(|id| (feats[id].clone(), self.labels[id]))
                .unzip()
        };
        let (train_x, train_y) = gather(&split.train_ids);
        let (test_x, test_y) = gather(&split.test_ids);
        let config = crate::evaluator::EvaluatorConfig {
            seed,
            ..self.settings.evaluator.clone()
        };
        let (evaluator, history) = train(&train_x, &train_y, &config)?;
        let mut predictions = evaluator.predict_many(&test_x)?;
        if self.settings.clamp {
            predictions.iter_mut().for_each(|p| *p = clamp_score(*p));
        }
        let corr = spearman(&predictions, &test_y).ok();
        let cell = CellResult {
            ratio: split.train_ratio,
            layer: self.layers[layer_idx],
            seed,
            test_rho: corr.map(|c| c.rho),
            test_pvalue: corr.map(|c| c.pvalue),
            selected_epoch: history.selected_epoch,
            n_train: train_x.len(),
            n_test: test_x.len(),
            predictions,
        };
        Ok((cell, evaluator))
    }

    fn bundle(
        &self,
        ratio_idx: usize,
        layer: LayerIndex,
        cells: &[CellResult],
    ) -> Result<MetricsBundle, RunnerError> {
        let split = &self.splits[ratio_idx];
        let chosen: Vec<&CellResult> = cells
            .iter()
            .filter(|c| c.ratio == split.train_ratio && c.layer == layer)
            .collect();
        let n = split.test_ids.len();
        let mut preds = vec![0.0; n];
        for c in &chosen {
            for (p, q) in preds.iter_mut().zip(&c.predictions) {
                *p += q;
            }
        }
        preds.iter_mut().for_each(|p| *p /= chosen.len() as f64);
        let labels: Vec<f64> = split.test_ids.iter().map(|id| self.labels[id]).collect();
        let domains: Vec<Option<String>> = split
            .test_ids
            .iter()
            .map(|id| self.data.corpus.get(id).and_then(|m| m.domain.clone()))
            .collect();
        let by_id: BTreeMap<String, f64> = split.test_ids.iter().cloned().zip(preds.iter().copied()).collect();
        let test_corpus = Corpus::new(
            split
                .test_ids
                .iter()
                .filter_map(|id| self.data.corpus.get(id).cloned())
                .collect(),
        )?;
        let (lo, hi) = SCORE_RANGE;
        let width = self.settings.hist_bin_width;
        Ok(MetricsBundle {
            ratio: split.train_ratio,
            layer,
            ensemble: spearman(&preds, &labels).ok(),
            closest_human: closest_human_corr(&by_id, &self.data.corpus, &self.criterion).ok(),
            human_baseline: human_baseline(
                &test_corpus,
                &self.criterion,
                self.settings.baseline_trials,
                self.settings.baseline_seed,
            )
            .ok()
            .filter(|h| h.defined_trials > 0),
            error_bins: abs_error_bins(&preds, &labels)?,
            human_hist: score_histogram(&labels, width, lo, hi),
            predicted_hist: score_histogram(&preds, width, lo, hi),
            domains: domain_stats(&preds, &labels, &domains)?,
        })
    }
}

/// Runs the full grid over in-memory data.
pub fn run_grid(data: &ExperimentData, settings: &GridSettings) -> Result<Report, RunnerError> {
    let prepared = Prepared::new(data, settings)?;
    let jobs: Vec<(usize, usize, u64)> = (0..settings.ratios.len())
        .flat_map(|r| {
            (0..prepared.layers.len())
                .flat_map(move |l| settings.seeds.iter().map(move |&s| (r, l, s)))
        })
        .collect();

    let run_all = || -> Result<Vec<CellResult>, RunnerError> {
        jobs.par_iter()
            .map(|&(r, l, s)| prepared.run_cell(r, l, s))
            .collect()
    };
    let cells = if settings.jobs <= 1 {
        jobs.iter()
            .map(|&(r, l, s)| prepared.run_cell(r, l, s))
            .collect::<Result<Vec<_>, _>>()?
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(settings.jobs)
            .build()
            .map_err(|e| RunnerError::Config(format!("thread pool: {e}")))?
            .install(run_all)?
    };

    let mut summary = Vec::new();
    for &ratio in &settings.ratios {
        for &layer in &prepared.layers {
            let rhos: Vec<f64> = cells
                .iter()
                .filter(|c| c.ratio == ratio && c.layer == layer)
                .filter_map(|c| c.test_rho)
                .collect();
            summary.push(CellSummary {
                ratio,
                layer,
                mean_rho: (!rhos.is_empty()).then(|| stats::mean(&rhos)),
                seeds: settings.seeds.len(),
                defined_seeds: rhos.len(),
            });
        }
    }

    let mut best_layers = Vec::new();
    let mut bundles = Vec::new();
    for (ri, &ratio) in settings.ratios.iter().enumerate() {
        let rows: Vec<&CellSummary> = summary.iter().filter(|s| s.ratio == ratio).collect();
        let best = best_layer(&rows);
        if let Some(layer) = best {
            bundles.push(prepared.bundle(ri, layer, &cells)?);
        }
        best_layers.push((ratio, best));
    }

    Ok(Report {
        criterion: prepared.criterion.clone(),
        strategy: settings.strategy,
        num_layers: prepared.num_layers,
        cells,
        summary,
        best_layers,
        bundles,
    })
}

/// Trains one evaluator at the first ratio, first layer and first seed of
/// `settings`, returning it with its test-set outcome and the split used.
pub fn train_single(
    data: &ExperimentData,
    settings: &GridSettings,
) -> Result<(Evaluator, CellResult, Split), RunnerError> {
    let prepared = Prepared::new(data, settings)?;
    let (cell, evaluator) = prepared.fit_cell(0, 0, settings.seeds[0])?;
    Ok((evaluator, cell, prepared.splits[0].clone()))
}

/// Loads inputs named by `config` and runs its grid.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Report, RunnerError> {
    let data = ExperimentData::load(config)?;
    run_grid(&data, &config.grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn summary(layer: i32, rho: Option<f64>) -> CellSummary {
        CellSummary {
            ratio: 0.3,
            layer: LayerIndex::new(layer).unwrap(),
            mean_rho: rho,
            seeds: 3,
            defined_seeds: rho.map_or(0, |_| 3),
        }
    }

    fn small_synth() -> ExperimentData {
        crate::reptensor::synth_corpus(&crate::reptensor::SynthConfig {
            num_papers: 40,
            num_layers: 3,
            hidden_dim: 6,
            informative_layer: LayerIndex::new(-2).unwrap(),
            noise_std: 0.1,
            seed: 3,
        })
        .unwrap()
        .into()
    }

    fn small_settings() -> GridSettings {
        let mut g = GridSettings::new(crate::reptensor::SYNTH_CRITERION);
        g.ratios = vec![0.3, 0.5];
        g.seeds = vec![0, 1];
        g.evaluator.hidden_dim = 32;
        g.evaluator.epochs = 5;
        g.baseline_trials = 50;
        g
    }

    #[test]
    fn grid_shape_and_order() {
        let report = run_grid(&small_synth(), &small_settings()).unwrap();
        assert_eq!(report.cells.len(), 2 * 3 * 2);
        assert_eq!(report.summary.len(), 2 * 3);
        assert_eq!(report.num_layers, 3);
        let keys: Vec<(f64, i32, u64)> = report
            .cells
            .iter()
            .map(|c| (c.ratio, c.layer.get(), c.seed))
            .collect();
        assert_eq!(keys[0], (0.3, -1, 0));
        assert_eq!(keys[1], (0.3, -1, 1));
        assert_eq!(keys[2], (0.3, -2, 0));
        assert_eq!(keys[11], (0.5, -3, 1));
        for c in &report.cells {
            assert_eq!(c.n_train + c.n_test, 40);
            assert_eq!(c.predictions.len(), c.n_test);
        }
        for s in &report.summary {
            let rhos: Vec<f64> = report
                .cells
                .iter()
                .filter(|c| c.ratio == s.ratio && c.layer == s.layer)
                .filter_map(|c| c.test_rho)
                .collect();
            assert_eq!(s.mean_rho, Some(rhos.iter().sum::<f64>() / rhos.len() as f64));
        }
        assert_eq!(report.bundles.len(), 2);
        let b = &report.bundles[0];
        assert_eq!(b.error_bins.counts.iter().sum::<usize>(), 28);
        assert_eq!(b.human_hist.total, 28);
        assert_eq!(b.domains.iter().map(|d| d.count).sum::<usize>(), 28);
    }

    #[test]
    fn parallel_matches_serial() {
        let data = small_synth();
        let mut settings = small_settings();
        let serial = run_grid(&data, &settings).unwrap();
        settings.jobs = 3;
        let parallel = run_grid(&data, &settings).unwrap();
        assert_eq!(serial.to_json(), parallel.to_json());
        for (a, b) in serial.cells.iter().zip(&parallel.cells) {
            assert_eq!(a.predictions, b.predictions);
        }
    }

    #[test]
    fn missing_reps_named() {
        let mut data = small_synth();
        data.reps.remove("p0007");
        match run_grid(&data, &small_settings()) {
            Err(RunnerError::MissingReps(ids)) => assert_eq!(ids, vec!["p0007".to_string()]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_label_named() {
        let mut settings = small_settings();
        settings.strategy = TokenStrategy::FirstCls;
        let err = run_grid(&small_synth(), &settings).unwrap_err().to_string();
        assert!(err.contains("cls"), "{err}");
    }

    #[test]
    fn layer_out_of_range_rejected() {
        let mut settings = small_settings();
        settings.layers = LayerSpec::List(vec![LayerIndex::new(-4).unwrap()]);
        assert!(matches!(
            run_grid(&small_synth(), &settings),
            Err(RunnerError::Reps(RepError::LayerOutOfRange { .. }))
        ));
    }

    #[test]
    fn report_json_reemits_identically() {
        let report = run_grid(&small_synth(), &small_settings()).unwrap();
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        emit_report(&report, a.path()).unwrap();
        let back = Report::from_json(&report.to_json()).unwrap();
        emit_report(&back, b.path()).unwrap();
        for name in EMITTED_CSV.iter().chain(&["layers_0.3.svg", "layers_0.5.svg", "report.json"]) {
            let x = std::fs::read(a.path().join(name)).unwrap();
            let y = std::fs::read(b.path().join(name)).unwrap();
            assert!(!x.is_empty());
            assert_eq!(x, y, "{name}");
        }
    }

    #[test]
    fn best_layer_prefers_higher_then_deeper() {
        let rows = [summary(-1, Some(0.2)), summary(-2, Some(0.5)), summary(-3, Some(0.5)), summary(-4, None)];
        let refs: Vec<&CellSummary> = rows.iter().collect();
        assert_eq!(best_layer(&refs), Some(LayerIndex::new(-3).unwrap()));
        let none = [summary(-1, None)];
        assert_eq!(best_layer(&none.iter().collect::<Vec<_>>()), None);
    }
}
