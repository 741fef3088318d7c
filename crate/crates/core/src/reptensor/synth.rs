//! Planted-signal corpora for testing layer selection and training.
//!
//! Every layer of every manuscript holds one i.i.d. standard-normal vector
//! labelled `"last"`. Only the informative layer feeds the score:
//! `5 + 2·tanh(w·x) + ε`, clipped to `[1, 10]`, with `w` a unit vector.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::{LayerIndex, RepError, RepTensor};
use crate::corpus::{Corpus, Manuscript};

pub const SYNTH_CRITERION: &str = "overall_quality";
pub const SYNTH_MODEL: &str = "synthetic";
const REVIEWS_PER_PAPER: usize = 3;
const REVIEW_NOISE_STD: f64 = 0.25;
const DOMAINS: [&str; 4] = ["Theory", "Applications", "Optimization", "Generative Models"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub num_papers: usize,
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub informative_layer: LayerIndex,
    pub noise_std: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub corpus: Corpus,
    pub reps: BTreeMap<String, RepTensor>,
    /// Unit-norm planted direction.
    pub weights: Vec<f64>,
    /// Noise-added, clipped scores before reviewer noise, keyed by id.
    pub true_scores: BTreeMap<String, f64>,
}

fn round_to_half(x: f64) -> f64 {
    (x * 2.0).round() / 2.0
}

pub fn synth_corpus(config: &SynthConfig) -> Result<SynthCorpus, RepError> {
    if config.num_papers < 4 {
        return Err(RepError::Invalid(format!(
            "synthetic corpus needs at least 4 papers, got {}",
            config.num_papers
        )));
    }
    if !(config.noise_std >= 0.0) || !config.noise_std.is_finite() {
        return Err(RepError::Invalid(format!("noise_std must be >= 0, got {}", config.noise_std)));
    }
    if config.hidden_dim == 0 {
        return Err(RepError::Invalid("hidden_dim must be positive".into()));
    }
    let informative = config.informative_layer.resolve(config.num_layers)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut weights: Vec<f64> = (0..config.hidden_dim)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let norm = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
    weights.iter_mut().for_each(|w| *w /= norm);

    let score_noise = Normal::new(0.0, config.noise_std).expect("finite std");
    let review_noise = Normal::new(0.0, REVIEW_NOISE_STD).expect("finite std");

    let mut manuscripts = Vec::with_capacity(config.num_papers);
    let mut reps = BTreeMap::new();
    let mut true_scores = BTreeMap::new();
    for i in 0..config.num_papers {
        let id = format!("p{i:04}");
        let data: Vec<f32> = (0..config.num_layers * config.hidden_dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z as f32
            })
            .collect();
        let x = &data[informative * config.hidden_dim..(informative + 1) * config.hidden_dim];
        let projection: f64 = x.iter().zip(&weights).map(|(&a, w)| f64::from(a) * w).sum();
        let eps = if config.noise_std > 0.0 {
            score_noise.sample(&mut rng)
        } else {
            0.0
        };
        let score = (5.0 + 2.0 * projection.tanh() + eps).clamp(1.0, 10.0);
        let reviews: Vec<f64> = (0..REVIEWS_PER_PAPER)
            .map(|_| round_to_half(score + review_noise.sample(&mut rng)))
            .collect();

        manuscripts.push(Manuscript {
            id: id.clone(),
            title: format!("Synthetic manuscript {i}"),
            abstract_text: format!("Synthetic abstract for manuscript {i}."),
            sections: Vec::new(),
            reviews: BTreeMap::from([(SYNTH_CRITERION.to_string(), reviews)]),
            domain: Some(DOMAINS[i % DOMAINS.len()].to_string()),
        });
        reps.insert(
            id.clone(),
            RepTensor::new(
                id.clone(),
                SYNTH_MODEL,
                config.num_layers,
                config.hidden_dim,
                vec!["last".to_string()],
                data,
            )?,
        );
        true_scores.insert(id, score);
    }

    let corpus = Corpus::new(manuscripts)
        .map_err(|e| RepError::Invalid(format!("generated corpus failed validation: {e}")))?;
    Ok(SynthCorpus {
        corpus,
        reps,
        weights,
        true_scores,
    })
}
