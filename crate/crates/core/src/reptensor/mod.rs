//! Per-manuscript hidden-state tensors: the `.idrp` file format, layer
//! indexing, token selection and a planted-signal synthetic generator.

mod format;
mod select;
mod synth;

pub use format::{read_reps, write_reps, decode, encode, FORMAT_VERSION, MAGIC};
pub use select::{select_layer, select_tokens, FeatureVector, LayerSlice, TokenStrategy};
pub use synth::{synth_corpus, SynthConfig, SynthCorpus, SYNTH_CRITERION, SYNTH_MODEL};

use std::collections::HashSet;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RepError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic {0:?}, expected \"IDRP\"")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),
    #[error("unsupported header flags {0:#06x}")]
    UnsupportedFlags(u16),
    #[error("truncated file: needed {needed} bytes for {what}, {available} available")]
    Truncated {
        what: &'static str,
        needed: u64,
        available: u64,
    },
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("invalid tensor: {0}")]
    Invalid(String),
    #[error("layer {index} out of range for a {num_layers}-layer tensor")]
    LayerOutOfRange { index: i32, num_layers: usize },
    #[error("missing vector label \"{0}\"")]
    MissingLabel(String),
    #[error("invalid token strategy \"{0}\"")]
    BadStrategy(String),
}

/// Hidden states of one manuscript: `num_layers` transformer-block outputs,
/// each holding `num_vectors` kept token vectors of width `hidden_dim`.
///
/// `data` is layer-major: `[layer][vector][dim]`, with layer 0 the first block.
#[derive(Debug, Clone, PartialEq)]
pub struct RepTensor {
    pub manuscript_id: String,
    pub model_name: String,
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub num_vectors: usize,
    pub vector_labels: Vec<String>,
    pub data: Vec<f32>,
}

impl RepTensor {
    pub fn new(
        manuscript_id: impl Into<String>,
        model_name: impl Into<String>,
        num_layers: usize,
        hidden_dim: usize,
        vector_labels: Vec<String>,
        data: Vec<f32>,
    ) -> Result<Self, RepError> {
        let t = RepTensor {
            manuscript_id: manuscript_id.into(),
            model_name: model_name.into(),
            num_layers,
            hidden_dim,
            num_vectors: vector_labels.len(),
            vector_labels,
            data,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<(), RepError> {
        if self.num_layers == 0 || self.hidden_dim == 0 || self.num_vectors == 0 {
            return Err(RepError::Invalid(format!(
                "dimensions must be positive (L={}, m={}, v={})",
                self.num_layers, self.hidden_dim, self.num_vectors
            )));
        }
        if self.vector_labels.len() != self.num_vectors {
            return Err(RepError::Invalid(format!(
                "{} labels for {} vectors",
                self.vector_labels.len(),
                self.num_vectors
            )));
        }
        let mut seen = HashSet::new();
        for label in &self.vector_labels {
            if !seen.insert(label.as_str()) {
                return Err(RepError::Invalid(format!("duplicate vector label \"{label}\"")));
            }
        }
        let expected = self.num_layers * self.num_vectors * self.hidden_dim;
        if self.data.len() != expected {
            return Err(RepError::LengthMismatch(format!(
                "data holds {} values, L·v·m = {expected}",
                self.data.len()
            )));
        }
        Ok(())
    }

    pub fn layer_stride(&self) -> usize {
        self.num_vectors * self.hidden_dim
    }
}

/// Layer position counted from the end: -1 is the final block output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i32", into = "i32")]
pub struct LayerIndex(i32);

impl LayerIndex {
    pub fn new(index: i32) -> Result<Self, RepError> {
        if index >= 0 {
            return Err(RepError::LayerOutOfRange {
                index,
                num_layers: 0,
            });
        }
        Ok(LayerIndex(index))
    }

    pub fn get(self) -> i32 {
        self.0
    }

    /// Zero-based block position for a tensor with `num_layers` blocks.
    pub fn resolve(self, num_layers: usize) -> Result<usize, RepError> {
        let depth = self.0.unsigned_abs() as usize;
        if depth > num_layers {
            return Err(RepError::LayerOutOfRange {
                index: self.0,
                num_layers,
            });
        }
        Ok(num_layers - depth)
    }

    /// All indices `-1, -2, ..., -num_layers`.
    pub fn all(num_layers: usize) -> Vec<LayerIndex> {
        (1..=num_layers as i32).map(|k| LayerIndex(-k)).collect()
    }
}

impl TryFrom<i32> for LayerIndex {
    type Error = RepError;

    fn try_from(value: i32) -> Result<Self, Self::Error> {
        LayerIndex::new(value)
    }
}

impl From<LayerIndex> for i32 {
    fn from(l: LayerIndex) -> i32 {
        l.0
    }
}

impl fmt::Display for LayerIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}
