use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{LayerIndex, RepError, RepTensor};

/// Segment length used by `segment_last` when none is given.
pub const DEFAULT_SEGMENT_LEN: usize = 512;

/// The `v × m` block of one layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerSlice<'a> {
    data: &'a [f32],
    num_vectors: usize,
    hidden_dim: usize,
}

impl<'a> LayerSlice<'a> {
    pub fn new(data: &'a [f32], num_vectors: usize, hidden_dim: usize) -> Self {
        assert_eq!(data.len(), num_vectors * hidden_dim);
        LayerSlice {
            data,
            num_vectors,
            hidden_dim,
        }
    }

    pub fn vector(&self, i: usize) -> &'a [f32] {
        &self.data[i * self.hidden_dim..(i + 1) * self.hidden_dim]
    }

    pub fn as_slice(&self) -> &'a [f32] {
        self.data
    }

    pub fn num_vectors(&self) -> usize {
        self.num_vectors
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }
}

pub fn select_layer(tensor: &RepTensor, layer: LayerIndex) -> Result<LayerSlice<'_>, RepError> {
    let block = layer.resolve(tensor.num_layers)?;
    let stride = tensor.layer_stride();
    Ok(LayerSlice::new(
        &tensor.data[block * stride..(block + 1) * stride],
        tensor.num_vectors,
        tensor.hidden_dim,
    ))
}

/// Which kept token vectors summarize a manuscript.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum TokenStrategy {
    /// The final token (`"last"`).
    #[default]
    Last,
    /// `"middle"` followed by `"last"`.
    MiddlePlusLast,
    /// Every `"sec:*"` vector, in stored order.
    SectionLast,
    /// Every `"seg:*"` vector, in stored order. The length only matters at
    /// extraction time.
    SegmentLast { segment_len: usize },
    /// The first token (`"cls"`).
    FirstCls,
}

impl TokenStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            TokenStrategy::Last => "last",
            TokenStrategy::MiddlePlusLast => "middle_plus_last",
            TokenStrategy::SectionLast => "section_last",
            TokenStrategy::SegmentLast { .. } => "segment_last",
            TokenStrategy::FirstCls => "first_cls",
        }
    }

    /// Indices of the vectors this strategy concatenates, in output order.
    pub fn vector_indices(&self, labels: &[String]) -> Result<Vec<usize>, RepError> {
        let find = |name: &str| {
            labels
                .iter()
                .position(|l| l == name)
                .ok_or_else(|| RepError::MissingLabel(name.to_string()))
        };
        let prefixed = |prefix: &str, missing: &str| {
            let idx: Vec<usize> = labels
                .iter()
                .enumerate()
                .filter(|(_, l)| l.starts_with(prefix))
                .map(|(i, _)| i)
                .collect();
            if idx.is_empty() {
                Err(RepError::MissingLabel(missing.to_string()))
            } else {
                Ok(idx)
            }
        };
        match self {
            TokenStrategy::Last => Ok(vec![find("last")?]),
            TokenStrategy::MiddlePlusLast => Ok(vec![find("middle")?, find("last")?]),
            TokenStrategy::SectionLast => prefixed("sec:", "sec:*"),
            TokenStrategy::SegmentLast { .. } => prefixed("seg:", "seg:*"),
            TokenStrategy::FirstCls => Ok(vec![find("cls")?]),
        }
    }
}

impl fmt::Display for TokenStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenStrategy::SegmentLast { segment_len } => write!(f, "segment_last:{segment_len}"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for TokenStrategy {
    type Err = RepError;

    /// Accepts `last`, `middle_plus_last`, `section_last`, `first_cls`,
    /// `segment_last` and `segment_last:<len>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || RepError::BadStrategy(s.to_string());
        match s.trim() {
            "last" => Ok(TokenStrategy::Last),
            "middle_plus_last" => Ok(TokenStrategy::MiddlePlusLast),
            "section_last" => Ok(TokenStrategy::SectionLast),
            "first_cls" => Ok(TokenStrategy::FirstCls),
            "segment_last" => Ok(TokenStrategy::SegmentLast {
                segment_len: DEFAULT_SEGMENT_LEN,
            }),
            other => {
                let len = other.strip_prefix("segment_last:").ok_or_else(bad)?;
                let segment_len: usize = len.parse().map_err(|_| bad())?;
                if segment_len == 0 {
                    return Err(bad());
                }
                Ok(TokenStrategy::SegmentLast { segment_len })
            }
        }
    }
}

impl Serialize for TokenStrategy {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TokenStrategy {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Concatenated token vectors, widened to `f64` for training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

pub fn select_tokens(
    slice: LayerSlice<'_>,
    labels: &[String],
    strategy: TokenStrategy,
) -> Result<FeatureVector, RepError> {
    if labels.len() != slice.num_vectors() {
        return Err(RepError::LengthMismatch(format!(
            "{} labels for {} vectors",
            labels.len(),
            slice.num_vectors()
        )));
    }
    let indices = strategy.vector_indices(labels)?;
    let mut values = Vec::with_capacity(indices.len() * slice.hidden_dim());
    for i in indices {
        values.extend(slice.vector(i).iter().map(|&x| f64::from(x)));
    }
    Ok(FeatureVector(values))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    fn tensor(num_layers: usize, m: usize, names: &[&str]) -> RepTensor {
        let v = names.len();
        let data = (0..num_layers * v * m).map(|i| i as f32).collect();
        RepTensor::new("x", "toy", num_layers, m, labels(names), data).unwrap()
    }

    #[test]
    fn layer_slices() {
        let t = tensor(4, 2, &["last"]);
        let l = |i| LayerIndex::new(i).unwrap();
        assert_eq!(select_layer(&t, l(-1)).unwrap().as_slice(), &[6.0, 7.0]);
        assert_eq!(select_layer(&t, l(-4)).unwrap().as_slice(), &[0.0, 1.0]);
        assert!(matches!(
            select_layer(&t, l(-5)),
            Err(RepError::LayerOutOfRange { .. })
        ));
    }

    #[test]
    fn slices_reassemble_the_payload() {
        let t = tensor(3, 2, &["a", "b"]);
        let mut joined = Vec::new();
        for k in (1..=3).rev() {
            joined.extend_from_slice(select_layer(&t, LayerIndex::new(-k).unwrap()).unwrap().as_slice());
        }
        assert_eq!(joined, t.data);
    }

    #[test]
    fn section_concatenation() {
        let t = tensor(1, 8, &["sec:1", "sec:2", "sec:3"]);
        let slice = select_layer(&t, LayerIndex::new(-1).unwrap()).unwrap();
        let f = select_tokens(slice, &t.vector_labels, TokenStrategy::SectionLast).unwrap();
        assert_eq!(f.dim(), 24);
        let expected: Vec<f64> = (0..24).map(f64::from).collect();
        assert_eq!(f.0, expected);
    }

    #[test]
    fn middle_comes_first() {
        // stored as [last, middle] to check output order follows the strategy
        let t = tensor(1, 3, &["last", "middle"]);
        let slice = select_layer(&t, LayerIndex::new(-1).unwrap()).unwrap();
        let f = select_tokens(slice, &t.vector_labels, TokenStrategy::MiddlePlusLast).unwrap();
        assert_eq!(f.0, vec![3.0, 4.0, 5.0, 0.0, 1.0, 2.0]);
    }

    #[test]
    fn missing_label_is_named() {
        let t = tensor(1, 2, &["sec:1"]);
        let slice = select_layer(&t, LayerIndex::new(-1).unwrap()).unwrap();
        let err = select_tokens(slice, &t.vector_labels, TokenStrategy::Last).unwrap_err();
        assert!(matches!(&err, RepError::MissingLabel(l) if l == "last"));
        let err = select_tokens(slice, &t.vector_labels, TokenStrategy::FirstCls).unwrap_err();
        assert!(matches!(&err, RepError::MissingLabel(l) if l == "cls"));
    }

    #[test]
    fn segments_and_cls() {
        let t = tensor(1, 2, &["cls", "seg:1", "seg:2", "last"]);
        let slice = select_layer(&t, LayerIndex::new(-1).unwrap()).unwrap();
        let seg = select_tokens(slice, &t.vector_labels, "segment_last".parse().unwrap()).unwrap();
        assert_eq!(seg.0, vec![2.0, 3.0, 4.0, 5.0]);
        let cls = select_tokens(slice, &t.vector_labels, TokenStrategy::FirstCls).unwrap();
        assert_eq!(cls.0, vec![0.0, 1.0]);
    }

    #[test]
    fn strategy_parsing() {
        for s in ["last", "middle_plus_last", "section_last", "first_cls", "segment_last:128"] {
            let parsed: TokenStrategy = s.parse().unwrap();
            assert_eq!(parsed.to_string(), s);
        }
        assert_eq!(
            "segment_last".parse::<TokenStrategy>().unwrap(),
            TokenStrategy::SegmentLast { segment_len: 512 }
        );
        assert!("segment_last:0".parse::<TokenStrategy>().is_err());
        assert!("mean".parse::<TokenStrategy>().is_err());
    }
}
