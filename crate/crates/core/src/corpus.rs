//! Manuscript corpus: JSON-lines manifest loading, GROBID TEI section
//! ingestion and per-criterion review statistics.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::{self, StdConvention};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: missing required field `{field}`")]
    MissingField { line: usize, field: String },
    #[error("duplicate manuscript id \"{0}\"")]
    DuplicateId(String),
    #[error("manuscript \"{id}\": {message}")]
    Invalid { id: String, message: String },
    #[error("unknown criterion \"{0}\"")]
    UnknownCriterion(String),
    #[error("malformed TEI XML: {0}")]
    Xml(String),
}

/// A named review criterion such as `overall_quality`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Criterion(String);

impl Criterion {
    pub fn new(name: impl Into<String>) -> Self {
        Criterion(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Criterion {
    fn from(s: &str) -> Self {
        Criterion(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub heading: String,
    pub text: String,
}

/// One idea, carried by one manuscript, with its reviewer scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manuscript {
    pub id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sections: Vec<Section>,
    pub reviews: BTreeMap<String, Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<String>,
}

impl Manuscript {
    pub fn scores(&self, criterion: &Criterion) -> Option<&[f64]> {
        self.reviews.get(criterion.as_str()).map(Vec::as_slice)
    }

    fn validate(&self) -> Result<(), CorpusError> {
        let invalid = |message: String| CorpusError::Invalid {
            id: self.id.clone(),
            message,
        };
        if self.id.is_empty() {
            return Err(invalid("id is empty".into()));
        }
        if self.abstract_text.trim().is_empty() {
            return Err(invalid("abstract is empty".into()));
        }
        for (name, scores) in &self.reviews {
            if scores.is_empty() {
                return Err(invalid(format!("criterion `{name}` has no scores")));
            }
            if scores.iter().any(|s| !s.is_finite()) {
                return Err(invalid(format!("criterion `{name}` has a non-finite score")));
            }
        }
        Ok(())
    }
}

/// Validated, immutable collection of manuscripts with unique ids.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    manuscripts: Vec<Manuscript>,
    index: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(manuscripts: Vec<Manuscript>) -> Result<Self, CorpusError> {
        let mut index = HashMap::with_capacity(manuscripts.len());
        for (i, m) in manuscripts.iter().enumerate() {
            m.validate()?;
            if index.insert(m.id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateId(m.id.clone()));
            }
        }
        Ok(Corpus { manuscripts, index })
    }

    pub fn len(&self) -> usize {
        self.manuscripts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manuscripts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Manuscript> {
        self.manuscripts.iter()
    }

    pub fn manuscripts(&self) -> &[Manuscript] {
        &self.manuscripts
    }

    pub fn get(&self, id: &str) -> Option<&Manuscript> {
        self.index.get(id).map(|&i| &self.manuscripts[i])
    }

    /// True when at least one manuscript carries scores for `criterion`.
    pub fn has_criterion(&self, criterion: &Criterion) -> bool {
        self.manuscripts.iter().any(|m| m.scores(criterion).is_some())
    }

    /// Criterion names present anywhere in the corpus, sorted.
    pub fn criteria(&self) -> Vec<Criterion> {
        let set: std::collections::BTreeSet<&String> =
            self.manuscripts.iter().flat_map(|m| m.reviews.keys()).collect();
        set.into_iter().map(|s| Criterion(s.clone())).collect()
    }

    /// Manuscripts that carry `criterion`, in corpus order.
    pub fn eligible(&self, criterion: &Criterion) -> impl Iterator<Item = &Manuscript> {
        let criterion = criterion.clone();
        self.manuscripts
            .iter()
            .filter(move |m| m.scores(&criterion).is_some())
    }

    /// Replaces section lists with those parsed from `<id>.tei.xml` files in
    /// `dir`. Manuscripts without a TEI file keep their manifest sections.
    pub fn attach_tei_sections(&mut self, dir: &Path) -> Result<usize, CorpusError> {
        let mut attached = 0;
        for m in &mut self.manuscripts {
            let path = dir.join(format!("{}.tei.xml", m.id));
            if !path.exists() {
                continue;
            }
            let xml = fs::read_to_string(&path).map_err(|source| CorpusError::Io {
                path: path.clone(),
                source,
            })?;
            m.sections = parse_tei_sections(&xml)?;
            attached += 1;
        }
        Ok(attached)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for m in &self.manuscripts {
            out.push_str(&serde_json::to_string(m).expect("manuscript serializes"));
            out.push('\n');
        }
        out
    }

    pub fn write_manifest(&self, path: &Path) -> Result<(), CorpusError> {
        let io_err = |source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut f = fs::File::create(path).map_err(io_err)?;
        f.write_all(self.to_jsonl().as_bytes()).map_err(io_err)
    }
}

const REQUIRED_FIELDS: [&str; 4] = ["id", "title", "abstract", "reviews"];

fn parse_record(line_no: usize, line: &str) -> Result<Manuscript, CorpusError> {
    let value: serde_json::Value =
        serde_json::from_str(line).map_err(|e| CorpusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
    let obj = value.as_object().ok_or_else(|| CorpusError::Parse {
        line: line_no,
        message: "record is not a JSON object".into(),
    })?;
    for field in REQUIRED_FIELDS {
        if !obj.contains_key(field) {
            return Err(CorpusError::MissingField {
                line: line_no,
                field: field.to_string(),
            });
        }
    }
    serde_json::from_value(value).map_err(|e| CorpusError::Parse {
        line: line_no,
        message: e.to_string(),
    })
}

/// Parses manifest text, one JSON record per non-blank line.
pub fn parse_manifest(text: &str) -> Result<Corpus, CorpusError> {
    let mut manuscripts = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let m = parse_record(i + 1, line)?;
        if !seen.insert(m.id.clone()) {
            return Err(CorpusError::DuplicateId(m.id));
        }
        manuscripts.push(m);
    }
    Corpus::new(manuscripts)
}

pub fn load_manifest(path: &Path) -> Result<Corpus, CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let reader = BufReader::new(fs::File::open(path).map_err(io_err)?);
    let mut text = String::new();
    for line in reader.lines() {
        text.push_str(&line.map_err(io_err)?);
        text.push('\n');
    }
    parse_manifest(&text)
}

/// Trims and collapses internal runs of whitespace to one space.
pub fn normalize_whitespace(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn collect_text(node: roxmltree::Node<'_, '_>) -> String {
    let raw: Vec<&str> = node
        .descendants()
        .filter(|n| n.is_text())
        .filter_map(|n| n.text())
        .collect();
    normalize_whitespace(&raw.join(" "))
}

/// Extracts `(heading, text)` pairs from the top-level `<div>` elements of a
/// TEI `<body>`, in document order.
pub fn parse_tei_sections(tei_document: &str) -> Result<Vec<Section>, CorpusError> {
    let doc =
        roxmltree::Document::parse(tei_document).map_err(|e| CorpusError::Xml(e.to_string()))?;
    let Some(body) = doc
        .descendants()
        .find(|n| n.is_element() && n.tag_name().name() == "body")
    else {
        return Ok(Vec::new());
    };

    let divs = body
        .children()
        .filter(|n| n.is_element() && n.tag_name().name() == "div");
    let mut sections = Vec::new();
    for (k, div) in divs.enumerate() {
        let mut heading = None;
        let mut parts = Vec::new();
        for child in div.children() {
            if child.is_element() && child.tag_name().name() == "head" && heading.is_none() {
                heading = Some(collect_text(child));
                continue;
            }
            let text = if child.is_text() {
                normalize_whitespace(child.text().unwrap_or(""))
            } else if child.is_element() {
                collect_text(child)
            } else {
                String::new()
            };
            if !text.is_empty() {
                parts.push(text);
            }
        }
        let heading = match heading {
            Some(h) if !h.is_empty() => h,
            _ => format!("unnamed-{}", k + 1),
        };
        sections.push(Section {
            heading,
            text: parts.join(" "),
        });
    }
    Ok(sections)
}

/// Summary of per-paper mean scores for one criterion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoreStats {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

pub fn review_stats(corpus: &Corpus, criterion: &Criterion) -> Result<ScoreStats, CorpusError> {
    review_stats_with(corpus, criterion, StdConvention::Population)
}

/// Statistics over per-paper means; papers lacking `criterion` are skipped.
pub fn review_stats_with(
    corpus: &Corpus,
    criterion: &Criterion,
    convention: StdConvention,
) -> Result<ScoreStats, CorpusError> {
    let means: Vec<f64> = corpus
        .eligible(criterion)
        .filter_map(|m| m.scores(criterion))
        .map(stats::mean)
        .collect();
    if means.is_empty() {
        return Err(CorpusError::UnknownCriterion(criterion.to_string()));
    }
    let mean = stats::mean(&means);
    let (min, max) = stats::min_max(&means);
    Ok(ScoreStats {
        count: means.len(),
        mean: mean.clamp(min, max),
        std: stats::std_dev(&means, convention),
        min,
        max,
    })
}
