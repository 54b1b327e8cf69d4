//! Domain types shared by every module: outlets, ordinal label scales,
//! dataset splits, embedding tables, and view identifiers.

mod io;
mod split;

pub use io::{load_labels, load_split, save_split, LabelRecord};
pub use split::{stratified_split, SplitOutcome, StratificationWarning};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid domain: {0:?} normalizes to an empty string")]
    InvalidDomain(String),
    #[error("unknown label {class:?} for scale {scale}")]
    UnknownLabel { scale: String, class: String },
    #[error("outlet {0:?} has no label for the requested task")]
    MissingLabel(String),
    #[error("split ratios {0:?} do not sum to 1")]
    BadRatios([f64; 3]),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T> = std::result::Result<T, CoreError>;

/// An ordered set of class names; the ordinal index of a class is its
/// position, lowest first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelScale {
    pub name: String,
    pub classes: Vec<String>,
}

impl LabelScale {
    pub fn new(name: &str, classes: &[&str]) -> Self {
        assert!(!classes.is_empty(), "label scale needs at least one class");
        let mut seen = std::collections::BTreeSet::new();
        for c in classes {
            assert!(seen.insert(*c), "duplicate class {c:?} in scale {name}");
        }
        Self { name: name.into(), classes: classes.iter().map(|s| s.to_string()).collect() }
    }

    /// 3-point political bias: left / center / right.
    pub fn bias3() -> Self {
        Self::new("bias3", &["left", "center", "right"])
    }

    /// 5-point political bias.
    pub fn bias5() -> Self {
        Self::new("bias5", &["left", "left-center", "center", "right-center", "right"])
    }

    /// 3-point factuality: low / mixed / high.
    pub fn fact3() -> Self {
        Self::new("fact3", &["low", "mixed", "high"])
    }

    /// 5-point factuality.
    pub fn fact5() -> Self {
        Self::new("fact5", &["very-low", "low", "mixed", "high", "very-high"])
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "bias3" => Some(Self::bias3()),
            "bias5" => Some(Self::bias5()),
            "fact3" => Some(Self::fact3()),
            "fact5" => Some(Self::fact5()),
            _ => None,
        }
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn class_name(&self, index: usize) -> Option<&str> {
        self.classes.get(index).map(|s| s.as_str())
    }
}

/// Position of `class_name` in the scale (lowest ordinal first).
pub fn ordinal_index(scale: &LabelScale, class_name: &str) -> Result<usize> {
    scale.classes.iter().position(|c| c == class_name).ok_or_else(|| CoreError::UnknownLabel {
        scale: scale.name.clone(),
        class: class_name.to_string(),
    })
}

/// Which of the two ordinal labels a run predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Bias,
    Factuality,
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Task::Bias => write!(f, "bias"),
            Task::Factuality => write!(f, "factuality"),
        }
    }
}

/// A news-media domain with optional ordinal labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outlet {
    pub domain: String,
    pub bias: Option<usize>,
    pub factuality: Option<usize>,
}

impl Outlet {
    pub fn label(&self, task: Task) -> Option<usize> {
        match task {
            Task::Bias => self.bias,
            Task::Factuality => self.factuality,
        }
    }
}

/// The five representation views, in the fixed order used wherever weights
/// are vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViewId {
    Alexa,
    Hyperlink,
    Llm,
    Articles,
    Wikipedia,
}

pub const VIEW_COUNT: usize = 5;

impl ViewId {
    pub const ALL: [ViewId; VIEW_COUNT] =
        [ViewId::Alexa, ViewId::Hyperlink, ViewId::Llm, ViewId::Articles, ViewId::Wikipedia];

    pub fn index(&self) -> usize {
        match self {
            ViewId::Alexa => 0,
            ViewId::Hyperlink => 1,
            ViewId::Llm => 2,
            ViewId::Articles => 3,
            ViewId::Wikipedia => 4,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ViewId::Alexa => "alexa",
            ViewId::Hyperlink => "hyperlink",
            ViewId::Llm => "llm",
            ViewId::Articles => "articles",
            ViewId::Wikipedia => "wikipedia",
        }
    }

    pub fn parse(s: &str) -> Option<ViewId> {
        ViewId::ALL.into_iter().find(|v| v.name() == s)
    }
}

impl std::fmt::Display for ViewId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.name())
    }
}

/// Per-view map from outlet domain to a fixed-length embedding vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    pub view: ViewId,
    pub dim: usize,
    pub rows: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(view: ViewId, dim: usize) -> Self {
        assert!(dim > 0, "embedding dim must be positive");
        Self { view, dim, rows: BTreeMap::new() }
    }

    /// Insert a row; the vector must match `dim` and be finite.
    pub fn insert(&mut self, domain: String, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(CoreError::Parse {
                line: 0,
                msg: format!(
                    "embedding for {domain}: expected dim {}, got {}",
                    self.dim,
                    vector.len()
                ),
            });
        }
        if !vector.iter().all(|v| v.is_finite()) {
            return Err(CoreError::Parse {
                line: 0,
                msg: format!("embedding for {domain}: non-finite value"),
            });
        }
        self.rows.insert(domain, vector);
        Ok(())
    }

    pub fn get(&self, domain: &str) -> Option<&[f64]> {
        self.rows.get(domain).map(|v| v.as_slice())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// Disjoint train / dev / test domain sets.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
}

/// Normalize a URL-or-domain string to a bare lowercase host:
/// scheme, leading `www.`, any path component, and trailing dots are
/// stripped. Idempotent on its own output.
pub fn normalize_domain(raw: &str) -> Result<String> {
    let mut s = raw.trim().to_lowercase();
    for scheme in ["http://", "https://"] {
        if let Some(rest) = s.strip_prefix(scheme) {
            s = rest.to_string();
            break;
        }
    }
    if let Some(slash) = s.find('/') {
        s.truncate(slash);
    }
    while let Some(rest) = s.strip_prefix("www.") {
        s = rest.to_string();
    }
    while s.ends_with('.') {
        s.pop();
    }
    if s.is_empty() {
        return Err(CoreError::InvalidDomain(raw.to_string()));
    }
    Ok(s)
}
