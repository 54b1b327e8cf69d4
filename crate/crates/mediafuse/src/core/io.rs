use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{normalize_domain, ordinal_index, CoreError, DatasetSplit, LabelScale, Outlet, Result};

/// One line of a labels file: class names, nulls for unlabeled tasks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelRecord {
    pub domain: String,
    #[serde(default)]
    pub bias: Option<String>,
    #[serde(default)]
    pub factuality: Option<String>,
}

/// Load a JSONL labels file, normalizing domains and mapping class names to
/// ordinal indices on the given scales. Lines that are blank or that carry
/// no `domain` field (metadata lines) are skipped.
pub fn load_labels(
    path: &Path,
    bias_scale: &LabelScale,
    fact_scale: &LabelScale,
) -> Result<Vec<Outlet>> {
    let text = fs::read_to_string(path)?;
    let mut outlets = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(line)
            .map_err(|e| CoreError::Parse { line: line_no, msg: e.to_string() })?;
        if value.get("domain").is_none() {
            continue;
        }
        let rec: LabelRecord = serde_json::from_value(value)
            .map_err(|e| CoreError::Parse { line: line_no, msg: e.to_string() })?;
        let domain = normalize_domain(&rec.domain)?;
        let bias = match &rec.bias {
            Some(name) => Some(ordinal_index(bias_scale, name)?),
            None => None,
        };
        let factuality = match &rec.factuality {
            Some(name) => Some(ordinal_index(fact_scale, name)?),
            None => None,
        };
        outlets.push(Outlet { domain, bias, factuality });
    }
    outlets.sort_by(|a, b| a.domain.cmp(&b.domain));
    Ok(outlets)
}

#[derive(Debug, Serialize, Deserialize)]
struct SplitFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    config_hash: Option<String>,
    train: Vec<String>,
    dev: Vec<String>,
    test: Vec<String>,
}

pub fn save_split(path: &Path, split: &DatasetSplit, config_hash: Option<&str>) -> Result<()> {
    let file = SplitFile {
        config_hash: config_hash.map(|s| s.to_string()),
        train: split.train.clone(),
        dev: split.dev.clone(),
        test: split.test.clone(),
    };
    let json = serde_json::to_string_pretty(&file)
        .map_err(|e| CoreError::Parse { line: 0, msg: e.to_string() })?;
    fs::write(path, json)?;
    Ok(())
}

pub fn load_split(path: &Path) -> Result<DatasetSplit> {
    let text = fs::read_to_string(path)?;
    let file: SplitFile =
        serde_json::from_str(&text).map_err(|e| CoreError::Parse { line: 0, msg: e.to_string() })?;
    Ok(DatasetSplit { train: file.train, dev: file.dev, test: file.test })
}
