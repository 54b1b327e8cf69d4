use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{NumKitError, Result};

/// Model checkpoint: a JSON header (shapes, activation names,
/// hyperparameters, seed) plus a flat parameter array in the order the
/// model's `params()` documents.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub header: Value,
    pub params: Vec<f64>,
}

pub const CHECKPOINT_FORMAT: &str = "mediafuse-checkpoint";

pub fn save_checkpoint(path: &Path, header: Value, params: Vec<f64>) -> Result<()> {
    let ck = Checkpoint { format: CHECKPOINT_FORMAT.into(), version: 1, header, params };
    let json = serde_json::to_string(&ck)
        .map_err(|e| NumKitError::Numeric(format!("serialize checkpoint: {e}")))?;
    fs::write(path, json)
        .map_err(|e| NumKitError::Numeric(format!("write {}: {e}", path.display())))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = fs::read_to_string(path)
        .map_err(|e| NumKitError::Numeric(format!("read {}: {e}", path.display())))?;
    let ck: Checkpoint = serde_json::from_str(&text)
        .map_err(|e| NumKitError::Numeric(format!("parse {}: {e}", path.display())))?;
    if ck.format != CHECKPOINT_FORMAT {
        return Err(NumKitError::Numeric(format!("unknown checkpoint format {:?}", ck.format)));
    }
    if !ck.params.iter().all(|v| v.is_finite()) {
        return Err(NumKitError::Numeric("non-finite parameter in checkpoint".into()));
    }
    Ok(ck)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn round_trips_header_and_params() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let header = json!({"encoder": "sage", "layers": 4, "seed": 7});
        save_checkpoint(&path, header.clone(), vec![1.0, -2.5, 0.0]).unwrap();
        let ck = load_checkpoint(&path).unwrap();
        assert_eq!(ck.header, header);
        assert_eq!(ck.params, vec![1.0, -2.5, 0.0]);
    }

    #[test]
    fn rejects_foreign_format() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, r#"{"format":"other","version":1,"header":{},"params":[]}"#)
            .unwrap();
        assert!(load_checkpoint(&path).is_err());
    }
}
