//! Column-map configuration for delimited contact logs. The charting tool's
//! export format varies, so a JSON sidecar maps semantic fields to column
//! names.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// Semantic fields the parser understands. Keys of the `columns` map.
pub const REQUIRED_FIELDS: &[&str] = &[
    "match_id",
    "set",
    "point",
    "possession",
    "player",
    "team",
    "conference",
    "skill",
    "eval",
];

pub const OPTIONAL_FIELDS: &[&str] = &["attack_code", "start_x", "start_y", "end_zone", "winner"];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchemaConfig {
    /// Field delimiter, comma by default.
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    /// Semantic field -> column header.
    pub columns: BTreeMap<String, String>,
}

fn default_delimiter() -> char {
    ','
}

impl SchemaConfig {
    /// Identity mapping over the canonical column names.
    pub fn canonical() -> Self {
        let mut columns = BTreeMap::new();
        for f in REQUIRED_FIELDS.iter().chain(OPTIONAL_FIELDS) {
            columns.insert(f.to_string(), f.to_string());
        }
        SchemaConfig {
            delimiter: ',',
            columns,
        }
    }

    pub fn from_path(path: &Path) -> crate::error::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| crate::error::Error::io(path.display().to_string(), e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn column_for(&self, field: &str) -> Option<&str> {
        self.columns.get(field).map(|s| s.as_str())
    }
}
