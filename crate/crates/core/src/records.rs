//! Serialized result records shared by the command-line tools.

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const SCHEMA_VERSION: u32 = 1;
pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema_version: u32,
    pub kind: String,
    pub code_version: String,
    pub parameters: Value,
    pub values: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    /// Seconds. Left out of records that must be reproducible byte for byte.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time: Option<f64>,
}

impl ResultRecord {
    pub fn new(kind: impl Into<String>, parameters: Value, values: Value) -> Self {
        ResultRecord {
            schema_version: SCHEMA_VERSION,
            kind: kind.into(),
            code_version: CODE_VERSION.to_string(),
            parameters,
            values,
            tolerance: None,
            wall_time: None,
        }
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = Some(tol);
        self
    }

    pub fn with_wall_time(mut self, seconds: f64) -> Self {
        self.wall_time = Some(seconds);
        self
    }

    pub fn to_json_pretty(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }
}
