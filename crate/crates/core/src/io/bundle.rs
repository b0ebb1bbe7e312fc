//! JSON result bundle: plan echo, per-cell arrays and well structures,
//! input digest. Only `generated_at` varies between runs on identical
//! inputs.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::pipeline::{AnalysisPlan, Cell, RunResult};
use crate::Result;

pub const TOOL: &str = env!("CARGO_PKG_NAME");
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputInfo {
    pub name: String,
    pub sha256: String,
    pub records: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultBundle {
    pub tool: String,
    pub version: String,
    /// Wall-clock time of the run (RFC 3339, UTC).
    pub generated_at: String,
    pub input: InputInfo,
    pub plan: AnalysisPlan,
    pub cells: Vec<Cell>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn now_rfc3339() -> String {
    let now = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .unwrap_or_default();
    chrono::DateTime::from_timestamp(now.as_secs() as i64, now.subsec_nanos())
        .map(|t| t.to_rfc3339_opts(chrono::SecondsFormat::Millis, true))
        .unwrap_or_default()
}

impl ResultBundle {
    pub fn new(input: InputInfo, plan: AnalysisPlan, result: RunResult) -> Self {
        Self {
            tool: TOOL.into(),
            version: VERSION.into(),
            generated_at: now_rfc3339(),
            input,
            plan,
            cells: result.cells,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("bundle serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        super::atomic_write(path, self.to_json().as_bytes())
    }
}
