//! TOML plan and SDE spec documents. Keys mirror [`AnalysisPlan`] and
//! [`SDESpec`] field names; unknown keys are rejected.
//!
//! ```toml
//! lags = [600, 3600]
//! prominence_threshold = 0.05
//!
//! [[windows]]
//! start = 0
//! end = 5184000
//!
//! [preprocess]
//! block_size = 1
//!
//! [estimator]
//! bandwidth = "auto"
//! ```

use std::path::Path;

use crate::pipeline::AnalysisPlan;
use crate::sim::SDESpec;
use crate::{Error, Result};

pub fn parse_plan(text: &str) -> Result<AnalysisPlan> {
    let plan: AnalysisPlan = toml::from_str(text)?;
    plan.validate()?;
    Ok(plan)
}

pub fn load_plan(path: &Path) -> Result<AnalysisPlan> {
    parse_plan(&read(path)?)
}

pub fn parse_spec(text: &str) -> Result<SDESpec> {
    Ok(toml::from_str(text)?)
}

pub fn load_spec(path: &Path) -> Result<SDESpec> {
    parse_spec(&read(path)?)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))
}

pub fn plan_to_toml(plan: &AnalysisPlan) -> String {
    toml::to_string(plan).expect("plan serializes to TOML")
}
