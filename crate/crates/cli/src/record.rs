use crate::config::ExperimentConfig;
use crate::error::{io_context, CliError};
use rfwave_core::export::json_string;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

pub const RECORD_FILE: &str = "record.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub version: String,
    pub wall_time: f64,
    pub metrics: BTreeMap<String, f64>,
    pub assertions: BTreeMap<String, bool>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<RunRecord>,
}

impl RunRecord {
    pub fn new(config: ExperimentConfig) -> Self {
        RunRecord {
            config,
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time: 0.0,
            metrics: BTreeMap::new(),
            assertions: BTreeMap::new(),
            children: Vec::new(),
        }
    }

    /// Non-finite values have no JSON form and are left out.
    pub fn metric(&mut self, key: &str, value: f64) {
        if value.is_finite() {
            self.metrics.insert(key.to_string(), value);
        }
    }

    pub fn assert(&mut self, key: &str, ok: bool) {
        self.assertions.insert(key.to_string(), ok);
    }

    pub fn passed(&self) -> bool {
        self.assertions.values().all(|&v| v) && self.children.iter().all(RunRecord::passed)
    }

    pub fn failures(&self) -> Vec<String> {
        let mut out: Vec<String> = self.assertions.iter().filter(|(_, &v)| !v).map(|(k, _)| k.clone()).collect();
        for c in &self.children {
            out.extend(c.failures().into_iter().map(|f| format!("{}: {f}", c.config.out.display())));
        }
        out
    }

    pub fn to_json(&self) -> Result<String, CliError> {
        Ok(json_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let path = dir.join(RECORD_FILE);
        std::fs::write(&path, self.to_json()?).map_err(io_context(format!("writing {}", path.display())))
    }
}
