//! Run configuration: a single TOML document with strict keys.
//!
//! ```toml
//! [scenario]
//! id = "productTorus"
//! a = 1.0
//! b = 2.0
//! nodes = 32
//!
//! [flow]
//! tEnd = 0.3
//! stencil = 4
//! step = { kind = "cfl", factor = 0.1 }
//!
//! [[monitors]]
//! kind = "flatness"
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coords::ParallelForm;
use crate::error::{McfError, Result};
use crate::flow::FlowSettings;
use crate::monitors::MonitorSpec;
use crate::scenarios::ScenarioSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Perturbation {
    pub amplitude: f64,
    #[serde(default)]
    pub seed: u64,
}

fn d_out() -> String {
    "mcf-output".into()
}
fn d_snap_every() -> usize {
    0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct OutputSettings {
    #[serde(default = "d_out")]
    pub dir: String,
    /// Write every k-th recorded snapshot; 0 disables snapshot files.
    #[serde(default = "d_snap_every")]
    pub snapshot_every: usize,
    /// Exit with status 3 when the flow stops before `tEnd`.
    #[serde(default)]
    pub require_completion: bool,
}

impl Default for OutputSettings {
    fn default() -> Self {
        Self { dir: d_out(), snapshot_every: d_snap_every(), require_completion: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<Perturbation>,
    pub flow: FlowSettings,
    #[serde(default)]
    pub monitors: Vec<MonitorSpec>,
    /// Reference form for `w`; defaults to the scenario's natural form.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<ParallelForm>,
    #[serde(default)]
    pub output: OutputSettings,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| McfError::Config(describe_toml_error(text, &e)))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.flow.validate()?;
        if let Some(w) = &self.omega {
            let info = self.scenario.info();
            w.validate(info.m, info.n).map_err(|e| McfError::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// Effective configuration with every default written out.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// SHA-256 of the effective configuration.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn effective_omega(&self) -> Option<ParallelForm> {
        self.omega.clone().or_else(|| self.scenario.natural_form())
    }
}

fn describe_toml_error(text: &str, e: &toml::de::Error) -> String {
    match e.span() {
        Some(span) => {
            // Tagged tables report the whole table; point at the offending key instead.
            let mut start = span.start.min(text.len());
            if let Some(key) = e.message().strip_prefix("unknown field `").and_then(|r| r.split('`').next()) {
                let end = span.end.min(text.len());
                if let Some(off) = text[start..end].lines().scan(0, |pos, l| {
                    let at = *pos;
                    *pos += l.len() + 1;
                    Some((at, l))
                }).find(|(_, l)| l.trim_start().starts_with(key) && l.contains('=')).map(|(at, _)| at) {
                    start += off;
                }
            }
            let before = &text[..start];
            let line = before.matches('\n').count() + 1;
            let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
            format!("line {line}, column {col}: {}", e.message())
        }
        None => e.message().to_string(),
    }
}
