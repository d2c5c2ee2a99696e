//! Streaming monitors that consume snapshots of a flow and produce verdicts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::coords::{GraphQuantity, ParallelForm};
use crate::error::Result;
use crate::geometry::GeometryState;
use crate::grid::ImmersionGrid;
use crate::scenarios::ScenarioInfo;

pub mod density;
pub mod evolution;
pub mod flatness;
pub mod growth;
pub mod kato;
pub mod sup;

pub use density::{DensityExponent, GaussianDensityMonitor};
pub use evolution::{evolution_residuals, EvolutionMonitor, Quantity, ResidualSet};
pub use flatness::FlatnessMonitor;
pub use growth::GrowthMonitor;
pub use kato::{kato_margin, KatoMonitor};
pub use sup::{SupField, SupMonitor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    NotApplicable,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Pass => "pass",
            Self::Fail => "fail",
            Self::NotApplicable => "not-applicable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub t: Vec<f64>,
    pub values: Vec<f64>,
}

impl Series {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), t: Vec::new(), values: Vec::new() }
    }

    pub fn push(&mut self, t: f64, v: f64) {
        self.t.push(t);
        self.values.push(v);
    }

    pub fn max(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorResult {
    pub name: String,
    pub params: BTreeMap<String, Value>,
    pub tolerance: f64,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub summary: BTreeMap<String, f64>,
    pub series: Vec<Series>,
}

impl MonitorResult {
    pub fn new(name: &str, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            params: BTreeMap::new(),
            tolerance,
            verdict: Verdict::NotApplicable,
            note: None,
            summary: BTreeMap::new(),
            series: Vec::new(),
        }
    }

    pub fn param(mut self, key: &str, v: impl Serialize) -> Self {
        self.params.insert(key.to_string(), serde_json::to_value(v).unwrap_or(Value::Null));
        self
    }

    pub fn series(&self, name: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.name == name)
    }
}

/// One recorded snapshot with its derived geometry.
pub struct Observation<'a> {
    pub grid: &'a ImmersionGrid,
    pub geometry: &'a GeometryState,
    pub graph: Option<&'a GraphQuantity>,
}

/// Static data shared by all monitors of a run.
#[derive(Debug, Clone)]
pub struct MonitorContext {
    pub scenario: ScenarioInfo,
    pub omega: Option<ParallelForm>,
}

pub trait Monitor: Send {
    fn observe(&mut self, obs: &Observation<'_>) -> Result<()>;
    fn finish(self: Box<Self>) -> MonitorResult;
}

fn d_tol_evolution() -> f64 {
    5e-3
}
fn d_factor() -> f64 {
    10.0
}
fn d_tol_growth() -> f64 {
    1e-3
}
fn d_tol_sup() -> f64 {
    1e-3
}
fn d_tol_kato() -> f64 {
    1e-6
}
fn d_tol_density() -> f64 {
    1e-4
}

/// Monitor selection as written in a run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase", deny_unknown_fields)]
pub enum MonitorSpec {
    EvolutionResiduals {
        #[serde(default = "d_tol_evolution")]
        tolerance: f64,
        #[serde(default)]
        quantities: Option<Vec<Quantity>>,
    },
    Flatness {
        #[serde(default = "d_factor")]
        factor: f64,
    },
    Growth {
        ell: usize,
        p: f64,
        c0: f64,
        #[serde(default)]
        basis: Option<Vec<Vec<f64>>>,
        #[serde(default = "d_tol_growth")]
        tolerance: f64,
    },
    Sup {
        field: SupField,
        #[serde(default = "d_tol_sup")]
        tolerance: f64,
        /// `ℓ` and `p` of the growth ratio field.
        #[serde(default)]
        ell: Option<usize>,
        #[serde(default)]
        p: Option<f64>,
    },
    Kato {
        #[serde(default)]
        ambient_constant: bool,
        #[serde(default = "d_tol_kato")]
        tolerance: f64,
    },
    GaussianDensity {
        t0: f64,
        #[serde(default)]
        center: Option<Vec<f64>>,
        #[serde(default)]
        exponent: DensityExponent,
        #[serde(default = "d_tol_density")]
        tolerance: f64,
    },
}

impl MonitorSpec {
    pub fn build(&self, ctx: &MonitorContext) -> Result<Box<dyn Monitor>> {
        Ok(match self {
            Self::EvolutionResiduals { tolerance, quantities } => {
                Box::new(EvolutionMonitor::new(ctx, *tolerance, quantities.clone()))
            }
            Self::Flatness { factor } => Box::new(FlatnessMonitor::new(*factor)),
            Self::Growth { ell, p, c0, basis, tolerance } => {
                Box::new(GrowthMonitor::new(ctx, *ell, *p, *c0, basis.clone(), *tolerance)?)
            }
            Self::Sup { field, tolerance, ell, p } => Box::new(SupMonitor::new(ctx, *field, *tolerance, *ell, *p)?),
            Self::Kato { ambient_constant, tolerance } => Box::new(KatoMonitor::new(ctx, *ambient_constant, *tolerance)),
            Self::GaussianDensity { t0, center, exponent, tolerance } => {
                Box::new(GaussianDensityMonitor::new(ctx, *t0, center.clone(), *exponent, *tolerance)?)
            }
        })
    }
}

/// Roundoff floor for `|R⊥|²` at curvature scale `sup |A|²`.
pub fn rperp_floor(sup_a_sq: f64) -> f64 {
    1e-24 * (1.0 + sup_a_sq).powi(2)
}

/// True when the normal curvature is small against the curvature scale, so
/// results that assume a flat normal bundle may be applied.
pub fn is_normally_flat(sup_rperp_sq: f64, sup_a_sq: f64) -> bool {
    sup_rperp_sq <= 1e-4 * sup_a_sq * sup_a_sq + rperp_floor(sup_a_sq)
}
