//! Kato-type inequality `|∇⊥A|² ≥ ((d+2)/d) |∇|A||²` for flat normal bundles.

use super::{is_normally_flat, Monitor, MonitorContext, MonitorResult, Observation, Series, Verdict};
use crate::error::Result;
use crate::geometry::{sup, GeometryState};

/// `min_x (|∇⊥A|² − ((d+2)/d)|∇|A||²) / (1 + |∇⊥A|²)` with `d = dim`.
pub fn kato_margin(gs: &GeometryState, dim: usize) -> f64 {
    let c = (dim as f64 + 2.0) / dim as f64;
    gs.norm_grad_perp_a_sq
        .iter()
        .zip(&gs.grad_abs_a_sq)
        .map(|(g, k)| (g - c * k) / (1.0 + g))
        .fold(f64::INFINITY, f64::min)
}

pub struct KatoMonitor {
    dim: usize,
    tolerance: f64,
    margin: Series,
    non_flat: bool,
}

impl KatoMonitor {
    pub fn new(ctx: &MonitorContext, ambient_constant: bool, tolerance: f64) -> Self {
        let dim = if ambient_constant { ctx.scenario.n } else { ctx.scenario.m };
        Self { dim, tolerance, margin: Series::new("margin"), non_flat: false }
    }
}

impl Monitor for KatoMonitor {
    fn observe(&mut self, obs: &Observation<'_>) -> Result<()> {
        let gs = obs.geometry;
        if !is_normally_flat(sup(&gs.norm_rperp_sq), sup(&gs.norm_a_sq)) {
            self.non_flat = true;
        }
        self.margin.push(gs.time, kato_margin(gs, self.dim));
        Ok(())
    }

    fn finish(self: Box<Self>) -> MonitorResult {
        let mut r = MonitorResult::new("kato", self.tolerance)
            .param("dimension", self.dim)
            .param("constant", (self.dim as f64 + 2.0) / self.dim as f64);
        if !self.margin.values.is_empty() {
            r.summary.insert("min_margin".into(), self.margin.min());
            if self.non_flat {
                r.note = Some("normal bundle is not flat".into());
            } else {
                r.verdict = if self.margin.min() >= -self.tolerance { Verdict::Pass } else { Verdict::Fail };
            }
        }
        r.series.push(self.margin);
        r
    }
}
