//! Preservation of a flat normal bundle along the flow.

use super::{is_normally_flat, rperp_floor, Monitor, MonitorResult, Observation, Series, Verdict};
use crate::error::Result;
use crate::geometry::sup;

/// Passes iff `sup |R⊥|²(t) ≤ factor · ε₀` at every recorded time, where `ε₀`
/// is the measured initial value (never below the roundoff floor).
pub struct FlatnessMonitor {
    factor: f64,
    rperp: Series,
    a_sq: Series,
}

impl FlatnessMonitor {
    pub fn new(factor: f64) -> Self {
        Self { factor, rperp: Series::new("sup_Rperp2"), a_sq: Series::new("sup_A2") }
    }
}

impl Monitor for FlatnessMonitor {
    fn observe(&mut self, obs: &Observation<'_>) -> Result<()> {
        let gs = obs.geometry;
        self.rperp.push(gs.time, sup(&gs.norm_rperp_sq));
        self.a_sq.push(gs.time, sup(&gs.norm_a_sq));
        Ok(())
    }

    fn finish(self: Box<Self>) -> MonitorResult {
        let mut r = MonitorResult::new("flatness", self.factor).param("factor", self.factor);
        if let (Some(&r0), Some(&a0)) = (self.rperp.values.first(), self.a_sq.values.first()) {
            let eps0 = r0.max(rperp_floor(a0));
            let max = self.rperp.max();
            r.summary.insert("eps0".into(), eps0);
            r.summary.insert("initial".into(), r0);
            r.summary.insert("max_ratio".into(), max / eps0);
            r.summary.insert("min_ratio".into(), self.rperp.min() / eps0);
            r.summary.insert("max_sup_A2".into(), self.a_sq.max());
            if is_normally_flat(r0, a0) {
                r.verdict = if max <= self.factor * eps0 { Verdict::Pass } else { Verdict::Fail };
            } else {
                r.note = Some(format!("initial sup |R⊥|² = {r0:e} is not flat; recorded as a control"));
            }
        }
        r.series = vec![self.rperp, self.a_sq];
        r
    }
}
