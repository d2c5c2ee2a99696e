//! Maximum-principle and derivative-decay monitors on scalar fields.

use serde::{Deserialize, Serialize};

use super::{rperp_floor, Monitor, MonitorContext, MonitorResult, Observation, Series, Verdict};
use crate::coords::{coordinate_split, standard_basis};
use crate::error::{McfError, Result};
use crate::geometry::sup;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum SupField {
    /// `u² η^{−p}` with `η = 1 + x² + (2m + 4(p−1)) t`.
    GrowthRatio,
    /// `e^{−ct} |R⊥|²`, `c` fixed after the run.
    RperpExp,
    /// `|A|² v²`.
    #[serde(rename = "a2v2")]
    ASqVSq,
    /// `v = 1/w`.
    #[serde(rename = "v")]
    GraphV,
    /// `t |A|²`.
    #[serde(rename = "tA2")]
    TASq,
    /// `t² |∇⊥A|²`.
    #[serde(rename = "t2GradPerpA2")]
    TSqGradPerpA,
}

impl SupField {
    pub fn key(self) -> &'static str {
        match self {
            Self::GrowthRatio => "u2_eta_p",
            Self::RperpExp => "exp_Rperp2",
            Self::ASqVSq => "A2_v2",
            Self::GraphV => "v",
            Self::TASq => "t_A2",
            Self::TSqGradPerpA => "t2_gradperpA2",
        }
    }

    fn bounded_only(self) -> bool {
        matches!(self, Self::TASq | Self::TSqGradPerpA)
    }
}

pub struct SupMonitor {
    field: SupField,
    tolerance: f64,
    ell: usize,
    p: f64,
    m: usize,
    n: usize,
    graph_ok: bool,
    not_graphical: bool,
    t_start: Option<f64>,
    values: Series,
    // for the e^{-ct} field
    a_sq: Vec<f64>,
    reaction_ratio: f64,
}

impl SupMonitor {
    pub fn new(ctx: &MonitorContext, field: SupField, tolerance: f64, ell: Option<usize>, p: Option<f64>) -> Result<Self> {
        let (ell, p) = match field {
            SupField::GrowthRatio => {
                let ell = ell.ok_or_else(|| McfError::Config("growthRatio needs ell".into()))?;
                let p = p.ok_or_else(|| McfError::Config("growthRatio needs p".into()))?;
                if !(p >= 0.0) || ell == 0 || ell > ctx.scenario.n {
                    return Err(McfError::Config("growthRatio needs p ≥ 0 and 1 ≤ ell ≤ n".into()));
                }
                (ell, p)
            }
            _ => (1, 0.0),
        };
        Ok(Self {
            field,
            tolerance,
            ell,
            p,
            m: ctx.scenario.m,
            n: ctx.scenario.n,
            graph_ok: ctx.omega.is_some(),
            not_graphical: false,
            t_start: None,
            values: Series::new(field.key()),
            a_sq: Vec::new(),
            reaction_ratio: 0.0,
        })
    }
}

/// Largest `f_k / min_{j<k} f_j − 1` over the series, with an absolute allowance `floor`.
pub fn monotone_excess(values: &[f64], floor: f64) -> f64 {
    let mut run_min = f64::INFINITY;
    let mut worst: f64 = 0.0;
    for &v in values {
        if run_min.is_finite() {
            let excess = (v - run_min - floor) / run_min.abs().max(f64::MIN_POSITIVE);
            worst = worst.max(excess);
        }
        run_min = run_min.min(v);
    }
    worst
}

impl Monitor for SupMonitor {
    fn observe(&mut self, obs: &Observation<'_>) -> Result<()> {
        let gs = obs.geometry;
        let t0 = *self.t_start.get_or_insert(gs.time);
        let t = gs.time - t0;
        let needs_graph = matches!(self.field, SupField::ASqVSq | SupField::GraphV);
        if needs_graph && (!self.graph_ok || obs.graph.is_none_or(|g| !g.is_graphical())) {
            self.not_graphical = true;
            self.values.push(gs.time, f64::NAN);
            return Ok(());
        }
        let v = match self.field {
            SupField::GrowthRatio => {
                let split = coordinate_split(gs, self.ell, &standard_basis(self.n))?;
                let kappa = super::growth::growth_time_coefficient(self.m, self.p);
                split
                    .u_sq
                    .iter()
                    .zip(&split.x_sq)
                    .map(|(u, x)| if self.p == 0.0 { *u } else { u / (1.0 + x + kappa * t).powf(self.p) })
                    .fold(0.0, f64::max)
            }
            SupField::RperpExp => {
                let sa = sup(&gs.norm_a_sq);
                let floor = rperp_floor(sa);
                for (z, r) in gs.rperp_reaction.iter().zip(&gs.norm_rperp_sq) {
                    if *r > 1e6 * floor {
                        self.reaction_ratio = self.reaction_ratio.max(z.abs() / r);
                    }
                }
                self.a_sq.push(sa);
                sup(&gs.norm_rperp_sq)
            }
            SupField::ASqVSq => {
                let g = obs.graph.expect("checked above");
                gs.norm_a_sq.iter().zip(&g.v).map(|(a, v)| a * v.unwrap().powi(2)).fold(0.0, f64::max)
            }
            SupField::GraphV => obs.graph.expect("checked above").v.iter().map(|v| v.unwrap()).fold(0.0, f64::max),
            SupField::TASq => t * sup(&gs.norm_a_sq),
            SupField::TSqGradPerpA => t * t * sup(&gs.norm_grad_perp_a_sq),
        };
        self.values.push(gs.time, v);
        Ok(())
    }

    fn finish(mut self: Box<Self>) -> MonitorResult {
        let mut r = MonitorResult::new("sup", self.tolerance).param("field", self.field.key());
        if self.field == SupField::GrowthRatio {
            r = r.param("ell", self.ell).param("p", self.p);
        }
        if self.not_graphical {
            r.note = Some("a snapshot is not graphical over the reference form".into());
            r.series.push(self.values);
            return r;
        }
        if self.values.values.is_empty() {
            return r;
        }
        let mut floor = 0.0;
        if self.field == SupField::RperpExp {
            let c = 2.0 * self.reaction_ratio;
            let t0 = self.values.t[0];
            for (v, t) in self.values.values.iter_mut().zip(&self.values.t) {
                *v *= (-c * (t - t0)).exp();
            }
            floor = rperp_floor(self.a_sq.iter().cloned().fold(0.0, f64::max));
            r.summary.insert("c".into(), c);
        }
        let ok = if self.field.bounded_only() {
            let (ta, tb) = (self.values.t[0], *self.values.t.last().unwrap());
            let half = self
                .values
                .t
                .iter()
                .zip(&self.values.values)
                .filter(|(t, _)| **t <= ta + 0.5 * (tb - ta))
                .map(|(_, v)| *v)
                .fold(0.0, f64::max);
            r.summary.insert("first_half_max".into(), half);
            self.values.max() <= 2.0 * half
        } else {
            let excess = monotone_excess(&self.values.values, floor);
            r.summary.insert("monotone_excess".into(), excess);
            excess <= self.tolerance
        };
        r.summary.insert("max".into(), self.values.max());
        r.summary.insert("initial".into(), self.values.values[0]);
        r.verdict = if ok { Verdict::Pass } else { Verdict::Fail };
        r.series.push(self.values);
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monotone_excess_measures_rebounds() {
        assert_eq!(monotone_excess(&[3.0, 2.0, 1.0], 0.0), 0.0);
        assert!((monotone_excess(&[3.0, 2.0, 2.2], 0.0) - 0.1).abs() < 1e-12);
        assert_eq!(monotone_excess(&[0.0, 1e-30], 1e-24), 0.0);
    }
}
