//! Preservation of polynomial growth `u² ≤ c₀ (1 + x² + (2m + 4(p−1)) t)^p`.

use super::{Monitor, MonitorContext, MonitorResult, Observation, Series, Verdict};
use crate::coords::{check_orthonormal, coordinate_split, standard_basis};
use crate::error::{McfError, Result};

pub struct GrowthMonitor {
    ell: usize,
    p: f64,
    c0: f64,
    basis: Vec<Vec<f64>>,
    tolerance: f64,
    t_coefficient: f64,
    slack: Series,
}

impl GrowthMonitor {
    pub fn new(ctx: &MonitorContext, ell: usize, p: f64, c0: f64, basis: Option<Vec<Vec<f64>>>, tolerance: f64) -> Result<Self> {
        let (m, n) = (ctx.scenario.m, ctx.scenario.n);
        if !(p >= 0.0) {
            return Err(McfError::Config(format!("growth exponent p must be non-negative, got {p}")));
        }
        if !(c0 > 0.0) {
            return Err(McfError::Config(format!("growth constant c0 must be positive, got {c0}")));
        }
        if ell == 0 || ell > n {
            return Err(McfError::Config(format!("ℓ = {ell} outside 1..={n}")));
        }
        let basis = basis.unwrap_or_else(|| standard_basis(n));
        check_orthonormal(&basis, n).map_err(|e| McfError::Config(e.to_string()))?;
        Ok(Self {
            ell,
            p,
            c0,
            basis,
            tolerance,
            t_coefficient: growth_time_coefficient(m, p),
            slack: Series::new("slack"),
        })
    }
}

/// `2m + 4(p − 1)`.
pub fn growth_time_coefficient(m: usize, p: f64) -> f64 {
    2.0 * m as f64 + 4.0 * (p - 1.0)
}

/// `max_x u² / (c₀ (1 + x² + κ t)^p)` with `κ` the time coefficient.
pub fn growth_slack(u_sq: &[f64], x_sq: &[f64], c0: f64, p: f64, kappa: f64, t: f64) -> f64 {
    u_sq.iter()
        .zip(x_sq)
        .map(|(u, x)| {
            let eta = 1.0 + x + kappa * t;
            if p == 0.0 {
                u / c0
            } else if eta > 0.0 {
                u / (c0 * eta.powf(p))
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max)
}

impl Monitor for GrowthMonitor {
    fn observe(&mut self, obs: &Observation<'_>) -> Result<()> {
        let split = coordinate_split(obs.geometry, self.ell, &self.basis)?;
        let s = growth_slack(&split.u_sq, &split.x_sq, self.c0, self.p, self.t_coefficient, obs.geometry.time);
        self.slack.push(obs.geometry.time, s);
        Ok(())
    }

    fn finish(self: Box<Self>) -> MonitorResult {
        let mut r = MonitorResult::new("growth", self.tolerance)
            .param("ell", self.ell)
            .param("p", self.p)
            .param("c0", self.c0)
            .param("t_coefficient", self.t_coefficient);
        if let Some(&s0) = self.slack.values.first() {
            let max = self.slack.max();
            r.summary.insert("max_slack".into(), max);
            r.summary.insert("t_coefficient".into(), self.t_coefficient);
            if s0 > 1.0 + self.tolerance {
                r.note = Some(format!("initial data violates the bound (slack {s0})"));
            } else {
                r.verdict = if max <= 1.0 + self.tolerance { Verdict::Pass } else { Verdict::Fail };
            }
        }
        r.series.push(self.slack);
        r
    }
}
