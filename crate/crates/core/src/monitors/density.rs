//! Gaussian density `∫ ρ dμ` against the backward heat kernel.

use serde::{Deserialize, Serialize};

use super::{Monitor, MonitorContext, MonitorResult, Observation, Series, Verdict};
use crate::error::{McfError, Result};
use crate::geometry::GeometryState;

/// Power of `4π(t₀ − t)` in the kernel normalisation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "camelCase")]
pub enum DensityExponent {
    /// `n/2` with the ambient dimension.
    Ambient,
    /// `m/2` with the intrinsic dimension; a plane has density one.
    #[default]
    Intrinsic,
}

/// Density `∫ ρ dμ` and the drift integral `∫ |H + (F−y₀)⊥ / (2(t₀−t))|² ρ dμ`.
pub fn gaussian_density(gs: &GeometryState, t0: f64, center: &[f64], exponent: DensityExponent) -> Result<(f64, f64)> {
    let tau = t0 - gs.time;
    if !(tau > 0.0) {
        return Err(McfError::InvalidInput(format!("kernel time {t0} must exceed the snapshot time {}", gs.time)));
    }
    let d = match exponent {
        DensityExponent::Ambient => gs.n,
        DensityExponent::Intrinsic => gs.m,
    } as f64;
    let norm = (4.0 * std::f64::consts::PI * tau).powf(-0.5 * d);
    let nodes = gs.node_count();
    let mut rho = Vec::with_capacity(nodes);
    let mut drift = Vec::with_capacity(nodes);
    for node in 0..nodes {
        let y: Vec<f64> = gs.point(node).iter().zip(center).map(|(a, b)| a - b).collect();
        let r2: f64 = y.iter().map(|x| x * x).sum();
        let k = norm * (-r2 / (4.0 * tau)).exp();
        let yp = gs.normal_part(node, &y);
        let v: f64 = gs.h.at(node).iter().zip(&yp).map(|(h, p)| (h + p / (2.0 * tau)).powi(2)).sum();
        rho.push(k);
        drift.push(v * k);
    }
    Ok((gs.integrate(&rho), gs.integrate(&drift)))
}

pub struct GaussianDensityMonitor {
    t0: f64,
    center: Option<Vec<f64>>,
    exponent: DensityExponent,
    tolerance: f64,
    compact: bool,
    m: usize,
    n: usize,
    density: Series,
    drift: Vec<f64>,
}

impl GaussianDensityMonitor {
    pub fn new(ctx: &MonitorContext, t0: f64, center: Option<Vec<f64>>, exponent: DensityExponent, tolerance: f64) -> Result<Self> {
        if let Some(c) = &center {
            if c.len() != ctx.scenario.n {
                return Err(McfError::Config(format!("kernel center needs {} components", ctx.scenario.n)));
            }
        }
        Ok(Self {
            t0,
            center,
            exponent,
            tolerance,
            compact: ctx.scenario.compact,
            m: ctx.scenario.m,
            n: ctx.scenario.n,
            density: Series::new("density"),
            drift: Vec::new(),
        })
    }
}

impl Monitor for GaussianDensityMonitor {
    fn observe(&mut self, obs: &Observation<'_>) -> Result<()> {
        if !self.compact {
            return Ok(());
        }
        let center = self.center.clone().unwrap_or_else(|| vec![0.0; self.n]);
        let (theta, drift) = gaussian_density(obs.geometry, self.t0, &center, self.exponent)?;
        self.density.push(obs.geometry.time, theta);
        self.drift.push(drift);
        Ok(())
    }

    fn finish(self: Box<Self>) -> MonitorResult {
        let mut r = MonitorResult::new("gaussian_density", self.tolerance)
            .param("t0", self.t0)
            .param("exponent", self.exponent)
            .param("center", self.center.clone().unwrap_or_else(|| vec![0.0; self.n]));
        if !self.compact {
            r.note = Some("density is only evaluated on closed submanifolds".into());
            return r;
        }
        // d/dt Θ = −∫|H + y⊥/2τ|² ρ dμ + (d − m)/(2τ) Θ
        let extra = match self.exponent {
            DensityExponent::Ambient => (self.n - self.m) as f64,
            DensityExponent::Intrinsic => 0.0,
        };
        let (t, th) = (&self.density.t, &self.density.values);
        let mut residual = Series::new("identity_residual");
        let mut worst_step: f64 = 0.0;
        for k in 0..th.len().saturating_sub(1) {
            let dt = t[k + 1] - t[k];
            let rhs = |j: usize| -self.drift[j] + extra / (2.0 * (self.t0 - t[j])) * th[j];
            residual.push(0.5 * (t[k] + t[k + 1]), (th[k + 1] - th[k]) / dt - 0.5 * (rhs(k) + rhs(k + 1)));
            worst_step = worst_step.max((th[k + 1] - th[k]) / th[k]);
        }
        if let Some(&first) = th.first() {
            let dev = th.iter().map(|x| (x - first).abs() / first).fold(0.0, f64::max);
            r.summary.insert("max_relative_deviation".into(), dev);
            r.summary.insert("max_relative_increase".into(), worst_step);
            r.summary.insert("max_identity_residual".into(), residual.values.iter().fold(0.0, |m, x| m.max(x.abs())));
            match self.exponent {
                DensityExponent::Intrinsic => {
                    r.verdict = if worst_step <= self.tolerance { Verdict::Pass } else { Verdict::Fail };
                }
                DensityExponent::Ambient => {
                    r.note = Some("monotonicity is asserted only with the intrinsic exponent".into());
                }
            }
        }
        r.series = vec![self.density, residual];
        r
    }
}
