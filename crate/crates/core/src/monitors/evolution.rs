//! Residuals of the pointwise evolution equations from snapshot triples.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Monitor, MonitorContext, MonitorResult, Observation, Series, Verdict};
use crate::error::{McfError, Result};
use crate::geometry::{covariant_derivative, GeometryState};
use crate::grid;
use crate::structure::swap_leading;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Quantity {
    Metric,
    VolumeForm,
    MeanCurvature,
    SecondFundamentalForm,
    NormalCurvature,
    GraphDensity,
}

impl Quantity {
    pub const ALL: [Quantity; 6] = [
        Quantity::Metric,
        Quantity::VolumeForm,
        Quantity::MeanCurvature,
        Quantity::SecondFundamentalForm,
        Quantity::NormalCurvature,
        Quantity::GraphDensity,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Self::Metric => "g",
            Self::VolumeForm => "sqrt_det_g",
            Self::MeanCurvature => "H2",
            Self::SecondFundamentalForm => "A2",
            Self::NormalCurvature => "Rperp2",
            Self::GraphDensity => "w",
        }
    }
}

/// Sup-norm residuals at the middle snapshot of a uniform triple.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualSet {
    pub time: f64,
    pub spacing: f64,
    pub values: BTreeMap<Quantity, f64>,
}

fn sup_abs(v: impl ParallelIterator<Item = f64>) -> f64 {
    v.map(f64::abs).reduce(|| 0.0, f64::max)
}

/// `|∇⊥H|² = |∇_i H + a_i^l F_l|²` at every node.
fn normal_gradient_h_sq(gs: &GeometryState) -> Vec<f64> {
    let (m, n) = (gs.m, gs.n);
    let gh = grid::gradient(&gs.domain, &gs.h, gs.order);
    (0..gs.node_count())
        .into_par_iter()
        .map(|node| {
            let ginv = gs.metric_inv.at(node);
            let a = gs.a_tensor.at(node);
            let df = gs.df.at(node);
            let d = gh.at(node);
            let mut x = vec![0.0; m * n];
            for i in 0..m {
                for al in 0..n {
                    let mut v = d[i * n + al];
                    for j in 0..m {
                        for l in 0..m {
                            v += a[i * m + j] * ginv[j * m + l] * df[al * m + l];
                        }
                    }
                    x[i * n + al] = v;
                }
            }
            let mut s = 0.0;
            for i in 0..m {
                for j in 0..m {
                    s += ginv[i * m + j] * (0..n).map(|al| x[i * n + al] * x[j * n + al]).sum::<f64>();
                }
            }
            s
        })
        .collect()
}

/// `|∇R⊥|²` with the full connection, ambient indices differentiated componentwise.
pub fn grad_rperp_sq(gs: &GeometryState) -> Vec<f64> {
    let (m, n) = (gs.m, gs.n);
    let d = covariant_derivative(&gs.domain, &gs.rperp, &gs.christoffel, m, n * n, 2, gs.order);
    let d = swap_leading(&d, m, n * n);
    (0..gs.node_count()).into_par_iter().map(|node| gs.tensor_norm_sq(node, d.at(node), n * n, 3)).collect()
}

/// `R_{αβ}{}^{mk} ∇_l A^α_{ik} ∇^l A^{βi}{}_m`, the gradient coupling that the
/// `|R⊥|²` equation carries besides `|∇R⊥|²`. It vanishes with `R⊥`.
pub fn rperp_gradient_coupling(gs: &GeometryState) -> Vec<f64> {
    let (m, n) = (gs.m, gs.n);
    (0..gs.node_count())
        .into_par_iter()
        .map(|node| {
            let ginv = gs.metric_inv.at(node);
            let r = gs.rperp.at(node);
            let da = gs.grad_a.at(node);
            let at = |l: usize, al: usize, i: usize, j: usize| ((l * n + al) * m + i) * m + j;
            let mut up = vec![0.0; m * n * m * m];
            for l in 0..m {
                for be in 0..n {
                    for i in 0..m {
                        for mm in 0..m {
                            let mut v = 0.0;
                            for l2 in 0..m {
                                for i2 in 0..m {
                                    for m2 in 0..m {
                                        v += ginv[l * m + l2]
                                            * ginv[i * m + i2]
                                            * ginv[mm * m + m2]
                                            * da[at(l2, be, i2, m2)];
                                    }
                                }
                            }
                            up[at(l, be, i, mm)] = v;
                        }
                    }
                }
            }
            let mut q = 0.0;
            for al in 0..n {
                for be in 0..n {
                    for mm in 0..m {
                        for k in 0..m {
                            let rk: f64 =
                                (0..m).map(|k2| r[((al * n + be) * m + mm) * m + k2] * ginv[k2 * m + k]).sum();
                            if rk == 0.0 {
                                continue;
                            }
                            for l in 0..m {
                                for i in 0..m {
                                    q += rk * da[at(l, al, i, k)] * up[at(l, be, i, mm)];
                                }
                            }
                        }
                    }
                }
            }
            q
        })
        .collect()
}

/// Three-point time derivative of each monitored field minus the right-hand side of
/// its evolution equation, evaluated at `mid`. `w` carries the graph density of
/// the three snapshots when it is to be checked.
pub fn evolution_residuals(
    prev: &GeometryState,
    mid: &GeometryState,
    next: &GeometryState,
    w: Option<[&[f64]; 3]>,
    quantities: &[Quantity],
) -> Result<ResidualSet> {
    let (d1, d2) = (mid.time - prev.time, next.time - mid.time);
    if !(d1 > 0.0 && d2 > 0.0) || d1 > 2.0 * d2 || d2 > 2.0 * d1 {
        return Err(McfError::NonUniformSpacing(format!("steps {d1:e} and {d2:e}")));
    }
    // three-point derivative at the middle time; the central difference when d1 = d2
    let (c0, c1, c2) = (-d2 / (d1 * (d1 + d2)), (d2 - d1) / (d1 * d2), d1 / (d2 * (d1 + d2)));
    let nodes = mid.node_count();
    let ddt = |a: &[f64], b: &[f64], c: &[f64]| -> Vec<f64> {
        (0..a.len()).map(|i| c0 * a[i] + c1 * b[i] + c2 * c[i]).collect()
    };
    let mut values = BTreeMap::new();
    for &q in quantities {
        let r = match q {
            Quantity::Metric => {
                let dg = ddt(&prev.metric.data, &mid.metric.data, &next.metric.data);
                sup_abs(dg.par_iter().zip(mid.a_tensor.data.par_iter()).map(|(d, a)| d + 2.0 * a))
            }
            Quantity::VolumeForm => {
                let d = ddt(&prev.sqrt_det, &mid.sqrt_det, &next.sqrt_det);
                sup_abs((0..nodes).into_par_iter().map(|i| d[i] + mid.norm_h_sq[i] * mid.sqrt_det[i]))
            }
            Quantity::MeanCurvature => {
                let d = ddt(&prev.norm_h_sq, &mid.norm_h_sq, &next.norm_h_sq);
                let lap = mid.laplacian(&mid.norm_h_sq);
                let gh = normal_gradient_h_sq(mid);
                sup_abs((0..nodes).into_par_iter().map(|i| {
                    d[i] - (lap[i] - 2.0 * gh[i] + 2.0 * mid.norm_a_tensor_sq[i])
                }))
            }
            Quantity::SecondFundamentalForm => {
                let d = ddt(&prev.norm_a_sq, &mid.norm_a_sq, &next.norm_a_sq);
                let lap = mid.laplacian(&mid.norm_a_sq);
                sup_abs((0..nodes).into_par_iter().map(|i| {
                    d[i] - (lap[i] - 2.0 * mid.norm_grad_perp_a_sq[i]
                        + 2.0 * mid.normal_gram_sq[i]
                        + 2.0 * mid.norm_rperp_sq[i])
                }))
            }
            Quantity::NormalCurvature => {
                let d = ddt(&prev.norm_rperp_sq, &mid.norm_rperp_sq, &next.norm_rperp_sq);
                let lap = mid.laplacian(&mid.norm_rperp_sq);
                let gr = grad_rperp_sq(mid);
                let q = rperp_gradient_coupling(mid);
                sup_abs((0..nodes).into_par_iter().map(|i| {
                    d[i] - (lap[i] - 2.0 * gr[i] + 8.0 * q[i] + mid.rperp_reaction[i])
                }))
            }
            Quantity::GraphDensity => {
                let Some([w0, w1, w2]) = w else { continue };
                let d = ddt(w0, w1, w2);
                let lap = mid.laplacian(w1);
                sup_abs((0..nodes).into_par_iter().map(|i| d[i] - (lap[i] + w1[i] * mid.norm_a_sq[i])))
            }
        };
        values.insert(q, r);
    }
    Ok(ResidualSet { time: mid.time, spacing: d1.max(d2), values })
}

/// Evaluates [`evolution_residuals`] on every window of three consecutive snapshots.
pub struct EvolutionMonitor {
    tolerance: f64,
    quantities: Vec<Quantity>,
    window: Vec<(GeometryState, Option<Vec<f64>>)>,
    sets: Vec<ResidualSet>,
    skipped: usize,
    notes: Vec<String>,
}

impl EvolutionMonitor {
    pub fn new(ctx: &MonitorContext, tolerance: f64, quantities: Option<Vec<Quantity>>) -> Self {
        let mut quantities = quantities.unwrap_or_else(|| Quantity::ALL.to_vec());
        let mut notes = Vec::new();
        if quantities.contains(&Quantity::GraphDensity) && !(ctx.omega.is_some() && ctx.scenario.flat_normal_bundle) {
            quantities.retain(|q| *q != Quantity::GraphDensity);
            notes.push("w equation not applicable: needs a parallel form and a flat normal bundle".into());
        }
        Self { tolerance, quantities, window: Vec::new(), sets: Vec::new(), skipped: 0, notes }
    }
}

impl Monitor for EvolutionMonitor {
    fn observe(&mut self, obs: &Observation<'_>) -> Result<()> {
        self.window.push((obs.geometry.clone(), obs.graph.map(|g| g.w.clone())));
        if self.window.len() > 3 {
            self.window.remove(0);
        }
        if self.window.len() == 3 {
            let w = match (&self.window[0].1, &self.window[1].1, &self.window[2].1) {
                (Some(a), Some(b), Some(c)) => Some([a.as_slice(), b.as_slice(), c.as_slice()]),
                _ => None,
            };
            match evolution_residuals(&self.window[0].0, &self.window[1].0, &self.window[2].0, w, &self.quantities) {
                Ok(set) => self.sets.push(set),
                Err(McfError::NonUniformSpacing(_)) => self.skipped += 1,
                Err(e) => return Err(e),
            }
        }
        Ok(())
    }

    fn finish(self: Box<Self>) -> MonitorResult {
        let mut r = MonitorResult::new("evolution_residuals", self.tolerance)
            .param("quantities", self.quantities.iter().map(|q| q.key()).collect::<Vec<_>>());
        let mut notes = self.notes;
        if self.skipped > 0 {
            notes.push(format!("{} windows skipped for uneven spacing", self.skipped));
        }
        if self.sets.is_empty() {
            notes.push("no window of three evenly spaced snapshots".into());
        } else {
            let mut ok = true;
            for q in &self.quantities {
                let mut s = Series::new(q.key());
                for set in &self.sets {
                    s.push(set.time, set.values[q]);
                }
                r.summary.insert(format!("first.{}", q.key()), s.values[0]);
                r.summary.insert(format!("max.{}", q.key()), s.max());
                ok &= s.max() <= self.tolerance;
                r.series.push(s);
            }
            r.summary.insert("first.spacing".into(), self.sets[0].spacing);
            r.verdict = if ok { Verdict::Pass } else { Verdict::Fail };
        }
        if !notes.is_empty() {
            r.note = Some(notes.join("; "));
        }
        r
    }
}
