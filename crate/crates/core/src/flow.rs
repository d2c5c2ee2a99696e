//! Parametric time stepping of `dF/dt = H` and of the normalized flow
//! `dF̃/ds = H̃ − F̃`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{McfError, Result};
use crate::geometry::metric_node;
use crate::grid::{self, ImmersionGrid, StencilOrder};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "camelCase")]
pub enum Integrator {
    ExplicitEuler,
    #[default]
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase", deny_unknown_fields)]
pub enum StepPolicy {
    /// `Δt = factor · h² · λ_min(g)`, recomputed every step.
    Cfl { factor: f64 },
    Fixed { dt: f64 },
}

impl Default for StepPolicy {
    fn default() -> Self {
        Self::Cfl { factor: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct FlowSettings {
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default)]
    pub stencil: StencilOrder,
    #[serde(default)]
    pub step: StepPolicy,
    pub t_end: f64,
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: usize,
    #[serde(default)]
    pub normalized: bool,
    /// Stop once `sup |A|²` exceeds this value.
    #[serde(default = "default_curvature_cap")]
    pub curvature_cap: f64,
    #[serde(default = "default_min_dt")]
    pub min_dt: f64,
}

fn default_snapshot_every() -> usize {
    10
}
fn default_curvature_cap() -> f64 {
    1e6
}
fn default_min_dt() -> f64 {
    1e-12
}

impl FlowSettings {
    pub fn new(t_end: f64) -> Self {
        Self {
            integrator: Integrator::Rk4,
            stencil: StencilOrder::Second,
            step: StepPolicy::default(),
            t_end,
            snapshot_every: default_snapshot_every(),
            normalized: false,
            curvature_cap: default_curvature_cap(),
            min_dt: default_min_dt(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(McfError::Config(format!("tEnd must be positive, got {}", self.t_end)));
        }
        match self.step {
            StepPolicy::Cfl { factor } if !(factor > 0.0 && factor <= 0.5) => {
                return Err(McfError::Config(format!("cfl factor must lie in (0, 0.5], got {factor}")));
            }
            StepPolicy::Fixed { dt } if !(dt.is_finite() && dt > 0.0) => {
                return Err(McfError::Config(format!("fixed dt must be positive, got {dt}")));
            }
            _ => {}
        }
        if self.snapshot_every == 0 {
            return Err(McfError::Config("snapshotEvery must be at least 1".into()));
        }
        Ok(())
    }
}

/// Cheap per-step diagnostics and the velocity of the current state.
#[derive(Debug, Clone)]
pub struct Probe {
    pub velocity: Vec<f64>,
    pub sup_a_sq: f64,
    pub sup_h: f64,
    pub min_metric_eigenvalue: f64,
    pub area: f64,
}

/// Evaluates `H` (or `H − F` when `normalized`) along with curvature bounds.
pub fn probe(im: &ImmersionGrid, order: StencilOrder, normalized: bool) -> Result<Probe> {
    let (m, n) = (im.dim(), im.ambient_dim());
    let (df, ddf) = grid::position_derivatives(im, order);
    let per: Vec<Option<(Vec<f64>, f64, f64, f64, f64)>> = (0..im.node_count())
        .into_par_iter()
        .map(|node| {
            let mn = metric_node(df.at(node), ddf.at(node), m, n)?;
            let mut a2 = 0.0;
            for al in 0..n {
                let a = &mn.a[al * m * m..(al + 1) * m * m];
                for i in 0..m {
                    for j in 0..m {
                        for p in 0..m {
                            for q in 0..m {
                                a2 += a[i * m + j] * a[p * m + q] * mn.ginv[i * m + p] * mn.ginv[j * m + q];
                            }
                        }
                    }
                }
            }
            let h = mn.h.iter().map(|x| x * x).sum::<f64>().sqrt();
            let mut v = mn.h;
            if normalized {
                v.iter_mut().zip(im.point(node)).for_each(|(a, b)| *a -= b);
            }
            Some((v, a2, h, linalg::min_eigenvalue(&mn.g, m), mn.det.sqrt()))
        })
        .collect();
    if let Some(bad) = per.iter().position(Option::is_none) {
        return Err(McfError::Degenerate { node: bad, det: 0.0 });
    }
    let cell: f64 = (0..m).map(|a| im.domain.spacing(a)).product();
    let mut p = Probe {
        velocity: Vec::with_capacity(im.node_count() * n),
        sup_a_sq: 0.0,
        sup_h: 0.0,
        min_metric_eigenvalue: f64::INFINITY,
        area: 0.0,
    };
    for (v, a2, h, lam, sd) in per.into_iter().flatten() {
        p.velocity.extend(v);
        p.sup_a_sq = p.sup_a_sq.max(a2);
        p.sup_h = p.sup_h.max(h);
        p.min_metric_eigenvalue = p.min_metric_eigenvalue.min(lam);
        p.area += sd * cell;
    }
    Ok(p)
}

fn shifted(base: &ImmersionGrid, points: &[f64], shifts: &[f64], dt_points: f64, k: &[f64], k_shift: &[f64]) -> ImmersionGrid {
    let mut im = base.clone();
    im.points_mut().iter_mut().zip(points.iter().zip(k)).for_each(|(p, (x, v))| *p = x + dt_points * v);
    let n = base.ambient_dim();
    let new_shifts: Vec<Vec<f64>> = shifts
        .chunks(n)
        .zip(k_shift.chunks(n))
        .map(|(s, ks)| s.iter().zip(ks).map(|(a, b)| a + dt_points * b).collect())
        .collect();
    im.domain.set_shifts(new_shifts);
    im
}

fn flat_shifts(im: &ImmersionGrid) -> Vec<f64> {
    im.domain.shifts().concat()
}

/// Advances one step of size `dt`. `first` may carry an already evaluated
/// velocity at `im`.
pub fn step_with(
    im: &ImmersionGrid,
    dt: f64,
    integrator: Integrator,
    order: StencilOrder,
    normalized: bool,
    first: Option<Vec<f64>>,
) -> Result<ImmersionGrid> {
    let velocity = |g: &ImmersionGrid| -> Result<(Vec<f64>, Vec<f64>)> {
        let v = probe_velocity(g, order, normalized)?;
        let ks = if normalized { flat_shifts(g).iter().map(|s| -s).collect() } else { vec![0.0; flat_shifts(g).len()] };
        Ok((v, ks))
    };
    let x0 = im.points().to_vec();
    let s0 = flat_shifts(im);
    let (k1, ks1) = match first {
        Some(v) => {
            let ks = if normalized { s0.iter().map(|s| -s).collect() } else { vec![0.0; s0.len()] };
            (v, ks)
        }
        None => velocity(im)?,
    };
    let mut out = match integrator {
        Integrator::ExplicitEuler => shifted(im, &x0, &s0, dt, &k1, &ks1),
        Integrator::Rk4 => {
            let (k2, ks2) = velocity(&shifted(im, &x0, &s0, 0.5 * dt, &k1, &ks1))?;
            let (k3, ks3) = velocity(&shifted(im, &x0, &s0, 0.5 * dt, &k2, &ks2))?;
            let (k4, ks4) = velocity(&shifted(im, &x0, &s0, dt, &k3, &ks3))?;
            let comb = |a: &[f64], b: &[f64], c: &[f64], d: &[f64]| -> Vec<f64> {
                (0..a.len()).map(|i| (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]) / 6.0).collect()
            };
            shifted(im, &x0, &s0, dt, &comb(&k1, &k2, &k3, &k4), &comb(&ks1, &ks2, &ks3, &ks4))
        }
    };
    if !normalized {
        // keep the translation data bit-exact
        out.domain.set_shifts(im.domain.shifts().to_vec());
    }
    out.time = im.time + dt;
    Ok(out)
}

fn probe_velocity(im: &ImmersionGrid, order: StencilOrder, normalized: bool) -> Result<Vec<f64>> {
    let h = crate::geometry::mean_curvature_field(im, order)?;
    let mut v = h.data;
    if normalized {
        v.iter_mut().zip(im.points()).for_each(|(a, b)| *a -= b);
    }
    Ok(v)
}

/// One step of `dF/dt = H`.
pub fn step(im: &ImmersionGrid, dt: f64, integrator: Integrator, order: StencilOrder) -> Result<ImmersionGrid> {
    step_with(im, dt, integrator, order, false, None)
}

/// One step of `dF̃/ds = H̃ − F̃`; equivariance shifts decay as `e^{−s}`.
pub fn normalized_step(im: &ImmersionGrid, ds: f64, integrator: Integrator, order: StencilOrder) -> Result<ImmersionGrid> {
    step_with(im, ds, integrator, order, true, None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub dt: f64,
    pub sup_a_sq: f64,
    pub sup_h: f64,
    pub area: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "camelCase")]
pub enum FlowStatus {
    Completed,
    Singularity { last_time: f64, reason: String },
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<ImmersionGrid>,
    pub log: Vec<StepRecord>,
    pub status: FlowStatus,
    pub normalized: bool,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.time).collect()
    }

    pub fn last(&self) -> &ImmersionGrid {
        self.snapshots.last().expect("trajectory holds the initial snapshot")
    }
}

/// Integrates from `initial` until `t_end` or a singularity, calling `observe`
/// on every recorded snapshot (the initial state included).
pub fn integrate(
    initial: &ImmersionGrid,
    settings: &FlowSettings,
    mut observe: impl FnMut(&ImmersionGrid) -> Result<()>,
) -> Result<Trajectory> {
    settings.validate()?;
    let order = settings.stencil;
    let t0 = initial.time;
    let t_end = t0 + settings.t_end;
    let mut cur = initial.clone();
    let mut snapshots = vec![cur.clone()];
    observe(&cur)?;
    let mut log = Vec::new();
    let h = cur.domain.min_spacing();
    let mut status = FlowStatus::Completed;
    let mut steps = 0usize;
    let stop = |t: f64, reason: String| FlowStatus::Singularity { last_time: t, reason };
    while cur.time < t_end - 1e-14 * t_end.abs().max(1.0) {
        let p = match probe(&cur, order, settings.normalized) {
            Ok(p) => p,
            Err(e) => {
                status = stop(cur.time, e.to_string());
                break;
            }
        };
        if !(p.sup_a_sq <= settings.curvature_cap) {
            status = stop(cur.time, format!("sup |A|² = {:e} exceeds the cap", p.sup_a_sq));
            break;
        }
        let mut dt = match settings.step {
            StepPolicy::Cfl { factor } => factor * h * h * p.min_metric_eigenvalue,
            StepPolicy::Fixed { dt } => dt,
        };
        if !(dt >= settings.min_dt) {
            status = stop(cur.time, format!("time step {dt:e} below the minimum"));
            break;
        }
        let remaining = t_end - cur.time;
        let last = dt >= remaining * (1.0 - 1e-12);
        if last {
            dt = remaining;
        }
        log.push(StepRecord { step: steps, time: cur.time, dt, sup_a_sq: p.sup_a_sq, sup_h: p.sup_h, area: p.area });
        let next = match step_with(&cur, dt, settings.integrator, order, settings.normalized, Some(p.velocity)) {
            Ok(nx) => nx,
            Err(e) => {
                status = stop(cur.time, e.to_string());
                break;
            }
        };
        cur = next;
        if last {
            cur.time = t_end;
        }
        steps += 1;
        if steps.is_multiple_of(settings.snapshot_every) || last {
            observe(&cur)?;
            snapshots.push(cur.clone());
        }
    }
    if matches!(status, FlowStatus::Singularity { .. }) && snapshots.last().map(|s| s.time) != Some(cur.time) {
        observe(&cur)?;
        snapshots.push(cur);
    }
    Ok(Trajectory { snapshots, log, status, normalized: settings.normalized })
}

/// `s = ½ ln(2t + 1)`.
pub fn rescaled_time(t: f64) -> f64 {
    0.5 * (2.0 * t + 1.0).ln()
}

/// Inverse of [`rescaled_time`].
pub fn unrescaled_time(s: f64) -> f64 {
    0.5 * ((2.0 * s).exp() - 1.0)
}

/// Maps an unnormalized snapshot to `F̃ = F / √(2t+1)` at time `s`.
pub fn rescale_snapshot(im: &ImmersionGrid) -> ImmersionGrid {
    let scale = 1.0 / (2.0 * im.time + 1.0).sqrt();
    let mut out = im.clone();
    out.points_mut().iter_mut().for_each(|x| *x *= scale);
    let shifts: Vec<Vec<f64>> = im.domain.shifts().iter().map(|s| s.iter().map(|x| x * scale).collect()).collect();
    out.domain.set_shifts(shifts);
    out.time = rescaled_time(im.time);
    out
}

pub fn rescale_trajectory(traj: &Trajectory) -> Result<Trajectory> {
    if traj.normalized {
        return Err(McfError::InvalidInput("trajectory is already normalized".into()));
    }
    let snapshots: Vec<ImmersionGrid> = traj.snapshots.iter().map(rescale_snapshot).collect();
    let log = traj
        .log
        .iter()
        .map(|r| {
            let f = 2.0 * r.time + 1.0;
            StepRecord {
                step: r.step,
                time: rescaled_time(r.time),
                dt: rescaled_time(r.time + r.dt) - rescaled_time(r.time),
                sup_a_sq: r.sup_a_sq * f,
                sup_h: r.sup_h * f.sqrt(),
                area: r.area / f.powf(0.5 * snapshots[0].dim() as f64),
            }
        })
        .collect();
    let status = match &traj.status {
        FlowStatus::Singularity { last_time, reason } => {
            FlowStatus::Singularity { last_time: rescaled_time(*last_time), reason: reason.clone() }
        }
        s => s.clone(),
    };
    Ok(Trajectory { snapshots, log, status, normalized: true })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{make_scenario, ScenarioSpec};

    fn circle_radius(im: &ImmersionGrid) -> f64 {
        let n = im.node_count();
        (0..n).map(|i| im.point(i).iter().map(|x| x * x).sum::<f64>().sqrt()).sum::<f64>() / n as f64
    }

    #[test]
    fn plane_is_a_fixed_point() {
        let im = make_scenario(&ScenarioSpec::Plane { ambient: 4, nodes: 16 }).unwrap();
        let next = step(&im, 1e-3, Integrator::Rk4, StencilOrder::Second).unwrap();
        let diff = im.points().iter().zip(next.points()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-14);
        assert_eq!(next.domain.shifts(), im.domain.shifts());
    }

    #[test]
    fn euler_is_first_order_in_time() {
        let im = make_scenario(&ScenarioSpec::Circle { radius: 1.0, ambient: 3, nodes: 32 }).unwrap();
        let run = |dt: f64| {
            let mut s = FlowSettings::new(0.1);
            s.integrator = Integrator::ExplicitEuler;
            s.step = StepPolicy::Fixed { dt };
            s.stencil = StencilOrder::Fourth;
            circle_radius(integrate(&im, &s, |_| Ok(())).unwrap().last())
        };
        let (a, b, c) = (run(4e-4), run(2e-4), run(1e-4));
        let ratio = (a - b) / (b - c);
        assert!((ratio - 2.0).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn normalized_shifts_decay_exponentially() {
        let im = make_scenario(&ScenarioSpec::Plane { ambient: 3, nodes: 16 }).unwrap();
        let mut s = FlowSettings::new(0.5);
        s.normalized = true;
        s.step = StepPolicy::Fixed { dt: 0.01 };
        let traj = integrate(&im, &s, |_| Ok(())).unwrap();
        let shift = traj.last().domain.shift(0)[0];
        assert!((shift - std::f64::consts::TAU * (-0.5f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn rescaled_circle_follows_closed_form() {
        let im = make_scenario(&ScenarioSpec::Circle { radius: 1.0, ambient: 3, nodes: 64 }).unwrap();
        let mut s = FlowSettings::new(0.3);
        s.stencil = StencilOrder::Fourth;
        let traj = rescale_trajectory(&integrate(&im, &s, |_| Ok(())).unwrap()).unwrap();
        for snap in &traj.snapshots {
            let t = unrescaled_time(snap.time);
            let expect = (1.0 - 2.0 * t).sqrt() / (2.0 * t + 1.0).sqrt();
            assert!((circle_radius(snap) - expect).abs() < 1e-5);
        }
    }

    #[test]
    fn rejects_bad_settings() {
        let mut s = FlowSettings::new(1.0);
        s.step = StepPolicy::Cfl { factor: 0.7 };
        assert!(s.validate().is_err());
        assert!(FlowSettings::new(-1.0).validate().is_err());
    }
}
