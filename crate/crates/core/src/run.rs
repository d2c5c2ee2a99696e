//! Orchestration: scenario → flow → monitors → report and files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::coords::graph_w;
use crate::error::Result;
use crate::flow::{integrate, FlowStatus, StepRecord, Trajectory};
use crate::geometry::{build_geometry, GeometryState};
use crate::monitors::{MonitorContext, MonitorResult, Observation, Series, Verdict};
use crate::scenarios::{make_scenario, perturb};
use crate::snapshot::render_snapshot;

/// Everything a run reports, free of wall-clock data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub config_hash: String,
    pub scenario: String,
    pub grid: Vec<usize>,
    pub ambient_dimension: usize,
    pub integrator: String,
    pub stencil_order: u8,
    pub normalized: bool,
    pub status: FlowStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_rperp_sup: Option<f64>,
    pub skipped_snapshots: usize,
    pub step_log: Vec<StepRecord>,
    pub monitors: Vec<MonitorResult>,
}

impl DiagnosticsReport {
    pub fn any_fail(&self) -> bool {
        self.monitors.iter().any(|m| m.verdict == Verdict::Fail)
    }

    pub fn monitor(&self, name: &str) -> Option<&MonitorResult> {
        self.monitors.iter().find(|m| m.name == name)
    }
}

/// Runs the configured flow, feeding every recorded snapshot to the monitors
/// and to `on_snapshot`.
pub fn run_flow_with(
    cfg: &RunConfig,
    mut on_snapshot: impl FnMut(usize, &GeometryState, Option<&[f64]>) -> Result<()>,
) -> Result<(Trajectory, DiagnosticsReport)> {
    cfg.validate()?;
    let mut initial = make_scenario(&cfg.scenario)?;
    let mut initial_rperp_sup = None;
    if let Some(p) = &cfg.perturbation {
        let pert = perturb(&initial, p.amplitude, p.seed)?;
        initial = pert.grid;
        initial_rperp_sup = Some(pert.initial_rperp_sup);
    }
    let info = cfg.scenario.info();
    let omega = cfg.effective_omega();
    let ctx = MonitorContext { scenario: info.clone(), omega: omega.clone() };
    let mut monitors = cfg.monitors.iter().map(|m| m.build(&ctx)).collect::<Result<Vec<_>>>()?;
    let order = cfg.flow.stencil;
    let mut index = 0usize;
    let mut skipped = 0usize;
    let traj = integrate(&initial, &cfg.flow, |grid| {
        let k = index;
        index += 1;
        if monitors.is_empty() && cfg.output.snapshot_every == 0 {
            return Ok(());
        }
        let gs = match build_geometry(grid, order) {
            Ok(gs) => gs,
            Err(_) => {
                skipped += 1;
                return Ok(());
            }
        };
        let graph = match &omega {
            Some(w) => Some(graph_w(&gs, w)?),
            None => None,
        };
        let obs = Observation { grid, geometry: &gs, graph: graph.as_ref() };
        for m in monitors.iter_mut() {
            m.observe(&obs)?;
        }
        on_snapshot(k, &gs, graph.as_ref().map(|g| g.w.as_slice()))
    })?;
    let report = DiagnosticsReport {
        config_hash: cfg.hash(),
        scenario: info.id.to_string(),
        grid: initial.domain.sizes().to_vec(),
        ambient_dimension: info.n,
        integrator: serde_json::to_value(cfg.flow.integrator)?.as_str().unwrap_or_default().to_string(),
        stencil_order: cfg.flow.stencil.into(),
        normalized: cfg.flow.normalized,
        status: traj.status.clone(),
        initial_rperp_sup,
        skipped_snapshots: skipped,
        step_log: traj.log.clone(),
        monitors: monitors.into_iter().map(|m| m.finish()).collect(),
    };
    Ok((traj, report))
}

pub fn run_flow(cfg: &RunConfig) -> Result<(Trajectory, DiagnosticsReport)> {
    run_flow_with(cfg, |_, _, _| Ok(()))
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_MONITOR_FAIL: i32 = 2;
pub const EXIT_SINGULAR: i32 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_path: Option<PathBuf>,
    pub config_hash: String,
    pub output_dir: PathBuf,
    pub artifacts: Vec<PathBuf>,
    pub exit_status: i32,
}

/// Renders a series as CSV with columns `t,value`.
pub fn series_csv(s: &Series) -> String {
    let mut out = String::from("t,value\n");
    for (t, v) in s.t.iter().zip(&s.values) {
        out.push_str(&format!("{t:.17e},{v:.17e}\n"));
    }
    out
}

fn sanitize(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' }).collect()
}

/// Exit status implied by a report.
pub fn exit_status(cfg: &RunConfig, report: &DiagnosticsReport) -> i32 {
    if cfg.output.require_completion && matches!(report.status, FlowStatus::Singularity { .. }) {
        EXIT_SINGULAR
    } else if report.any_fail() {
        EXIT_MONITOR_FAIL
    } else {
        EXIT_OK
    }
}

/// Runs a configuration and writes the report, series CSVs, snapshots, the
/// effective configuration and a manifest into `out_dir`.
pub fn run_simulation(
    cfg: &RunConfig,
    config_path: Option<&Path>,
    out_dir: &Path,
) -> Result<(RunManifest, DiagnosticsReport)> {
    fs::create_dir_all(out_dir)?;
    let mut artifacts: Vec<PathBuf> = Vec::new();
    let snap_every = cfg.output.snapshot_every;
    let snap_dir = out_dir.join("snapshots");
    let (_, report) = run_flow_with(cfg, |k, gs, w| {
        if snap_every > 0 && k % snap_every == 0 {
            fs::create_dir_all(&snap_dir)?;
            let p = snap_dir.join(format!("snapshot_{k:05}.txt"));
            fs::write(&p, render_snapshot(gs, w))?;
            artifacts.push(p);
        }
        Ok(())
    })?;
    let mut write = |name: String, body: String| -> Result<()> {
        let p = out_dir.join(name);
        fs::write(&p, body)?;
        artifacts.push(p);
        Ok(())
    };
    write("config.toml".into(), cfg.to_toml())?;
    write("report.json".into(), serde_json::to_string_pretty(&report)?)?;
    let mut log = String::from("step,t,dt,sup_A2,sup_H,area\n");
    for r in &report.step_log {
        log.push_str(&format!(
            "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
            r.step, r.time, r.dt, r.sup_a_sq, r.sup_h, r.area
        ));
    }
    write("step_log.csv".into(), log)?;
    for (i, m) in report.monitors.iter().enumerate() {
        for s in &m.series {
            write(format!("{i:02}_{}_{}.csv", sanitize(&m.name), sanitize(&s.name)), series_csv(s))?;
        }
    }
    let manifest_path = out_dir.join("manifest.json");
    artifacts.push(manifest_path.clone());
    let manifest = RunManifest {
        config_path: config_path.map(Path::to_path_buf),
        config_hash: report.config_hash.clone(),
        output_dir: out_dir.to_path_buf(),
        artifacts,
        exit_status: exit_status(cfg, &report),
    };
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)?;
    Ok((manifest, report))
}
