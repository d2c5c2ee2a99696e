//! The acceptance suite: ten criteria evaluated on built-in configurations.
//!
//! Outcomes carry only computed numbers, never timings, so two evaluations
//! can be compared byte for byte.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::coords::{expander_residual, graph_w};
use crate::error::{McfError, Result};
use crate::flow::{integrate, rescale_snapshot, unrescaled_time, FlowSettings, FlowStatus};
use crate::geometry::build_geometry;
use crate::grid::{ImmersionGrid, StencilOrder};
use crate::interp::base_matched_difference;
use crate::monitors::growth::growth_time_coefficient;
use crate::monitors::sup::monotone_excess;
use crate::monitors::Verdict;
use crate::run::{run_flow, RunManifest, EXIT_MONITOR_FAIL, EXIT_OK};
use crate::scenarios::{make_scenario, ScenarioSpec};
use crate::structure::check_structure_equations;
use crate::tensor_algebra::{check_pointwise_identities, gradient_values, random_fundamental_form};

pub const CRITERIA: [u8; 10] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10];

/// Window for a second-order convergence ratio under halving.
pub const QUARTER_WINDOW: (f64, f64) = (3.2, 4.8);
/// Residuals below this are at roundoff and carry no convergence information.
pub const RESIDUAL_FLOOR: f64 = 1e-10;

/// One numeric check inside a criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub label: String,
    pub value: f64,
    pub bound: String,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: u8,
    pub title: String,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl CriterionOutcome {
    fn new(id: u8, title: &str) -> Self {
        Self { id, title: title.into(), passed: true, checks: Vec::new() }
    }

    fn check(&mut self, label: impl Into<String>, value: f64, bound: impl Into<String>, ok: bool) {
        self.passed &= ok;
        self.checks.push(Check { label: label.into(), value, bound: bound.into(), ok });
    }

    fn at_most(&mut self, label: impl Into<String>, value: f64, limit: f64) {
        self.check(label, value, format!("<= {limit:e}"), value <= limit);
    }

    fn at_least(&mut self, label: impl Into<String>, value: f64, limit: f64) {
        self.check(label, value, format!(">= {limit:e}"), value >= limit);
    }

    /// Fine/coarse residual ratio, or both values below the roundoff floor.
    fn quarters(&mut self, label: &str, coarse: f64, fine: f64) {
        if coarse <= RESIDUAL_FLOOR && fine <= RESIDUAL_FLOOR {
            self.check(format!("{label} (roundoff)"), coarse.max(fine), format!("<= {RESIDUAL_FLOOR:e}"), true);
        } else {
            let r = coarse / fine;
            let (lo, hi) = QUARTER_WINDOW;
            self.check(format!("{label} ratio"), r, format!("in [{lo}, {hi}]"), (lo..=hi).contains(&r));
        }
    }

    /// One line: id, verdict, title and every check.
    pub fn line(&self) -> String {
        let mut s = format!(
            "criterion {:>2} {} {}:",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.title
        );
        for (i, c) in self.checks.iter().enumerate() {
            let _ = write!(
                s,
                "{} {} = {:.3e} {}{}",
                if i == 0 { "" } else { ";" },
                c.label,
                c.value,
                c.bound,
                if c.ok { "" } else { " (violated)" }
            );
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceReport {
    pub criteria: Vec<CriterionOutcome>,
}

impl AcceptanceReport {
    pub fn passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }

    pub fn get(&self, id: u8) -> Option<&CriterionOutcome> {
        self.criteria.iter().find(|c| c.id == id)
    }
}

/// Which criteria to evaluate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Subset {
    All,
    /// Algebraic identity fuzzing only.
    Fuzz,
    Ids(Vec<u8>),
}

impl Subset {
    pub fn ids(&self) -> Vec<u8> {
        match self {
            Self::All => CRITERIA.to_vec(),
            Self::Fuzz => vec![1],
            Self::Ids(v) => v.clone(),
        }
    }
}

impl FromStr for Subset {
    type Err = McfError;

    /// `all`, `fuzz`, or a comma-separated list of criterion numbers.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "all" => Ok(Self::All),
            "fuzz" => Ok(Self::Fuzz),
            list => {
                let mut ids = Vec::new();
                for part in list.split(',') {
                    let id: u8 = part
                        .trim()
                        .parse()
                        .map_err(|_| McfError::Config(format!("unknown subset `{part}`")))?;
                    if !CRITERIA.contains(&id) {
                        return Err(McfError::Config(format!("no criterion {id}")));
                    }
                    if !ids.contains(&id) {
                        ids.push(id);
                    }
                }
                ids.sort_unstable();
                Ok(Self::Ids(ids))
            }
        }
    }
}

fn config(text: &str) -> Result<RunConfig> {
    RunConfig::parse(text)
}

fn monitor<'a>(report: &'a crate::run::DiagnosticsReport, name: &str) -> Result<&'a crate::monitors::MonitorResult> {
    report
        .monitors
        .iter()
        .find(|m| m.name == name)
        .ok_or_else(|| McfError::InvalidInput(format!("monitor {name} missing from report")))
}

fn summary(m: &crate::monitors::MonitorResult, key: &str) -> f64 {
    m.summary.get(key).copied().unwrap_or(f64::NAN)
}

fn completed(o: &mut CriterionOutcome, label: &str, status: &FlowStatus) {
    let ok = matches!(status, FlowStatus::Completed);
    o.check(format!("{label} completed"), if ok { 1.0 } else { 0.0 }, "= 1", ok);
}

/// 1000 random samples, `m ∈ {2, 3}`, `k ∈ {1, 2, 3}`.
pub fn criterion_1() -> Result<CriterionOutcome> {
    let mut o = CriterionOutcome::new(1, "algebraic identity fuzzing");
    let mut worst_identity: f64 = 0.0;
    let mut worst_gradient: f64 = 0.0;
    for seed in 0..1000u64 {
        let m = 2 + (seed % 2) as usize;
        let k = 1 + ((seed / 2) % 3) as usize;
        let s = random_fundamental_form(seed, m, k, true);
        for r in check_pointwise_identities(&s) {
            worst_identity = worst_identity.max(r.rel);
        }
        for r in gradient_values(&s)?.residuals {
            worst_gradient = worst_gradient.max(r.rel);
        }
    }
    o.at_most("max relative identity residual", worst_identity, 1e-10);
    o.at_most("max relative gradient decomposition residual", worst_gradient, 1e-10);
    Ok(o)
}

/// Structure equations converge at second order on a reparametrized product torus.
pub fn criterion_2() -> Result<CriterionOutcome> {
    let mut o = CriterionOutcome::new(2, "structure equations");
    let residuals = |nodes: usize, warp: f64| -> Result<_> {
        let im = make_scenario(&ScenarioSpec::ProductTorus { a: 1.0, b: 2.0, warp, nodes })?;
        Ok(check_structure_equations(&build_geometry(&im, StencilOrder::Second)?))
    };
    let natural = residuals(64, 0.0)?;
    o.at_most("natural parametrization max residual 64^2", natural.max(), 1e-3);
    let coarse = residuals(64, 0.15)?;
    let fine = residuals(128, 0.15)?;
    for ((name, c), (_, f)) in coarse.named().iter().zip(fine.named().iter()) {
        if *name == "normality" {
            o.at_most("normality 128^2", *f, RESIDUAL_FLOOR);
        } else {
            o.quarters(&format!("{name} 64->128"), *c, *f);
        }
    }
    Ok(o)
}

fn radius_error(im: &ImmersionGrid, axes: &[usize], exact: f64) -> f64 {
    (0..im.node_count())
        .map(|i| (axes.iter().map(|a| im.point(i)[*a].powi(2)).sum::<f64>().sqrt() - exact).abs())
        .fold(0.0, f64::max)
}

/// Exact shrinking of the circle and the product torus.
pub fn criterion_3() -> Result<CriterionOutcome> {
    let mut o = CriterionOutcome::new(3, "shrinking laws");
    let run = |spec: ScenarioSpec, t: f64| -> Result<ImmersionGrid> {
        let mut s = FlowSettings::new(t);
        s.stencil = StencilOrder::Fourth;
        s.snapshot_every = usize::MAX;
        let traj = integrate(&make_scenario(&spec)?, &s, |_| Ok(()))?;
        Ok(traj.last().clone())
    };
    let circle = run(ScenarioSpec::Circle { radius: 1.0, ambient: 3, nodes: 128 }, 0.4)?;
    o.at_most("circle radius error t=0.4", radius_error(&circle, &[0, 1], (1.0f64 - 0.8).sqrt()), 1e-5);
    let torus = run(ScenarioSpec::ProductTorus { a: 1.0, b: 2.0, warp: 0.0, nodes: 64 }, 0.3)?;
    o.at_most("torus radius a error t=0.3", radius_error(&torus, &[0, 1], (1.0f64 - 0.6).sqrt()), 1e-4);
    o.at_most("torus radius b error t=0.3", radius_error(&torus, &[2, 3], (4.0f64 - 0.6).sqrt()), 1e-4);
    Ok(o)
}

fn horizon(spec: &str) -> Result<f64> {
    let cfg = config(&format!("[scenario]\n{spec}\n[flow]\ntEnd = 1.0\n"))?;
    let ext = cfg.scenario.info().extinction_time.ok_or_else(|| McfError::InvalidInput("no extinction time".into()))?;
    Ok(0.6 * ext)
}

/// Flat normal bundles stay flat up to grid noise; a curved one stays curved.
pub fn criterion_4() -> Result<CriterionOutcome> {
    let mut o = CriterionOutcome::new(4, "flatness preserved");
    for (label, spec, nodes) in [
        ("productTorus", "id = \"productTorus\"", 32),
        ("sphereTorus", "id = \"sphereTorus\"\nradius = 2.0\neps = 0.2", 64),
        ("genericTorus", "id = \"genericTorus\"", 32),
    ] {
        let t_end = horizon(spec)?;
        let cfg = config(&format!(
            "[scenario]\n{spec}\nnodes = {nodes}\n[flow]\ntEnd = {t_end}\nstencil = 2\n[[monitors]]\nkind = \"flatness\"\n"
        ))?;
        let (_, report) = run_flow(&cfg)?;
        completed(&mut o, label, &report.status);
        let m = monitor(&report, "flatness")?;
        if label == "genericTorus" {
            o.at_least(format!("{label} min sup|Rperp|^2 / initial"), summary(m, "min_ratio"), 0.5);
        } else {
            let ok = m.verdict == Verdict::Pass;
            let r = summary(m, "max_ratio");
            o.check(format!("{label} max sup|Rperp|^2 / eps0"), r, "<= 1e1", ok && r <= 10.0);
        }
    }
    Ok(o)
}

/// Evolution-equation residuals quarter under `(h, Δt) → (h/2, Δt/4)`.
pub fn criterion_5() -> Result<CriterionOutcome> {
    let mut o = CriterionOutcome::new(5, "evolution residuals converge");
    for (scenario, keys) in [("epsGraph", &["A2", "H2", "w", "Rperp2"][..]), ("genericTorus", &["A2", "H2", "Rperp2"][..])] {
        let mut levels = Vec::new();
        for (nodes, dt) in [(32usize, 2e-3f64), (64, 5e-4), (128, 1.25e-4)] {
            let cfg = config(&format!(
                "[scenario]\nid = \"{scenario}\"\nnodes = {nodes}\n[flow]\ntEnd = {}\nstencil = 2\nsnapshotEvery = 1\nstep = {{ kind = \"fixed\", dt = {dt} }}\n[[monitors]]\nkind = \"evolutionResiduals\"\n",
                2.0 * dt
            ))?;
            let (_, report) = run_flow(&cfg)?;
            levels.push(monitor(&report, "evolution_residuals")?.clone());
        }
        for key in keys {
            let v: Vec<f64> = levels.iter().map(|m| summary(m, &format!("first.{key}"))).collect();
            if v.iter().any(|x| x.is_nan()) {
                o.check(format!("{scenario} {key} present"), 0.0, "= 1", false);
                continue;
            }
            o.quarters(&format!("{scenario} {key} 32->64"), v[0], v[1]);
            o.quarters(&format!("{scenario} {key} 64->128"), v[1], v[2]);
        }
    }
    Ok(o)
}

/// Polynomial growth bounds persist along the flow.
pub fn criterion_6() -> Result<CriterionOutcome> {
    let mut o = CriterionOutcome::new(6, "growth preservation");
    for (label, spec, ell, p, c0, t_end) in
        [("productTorus", "productTorus", 2, 0.0, 4.0, 0.3), ("equivariantCylinder", "equivariantCylinder", 1, 0.0, 9.0, 0.5)]
    {
        let cfg = config(&format!(
            "[scenario]\nid = \"{spec}\"\nnodes = 32\n[flow]\ntEnd = {t_end}\n[[monitors]]\nkind = \"growth\"\nell = {ell}\np = {p:?}\nc0 = {c0:?}\n"
        ))?;
        let (_, report) = run_flow(&cfg)?;
        completed(&mut o, label, &report.status);
        let m = monitor(&report, "growth")?;
        let ok = m.verdict == Verdict::Pass;
        let slack = summary(m, "max_slack");
        o.check(format!("{label} max slack"), slack, "<= 1.001", ok && slack <= 1.0 + 1e-3);
        let m_dim = cfg.scenario.info().m;
        let expected = 2.0 * m_dim as f64 + 4.0 * (p - 1.0);
        let coef = summary(m, "t_coefficient");
        o.check(format!("{label} t-coefficient minus 2m+4(p-1)"), coef - expected, "= 0", coef == expected);
    }
    for (m_dim, p) in [(2usize, 1.0), (3, 0.5), (5, 2.0)] {
        let expected = 2.0 * m_dim as f64 + 4.0 * (p - 1.0);
        let coef = growth_time_coefficient(m_dim, p);
        o.check(format!("t-coefficient m={m_dim} p={p} minus 2m+4(p-1)"), coef - expected, "= 0", coef == expected);
    }
    Ok(o)
}

/// Graphical maximum-principle quantities on the periodic entire graph.
pub fn criterion_7() -> Result<CriterionOutcome> {
    let mut o = CriterionOutcome::new(7, "graphical monitors");
    let cfg = config(
        "[scenario]\nid = \"epsGraph\"\neps = 0.3\nnodes = 32\n[flow]\ntEnd = 1.0\n\
         [[monitors]]\nkind = \"sup\"\nfield = \"a2v2\"\n\
         [[monitors]]\nkind = \"kato\"\n\
         [[monitors]]\nkind = \"sup\"\nfield = \"tA2\"\n",
    )?;
    let (_, report) = run_flow(&cfg)?;
    completed(&mut o, "epsGraph", &report.status);
    let a2v2 = &report.monitors[0];
    let ex = summary(a2v2, "monotone_excess");
    o.check("sup |A|^2 v^2 relative increase", ex, "<= 1e-3", a2v2.verdict == Verdict::Pass && ex <= 1e-3);
    let kato = monitor(&report, "kato")?;
    let margin = summary(kato, "min_margin");
    o.check("Kato margin", margin, ">= -1e-6", kato.verdict == Verdict::Pass && margin >= -1e-6);
    let ta2 = &report.monitors[2];
    let max = summary(ta2, "max");
    let first_half = summary(ta2, "first_half_max");
    o.check("t|A|^2 max / first-half max", max / first_half, "<= 2", ta2.verdict == Verdict::Pass);
    Ok(o)
}

/// Gaussian density: constant on the shrinking circle, non-increasing on the torus.
pub fn criterion_8() -> Result<CriterionOutcome> {
    let mut o = CriterionOutcome::new(8, "monotonicity");
    let cfg = config(
        "[scenario]\nid = \"circle\"\nnodes = 128\n[flow]\ntEnd = 0.45\nstencil = 4\n\
         [[monitors]]\nkind = \"gaussianDensity\"\nt0 = 0.5\nexponent = \"intrinsic\"\n",
    )?;
    let (_, report) = run_flow(&cfg)?;
    completed(&mut o, "circle", &report.status);
    let m = monitor(&report, "gaussian_density")?;
    o.at_most("circle density relative deviation", summary(m, "max_relative_deviation"), 1e-4);
    let cfg = config(
        "[scenario]\nid = \"productTorus\"\nnodes = 32\n[flow]\ntEnd = 0.45\n\
         [[monitors]]\nkind = \"gaussianDensity\"\nt0 = 0.6\n",
    )?;
    let (_, report) = run_flow(&cfg)?;
    completed(&mut o, "productTorus", &report.status);
    let m = monitor(&report, "gaussian_density")?;
    let inc = summary(m, "max_relative_increase");
    o.check("torus density max relative increase per step", inc, "<= 1e-4", m.verdict == Verdict::Pass && inc <= 1e-4);
    Ok(o)
}

/// Normalized flow against the rescaled unnormalized flow.
pub fn criterion_9() -> Result<CriterionOutcome> {
    let mut o = CriterionOutcome::new(9, "normalized flow consistency");
    let spec = ScenarioSpec::EpsGraph { eps: 0.3, nodes: 32 };
    let initial = make_scenario(&spec)?;
    let omega = spec.natural_form().ok_or_else(|| McfError::InvalidInput("graph scenario without form".into()))?;
    let s_end = 1.0;
    let mut plain = FlowSettings::new(unrescaled_time(s_end));
    plain.snapshot_every = usize::MAX;
    let direct = integrate(&initial, &plain, |_| Ok(()))?;
    let mut norm = FlowSettings::new(s_end);
    norm.normalized = true;
    let mut expander = Vec::new();
    let normalized = integrate(&initial, &norm, |g| {
        expander.push(expander_residual(&build_geometry(g, norm.stencil)?));
        Ok(())
    })?;
    completed(&mut o, "unnormalized", &direct.status);
    completed(&mut o, "normalized", &normalized.status);
    let rescaled = rescale_snapshot(direct.last());
    let ga = build_geometry(&rescaled, plain.stencil)?;
    let gb = build_geometry(normalized.last(), norm.stencil)?;
    let wa = graph_w(&ga, &omega)?.w;
    let wb = graph_w(&gb, &omega)?.w;
    let diff = base_matched_difference(&rescaled, &[&ga.norm_a_sq, &wa], normalized.last(), &[&gb.norm_a_sq, &wb], &[0, 1])?;
    o.at_most("final time difference", (rescaled.time - normalized.last().time).abs(), 1e-12);
    o.at_most("rescaled |A|^2 difference at s=1", diff[0], 1e-2);
    o.at_most("w difference at s=1", diff[1], 1e-2);
    o.at_most("expander residual relative increase", monotone_excess(&expander, 0.0), 1e-3);
    Ok(o)
}

pub fn run_criterion(id: u8) -> Result<CriterionOutcome> {
    match id {
        1 => criterion_1(),
        2 => criterion_2(),
        3 => criterion_3(),
        4 => criterion_4(),
        5 => criterion_5(),
        6 => criterion_6(),
        7 => criterion_7(),
        8 => criterion_8(),
        9 => criterion_9(),
        10 => criterion_10(&[1, 8]),
        _ => Err(McfError::Config(format!("no criterion {id}"))),
    }
}

/// Evaluates `ids` twice and compares the serialized outcomes.
pub fn criterion_10(ids: &[u8]) -> Result<CriterionOutcome> {
    let mut o = CriterionOutcome::new(10, "determinism");
    let first = serde_json::to_string(&evaluate(ids, |_| {})?)?;
    let second = serde_json::to_string(&evaluate(ids, |_| {})?)?;
    let same = first == second;
    o.check(format!("criteria {ids:?} identical on rerun"), if same { 1.0 } else { 0.0 }, "= 1", same);
    Ok(o)
}

fn evaluate(ids: &[u8], mut on_outcome: impl FnMut(&CriterionOutcome)) -> Result<Vec<CriterionOutcome>> {
    let mut out = Vec::new();
    for &id in ids {
        let c = run_criterion(id)?;
        on_outcome(&c);
        out.push(c);
    }
    Ok(out)
}

/// Runs the selected criteria, calling `on_outcome` as each one finishes.
///
/// Criterion 10 reruns the other selected criteria (criteria 1 and 8 when it
/// is selected alone) and compares both reports.
pub fn run_acceptance(subset: &Subset, mut on_outcome: impl FnMut(&CriterionOutcome)) -> Result<AcceptanceReport> {
    let ids = subset.ids();
    let others: Vec<u8> = ids.iter().copied().filter(|id| *id != 10).collect();
    let mut criteria = evaluate(&others, &mut on_outcome)?;
    if ids.contains(&10) {
        let mut o = CriterionOutcome::new(10, "determinism");
        let sample = if others.is_empty() { vec![1, 8] } else { others.clone() };
        let baseline = if others.is_empty() { evaluate(&sample, |_| {})? } else { criteria.clone() };
        let again = evaluate(&sample, |_| {})?;
        let same = serde_json::to_string(&baseline)? == serde_json::to_string(&again)?;
        o.check(format!("criteria {sample:?} identical on rerun"), if same { 1.0 } else { 0.0 }, "= 1", same);
        on_outcome(&o);
        criteria.push(o);
    }
    Ok(AcceptanceReport { criteria })
}

/// Runs the suite and writes `acceptance.json` and `manifest.json` into `out_dir`.
pub fn run_verify(
    subset: &Subset,
    out_dir: &Path,
    on_outcome: impl FnMut(&CriterionOutcome),
) -> Result<(AcceptanceReport, RunManifest)> {
    let report = run_acceptance(subset, on_outcome)?;
    std::fs::create_dir_all(out_dir)?;
    let report_path = out_dir.join("acceptance.json");
    std::fs::write(&report_path, serde_json::to_string_pretty(&report)?)?;
    let manifest_path = out_dir.join("manifest.json");
    let manifest = RunManifest {
        config_path: None,
        config_hash: hex::encode(<sha2::Sha256 as sha2::Digest>::digest(format!("{subset:?}").as_bytes())),
        output_dir: out_dir.to_path_buf(),
        artifacts: vec![report_path, manifest_path.clone()],
        exit_status: if report.passed() { EXIT_OK } else { EXIT_MONITOR_FAIL },
    };
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)?;
    Ok((report, manifest))
}
