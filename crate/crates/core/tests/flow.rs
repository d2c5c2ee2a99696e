use mcf_core::flow::{integrate, rescale_snapshot, rescaled_time, unrescaled_time, FlowSettings, Integrator, StepPolicy};
use mcf_core::geometry::build_geometry;
use mcf_core::scenarios::{make_scenario, ScenarioSpec};
use mcf_core::{ImmersionGrid, StencilOrder};

fn mean_radius(im: &ImmersionGrid) -> f64 {
    let n = im.node_count();
    (0..n).map(|i| im.point(i).iter().map(|x| x * x).sum::<f64>().sqrt()).sum::<f64>() / n as f64
}

fn fixed(t_end: f64, dt: f64, integrator: Integrator) -> FlowSettings {
    let mut s = FlowSettings::new(t_end);
    s.step = StepPolicy::Fixed { dt };
    s.integrator = integrator;
    s
}

#[test]
fn rk4_is_fourth_order_in_time() {
    // eight nodes keep the spatial operator mild enough for large fixed steps
    let im = make_scenario(&ScenarioSpec::Circle { radius: 1.0, ambient: 3, nodes: 8 }).unwrap();
    let run = |dt| mean_radius(integrate(&im, &fixed(0.32, dt, Integrator::Rk4), |_| Ok(())).unwrap().last());
    let r: Vec<f64> = [0.04, 0.02, 0.01].iter().map(|dt| run(*dt)).collect();
    let ratio = (r[0] - r[1]) / (r[1] - r[2]);
    assert!((12.0..20.0).contains(&ratio), "{r:?} ratio {ratio}");
}

#[test]
fn equivariance_shifts_are_preserved() {
    let im = make_scenario(&ScenarioSpec::EpsGraph { eps: 0.3, nodes: 16 }).unwrap();
    let traj = integrate(&im, &FlowSettings::new(0.2), |_| Ok(())).unwrap();
    for snap in &traj.snapshots {
        assert_eq!(snap.domain.shifts(), im.domain.shifts());
    }
}

#[test]
fn area_strictly_decreases_on_compact_scenarios() {
    for spec in ScenarioSpec::catalogue().into_iter().filter(|s| s.info().compact) {
        let spec = spec.with_nodes(if spec.info().m == 1 { 32 } else { 16 });
        let traj = integrate(&make_scenario(&spec).unwrap(), &FlowSettings::new(0.05), |_| Ok(())).unwrap();
        assert!(traj.log.len() > 2);
        assert!(traj.log.windows(2).all(|w| w[1].area < w[0].area), "{}", spec.id());
    }
}

#[test]
fn normalized_and_rescaled_runs_agree() {
    let im = make_scenario(&ScenarioSpec::EpsGraph { eps: 0.3, nodes: 16 }).unwrap();
    let s_end = 0.2;
    let mut direct = fixed(s_end, s_end / 200.0, Integrator::Rk4);
    direct.normalized = true;
    let a = integrate(&im, &direct, |_| Ok(())).unwrap();
    let t_end = unrescaled_time(s_end);
    let b = integrate(&im, &fixed(t_end, t_end / 200.0, Integrator::Rk4), |_| Ok(())).unwrap();
    let (ga, rb) = (a.last(), rescale_snapshot(b.last()));
    assert!((rb.time - s_end).abs() < 1e-12 && (rescaled_time(t_end) - s_end).abs() < 1e-15);
    let fa = build_geometry(ga, StencilOrder::Second).unwrap();
    let fb = build_geometry(&rb, StencilOrder::Second).unwrap();
    let diff = fa.norm_a_sq.iter().zip(&fb.norm_a_sq).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-6, "{diff:e}");
}

#[test]
fn trajectories_are_deterministic() {
    let im = make_scenario(&ScenarioSpec::GenericTorus { a: 1.0, b: 2.0, twist: 0.5, nodes: 16 }).unwrap();
    let run = || integrate(&im, &FlowSettings::new(0.02), |_| Ok(())).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(a.last().points(), b.last().points());
    assert_eq!(a.log, b.log);
}
