use std::sync::OnceLock;

use proptest::prelude::*;

use mcf_core::config::RunConfig;
use mcf_core::coords::{coordinate_split, standard_basis};
use mcf_core::flow::{integrate, FlowSettings};
use mcf_core::geometry::{build_geometry, GeometryState};
use mcf_core::monitors::density::{gaussian_density, DensityExponent};
use mcf_core::monitors::growth::{growth_slack, growth_time_coefficient};
use mcf_core::monitors::Verdict;
use mcf_core::run::run_flow;
use mcf_core::scenarios::{make_scenario, ScenarioSpec};
use mcf_core::StencilOrder;

/// Geometry of every recorded snapshot of a short run, computed once.
fn states(spec: &ScenarioSpec, t_end: f64) -> Vec<GeometryState> {
    let mut s = FlowSettings::new(t_end);
    s.snapshot_every = 5;
    let traj = integrate(&make_scenario(spec).unwrap(), &s, |_| Ok(())).unwrap();
    traj.snapshots.iter().map(|g| build_geometry(g, StencilOrder::Second).unwrap()).collect()
}

fn compact_runs() -> &'static Vec<(String, Vec<GeometryState>)> {
    static RUNS: OnceLock<Vec<(String, Vec<GeometryState>)>> = OnceLock::new();
    RUNS.get_or_init(|| {
        ScenarioSpec::catalogue()
            .into_iter()
            .filter(|s| s.info().compact)
            .map(|s| {
                let s = s.with_nodes(if s.info().m == 1 { 64 } else { 32 });
                (s.id().to_string(), states(&s, 0.2))
            })
            .collect()
    })
}

fn product_torus_run() -> &'static Vec<GeometryState> {
    static RUN: OnceLock<Vec<GeometryState>> = OnceLock::new();
    RUN.get_or_init(|| states(&ScenarioSpec::ProductTorus { a: 1.0, b: 2.0, warp: 0.0, nodes: 16 }, 0.1))
}

fn rotated_basis(theta: f64, phi: f64) -> Vec<Vec<f64>> {
    let (c, s) = (theta.cos(), theta.sin());
    let (cp, sp) = (phi.cos(), phi.sin());
    vec![vec![c, s, 0.0, 0.0], vec![-s, c, 0.0, 0.0], vec![0.0, 0.0, cp, sp], vec![0.0, 0.0, -sp, cp]]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gaussian_density_never_increases(t0 in 0.3f64..3.0, cx in -0.3f64..0.3) {
        for (id, run) in compact_runs() {
            let mut center = vec![0.0; run[0].n];
            center[0] = cx;
            let theta: Vec<f64> = run
                .iter()
                .map(|gs| gaussian_density(gs, t0, &center, DensityExponent::Intrinsic).unwrap().0)
                .collect();
            for w in theta.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-4), "{} t0 {}: {:?}", id, t0, theta);
            }
        }
    }

    #[test]
    fn growth_slack_ignores_rotations_of_the_split(theta in -3.2f64..3.2, phi in -3.2f64..3.2, p in 0.0f64..2.0) {
        let kappa = growth_time_coefficient(2, p);
        for gs in product_torus_run() {
            let slack = |basis: &[Vec<f64>]| {
                let s = coordinate_split(gs, 2, basis).unwrap();
                growth_slack(&s.u_sq, &s.x_sq, 4.0, p, kappa, gs.time)
            };
            let (a, b) = (slack(&standard_basis(4)), slack(&rotated_basis(theta, phi)));
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0), "{} vs {}", a, b);
        }
    }
}

#[test]
fn flatness_holds_on_flat_initial_data() {
    // fourth order keeps the discrete sphereTorus below the not-flat threshold at 24²
    for (id, nodes) in [("productTorus", 16), ("sphereTorus", 24), ("epsGraph", 16), ("equivariantCylinder", 16), ("circle", 64)] {
        let cfg = RunConfig::parse(&format!(
            "[scenario]\nid = \"{id}\"\nnodes = {nodes}\n[flow]\ntEnd = 0.05\nstencil = 4\nsnapshotEvery = 5\n\
             [[monitors]]\nkind = \"flatness\"\n"
        ))
        .unwrap();
        let (_, report) = run_flow(&cfg).unwrap();
        let m = report.monitor("flatness").unwrap();
        assert_eq!(m.verdict, Verdict::Pass, "{id}: {m:?}");
    }
}

#[test]
fn normal_curvature_residual_on_generic_torus_at_cfl() {
    let cfg = RunConfig::parse(
        "[scenario]\nid = \"genericTorus\"\nnodes = 64\n[flow]\ntEnd = 0.004\nsnapshotEvery = 1\n\
         [[monitors]]\nkind = \"evolutionResiduals\"\nquantities = [\"normalCurvature\"]\n",
    )
    .unwrap();
    let (_, report) = run_flow(&cfg).unwrap();
    let m = report.monitor("evolution_residuals").unwrap();
    let worst = m.summary["max.Rperp2"];
    assert!(worst < 5e-3, "{worst:e}");
    assert_eq!(m.verdict, Verdict::Pass);
}

#[test]
fn growth_time_coefficient_matches_the_bound() {
    for (m, p, want) in [(2, 0.0, 0.0), (2, 1.0, 4.0), (1, 2.5, 8.0), (3, 0.5, 4.0)] {
        assert_eq!(growth_time_coefficient(m, p), want);
    }
}
