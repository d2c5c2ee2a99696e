//! Initial immersions with known analytic behaviour.

use std::f64::consts::{FRAC_PI_4, PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coords::ParallelForm;
use crate::error::{McfError, Result};
use crate::geometry::{self, build_geometry};
use crate::grid::{self, ImmersionGrid, ParameterDomain, StencilOrder};

/// Growth constants `(c₀, p)` of the linear-growth cylindrical surface
/// `u² = (1+|x|)² cos² x ≤ 2(1 + x²)`. Documentation only; that map is not an
/// immersion and is never simulated.
pub const LINEAR_GROWTH_CYLINDER: (f64, f64) = (2.0, 1.0);

fn d_nodes() -> usize {
    64
}
fn d_radius() -> f64 {
    1.0
}
fn d_circle_ambient() -> usize {
    3
}
fn d_a() -> f64 {
    1.0
}
fn d_b() -> f64 {
    2.0
}
fn d_sphere_radius() -> f64 {
    2.0
}
fn d_sphere_eps() -> f64 {
    0.2
}
fn d_alpha0() -> f64 {
    FRAC_PI_4
}
fn d_twist() -> f64 {
    0.315
}
fn d_profile_amp() -> f64 {
    1.0
}
fn d_graph_eps() -> f64 {
    0.3
}
fn d_plane_ambient() -> usize {
    4
}
fn d_line_ambient() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "camelCase", deny_unknown_fields)]
pub enum ScenarioSpec {
    /// Round circle of radius `radius` in ℝ³ or ℝ⁴.
    Circle {
        #[serde(default = "d_radius")]
        radius: f64,
        #[serde(default = "d_circle_ambient")]
        ambient: usize,
        #[serde(default = "d_nodes")]
        nodes: usize,
    },
    /// `S¹(a) × S¹(b) ⊂ ℝ⁴`, optionally under a smooth reparametrization of strength `warp`.
    ProductTorus {
        #[serde(default = "d_a")]
        a: f64,
        #[serde(default = "d_b")]
        b: f64,
        #[serde(default)]
        warp: f64,
        #[serde(default = "d_nodes")]
        nodes: usize,
    },
    /// Torus inside `S³(radius)`: latitude `α₀ + ε sin(u + v)`.
    SphereTorus {
        #[serde(default = "d_sphere_radius")]
        radius: f64,
        #[serde(default = "d_sphere_eps")]
        eps: f64,
        #[serde(default = "d_alpha0")]
        alpha0: f64,
        #[serde(default = "d_nodes")]
        nodes: usize,
    },
    /// Sheared product torus with curved normal bundle.
    GenericTorus {
        #[serde(default = "d_a")]
        a: f64,
        #[serde(default = "d_b")]
        b: f64,
        #[serde(default = "d_twist")]
        twist: f64,
        #[serde(default = "d_nodes")]
        nodes: usize,
    },
    /// Surface of revolution with radius `2 + amplitude·cos x`, periodic along the axis.
    EquivariantCylinder {
        #[serde(default = "d_profile_amp")]
        amplitude: f64,
        #[serde(default = "d_nodes")]
        nodes: usize,
    },
    /// Entire graph `(x¹, x², ε sin x¹, ε sin x²)` over the plane.
    EpsGraph {
        #[serde(default = "d_graph_eps")]
        eps: f64,
        #[serde(default = "d_nodes")]
        nodes: usize,
    },
    Plane {
        #[serde(default = "d_plane_ambient")]
        ambient: usize,
        #[serde(default = "d_nodes")]
        nodes: usize,
    },
    Line {
        #[serde(default = "d_line_ambient")]
        ambient: usize,
        #[serde(default = "d_nodes")]
        nodes: usize,
    },
}

/// Static facts about a scenario used by monitors and reports.
#[derive(Debug, Clone, Serialize)]
pub struct ScenarioInfo {
    pub id: &'static str,
    pub description: &'static str,
    pub compact: bool,
    pub flat_normal_bundle: bool,
    /// Known or estimated extinction time, where one exists.
    pub extinction_time: Option<f64>,
    pub m: usize,
    pub n: usize,
}

impl ScenarioSpec {
    pub fn id(&self) -> &'static str {
        match self {
            Self::Circle { .. } => "circle",
            Self::ProductTorus { .. } => "productTorus",
            Self::SphereTorus { .. } => "sphereTorus",
            Self::GenericTorus { .. } => "genericTorus",
            Self::EquivariantCylinder { .. } => "equivariantCylinder",
            Self::EpsGraph { .. } => "epsGraph",
            Self::Plane { .. } => "plane",
            Self::Line { .. } => "line",
        }
    }

    pub fn nodes(&self) -> usize {
        match *self {
            Self::Circle { nodes, .. }
            | Self::ProductTorus { nodes, .. }
            | Self::SphereTorus { nodes, .. }
            | Self::GenericTorus { nodes, .. }
            | Self::EquivariantCylinder { nodes, .. }
            | Self::EpsGraph { nodes, .. }
            | Self::Plane { nodes, .. }
            | Self::Line { nodes, .. } => nodes,
        }
    }

    pub fn with_nodes(&self, new: usize) -> Self {
        let mut s = self.clone();
        match &mut s {
            Self::Circle { nodes, .. }
            | Self::ProductTorus { nodes, .. }
            | Self::SphereTorus { nodes, .. }
            | Self::GenericTorus { nodes, .. }
            | Self::EquivariantCylinder { nodes, .. }
            | Self::EpsGraph { nodes, .. }
            | Self::Plane { nodes, .. }
            | Self::Line { nodes, .. } => *nodes = new,
        }
        s
    }

    pub fn info(&self) -> ScenarioInfo {
        let (description, compact, flat, ext, m, n) = match *self {
            Self::Circle { radius, ambient, .. } => {
                ("round circle", true, true, Some(radius * radius / 2.0), 1, ambient)
            }
            Self::ProductTorus { a, b, .. } => {
                ("product of two round circles in R^4", true, true, Some(a.min(b).powi(2) / 2.0), 2, 4)
            }
            Self::SphereTorus { radius, .. } => {
                ("torus on the round 3-sphere", true, true, Some(radius * radius / 4.0), 2, 4)
            }
            Self::GenericTorus { a, b, .. } => {
                ("sheared torus with curved normal bundle", true, false, Some(a.min(b).powi(2) / 2.0), 2, 4)
            }
            Self::EquivariantCylinder { .. } => ("periodic surface of revolution", false, true, None, 2, 3),
            Self::EpsGraph { .. } => ("entire periodic graph over the plane", false, true, None, 2, 4),
            Self::Plane { ambient, .. } => ("flat plane", false, true, None, 2, ambient),
            Self::Line { ambient, .. } => ("straight line", false, true, None, 1, ambient),
        };
        ScenarioInfo { id: self.id(), description, compact, flat_normal_bundle: flat, extinction_time: ext, m, n }
    }

    /// Parallel form whose density `w` describes graphicality, for graph-like scenarios.
    pub fn natural_form(&self) -> Option<ParallelForm> {
        match self {
            Self::EpsGraph { .. } | Self::Plane { .. } => Some(ParallelForm::coordinate(vec![0, 1])),
            Self::Line { .. } => Some(ParallelForm::coordinate(vec![0])),
            _ => None,
        }
    }

    /// Default specs of every scenario, for listing.
    pub fn catalogue() -> Vec<Self> {
        vec![
            Self::Circle { radius: 1.0, ambient: 3, nodes: 128 },
            Self::ProductTorus { a: 1.0, b: 2.0, warp: 0.0, nodes: 64 },
            Self::SphereTorus { radius: 2.0, eps: 0.2, alpha0: FRAC_PI_4, nodes: 64 },
            Self::GenericTorus { a: 1.0, b: 2.0, twist: d_twist(), nodes: 64 },
            Self::EquivariantCylinder { amplitude: 1.0, nodes: 64 },
            Self::EpsGraph { eps: 0.3, nodes: 64 },
            Self::Plane { ambient: 4, nodes: 16 },
            Self::Line { ambient: 2, nodes: 16 },
        ]
    }
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(McfError::InvalidInput(format!("{name} must be positive, got {x}")))
    }
}

fn axis_shift(n: usize, axis: usize, len: f64) -> Vec<f64> {
    let mut s = vec![0.0; n];
    s[axis] = len;
    s
}

/// Builds the initial immersion of a scenario and checks the immersion condition.
pub fn make_scenario(spec: &ScenarioSpec) -> Result<ImmersionGrid> {
    let im = match *spec {
        ScenarioSpec::Circle { radius, ambient, nodes } => {
            check_positive("radius", radius)?;
            if ambient < 2 {
                return Err(McfError::InvalidInput("circle needs ambient dimension ≥ 2".into()));
            }
            let d = ParameterDomain::periodic(vec![nodes], vec![TAU], ambient)?;
            ImmersionGrid::from_fn(d, ambient, |x| {
                let mut p = vec![0.0; ambient];
                p[0] = radius * x[0].cos();
                p[1] = radius * x[0].sin();
                p
            })?
        }
        ScenarioSpec::ProductTorus { a, b, warp, nodes } => {
            check_positive("a", a)?;
            check_positive("b", b)?;
            let d = ParameterDomain::periodic(vec![nodes, nodes], vec![TAU, TAU], 4)?;
            ImmersionGrid::from_fn(d, 4, |x| {
                let u = x[0] + warp * (x[0] + x[1]).sin();
                let v = x[1] + warp * (x[0] - x[1]).sin();
                vec![a * u.cos(), a * u.sin(), b * v.cos(), b * v.sin()]
            })?
        }
        ScenarioSpec::SphereTorus { radius, eps, alpha0, nodes } => {
            check_positive("radius", radius)?;
            let d = ParameterDomain::periodic(vec![nodes, nodes], vec![TAU, TAU], 4)?;
            ImmersionGrid::from_fn(d, 4, |x| {
                let f = alpha0 + eps * (x[0] + x[1]).sin();
                let (c, s) = (f.cos(), f.sin());
                vec![radius * c * x[0].cos(), radius * c * x[0].sin(), radius * s * x[1].cos(), radius * s * x[1].sin()]
            })?
        }
        ScenarioSpec::GenericTorus { a, b, twist, nodes } => {
            check_positive("a", a)?;
            check_positive("b", b)?;
            let d = ParameterDomain::periodic(vec![nodes, nodes], vec![TAU, TAU], 4)?;
            ImmersionGrid::from_fn(d, 4, |x| {
                let (u, v) = (x[0], x[1]);
                vec![a * u.cos() + twist * v.cos(), a * u.sin(), b * v.cos(), b * v.sin() + twist * u.sin()]
            })?
        }
        ScenarioSpec::EquivariantCylinder { amplitude, nodes } => {
            if !(amplitude.abs() < 2.0) {
                return Err(McfError::InvalidInput("profile 2 + a cos x needs |a| < 2".into()));
            }
            let d = ParameterDomain::new(vec![nodes, nodes], vec![TAU, TAU], vec![axis_shift(3, 0, TAU), vec![0.0; 3]])?;
            ImmersionGrid::from_fn(d, 3, |x| {
                let r = 2.0 + amplitude * x[0].cos();
                vec![x[0], r * x[1].cos(), r * x[1].sin()]
            })?
        }
        ScenarioSpec::EpsGraph { eps, nodes } => {
            let d = ParameterDomain::new(vec![nodes, nodes], vec![TAU, TAU], vec![axis_shift(4, 0, TAU), axis_shift(4, 1, TAU)])?
                .with_origin(vec![-PI, -PI]);
            ImmersionGrid::from_fn(d, 4, |x| vec![x[0], x[1], eps * x[0].sin(), eps * x[1].sin()])?
        }
        ScenarioSpec::Plane { ambient, nodes } => {
            if ambient < 3 {
                return Err(McfError::InvalidInput("plane needs ambient dimension ≥ 3".into()));
            }
            let d = ParameterDomain::new(
                vec![nodes, nodes],
                vec![TAU, TAU],
                vec![axis_shift(ambient, 0, TAU), axis_shift(ambient, 1, TAU)],
            )?
            .with_origin(vec![-PI, -PI]);
            ImmersionGrid::from_fn(d, ambient, |x| {
                let mut p = vec![0.0; ambient];
                p[0] = x[0];
                p[1] = x[1];
                p
            })?
        }
        ScenarioSpec::Line { ambient, nodes } => {
            if ambient < 2 {
                return Err(McfError::InvalidInput("line needs ambient dimension ≥ 2".into()));
            }
            let d = ParameterDomain::new(vec![nodes], vec![TAU], vec![axis_shift(ambient, 0, TAU)])?.with_origin(vec![-PI]);
            ImmersionGrid::from_fn(d, ambient, |x| {
                let mut p = vec![0.0; ambient];
                p[0] = x[0];
                p
            })?
        }
    };
    check_immersion(&im)?;
    Ok(im)
}

/// Fails with the first node whose metric determinant is below the degeneracy threshold.
pub fn check_immersion(im: &ImmersionGrid) -> Result<()> {
    geometry::mean_curvature_field(im, StencilOrder::Second).map(|_| ())
}

/// A perturbed immersion together with its measured initial `sup |R⊥|²`.
#[derive(Debug, Clone)]
pub struct Perturbed {
    pub grid: ImmersionGrid,
    pub initial_rperp_sup: f64,
}

/// Adds `amplitude` times the normal projection of a smooth random field made of
/// harmonics with wave numbers `|k_a| ≤ 2`, normalised to unit sup norm.
pub fn perturb(im: &ImmersionGrid, amplitude: f64, seed: u64) -> Result<Perturbed> {
    let (m, n) = (im.dim(), im.ambient_dim());
    let mut out = im.clone();
    if amplitude != 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut modes: Vec<(Vec<i32>, Vec<f64>, Vec<f64>)> = Vec::new();
        let mut idx = vec![-2i32; m];
        loop {
            let cos: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let sin: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            modes.push((idx.clone(), cos, sin));
            let mut a = 0;
            while a < m {
                idx[a] += 1;
                if idx[a] <= 2 {
                    break;
                }
                idx[a] = -2;
                a += 1;
            }
            if a == m {
                break;
            }
        }
        let d = &im.domain;
        let field: Vec<Vec<f64>> = (0..im.node_count())
            .map(|node| {
                let x = d.coords(node);
                let mut v = vec![0.0; n];
                for (k, c, s) in &modes {
                    let phase: f64 = (0..m).map(|a| k[a] as f64 * TAU * x[a] / d.periods()[a]).sum();
                    for al in 0..n {
                        v[al] += c[al] * phase.cos() + s[al] * phase.sin();
                    }
                }
                v
            })
            .collect();
        let sup = field.iter().map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt()).fold(0.0, f64::max);
        let (df, _) = grid::position_derivatives(im, StencilOrder::Second);
        for (node, v) in field.iter().enumerate() {
            let dfn = df.at(node);
            let mut g = vec![0.0; m * m];
            for i in 0..m {
                for j in 0..m {
                    g[i * m + j] = (0..n).map(|al| dfn[al * m + i] * dfn[al * m + j]).sum();
                }
            }
            let (ginv, _) = crate::linalg::spd_inverse(&g, m).ok_or(McfError::NotPositiveDefinite)?;
            let dots: Vec<f64> = (0..m).map(|i| (0..n).map(|al| dfn[al * m + i] * v[al]).sum()).collect();
            let p = &mut out.points_mut()[node * n..(node + 1) * n];
            for al in 0..n {
                let mut t = 0.0;
                for i in 0..m {
                    for j in 0..m {
                        t += dfn[al * m + i] * ginv[i * m + j] * dots[j];
                    }
                }
                p[al] += amplitude * (v[al] - t) / sup;
            }
        }
        check_immersion(&out).map_err(|e| {
            McfError::InvalidInput(format!("perturbation amplitude {amplitude} breaks the immersion: {e}"))
        })?;
    }
    let gs = build_geometry(&out, StencilOrder::Second)?;
    let initial_rperp_sup = geometry::sup(&gs.norm_rperp_sq);
    Ok(Perturbed { grid: out, initial_rperp_sup })
}
