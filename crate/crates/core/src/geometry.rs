//! Extrinsic and intrinsic geometry of a grid-sampled immersion.
//!
//! All tensors carry cartesian ambient indices `α ∈ 0..n` and coordinate
//! indices `i ∈ 0..m`. Layouts (per node, row-major):
//!
//! | field          | layout           |
//! |----------------|------------------|
//! | `df`           | `(α, i)`         |
//! | `ddf`, `a`     | `(α, i, j)`      |
//! | `christoffel`  | `(k, i, j)` = Γ^k_ij |
//! | `rperp`        | `(α, β, i, j)`   |
//! | `riemann`      | `(i, j, k, l)` lower |
//! | `grad_a`       | `(l, α, i, j)` = ∇_l A^α_ij |
//! | `lambda`       | `(p, i, k)` = λ^p_ik |

use rayon::prelude::*;

use crate::error::{McfError, Result};
use crate::grid::{self, Field, ImmersionGrid, ParameterDomain, StencilOrder};
use crate::linalg;
use crate::tensor_algebra::{self, FundamentalFormSample};

/// Smallest admissible `det g` before the immersion is treated as degenerate.
pub const DEGENERACY_THRESHOLD: f64 = 1e-10;

/// Metric data and the second fundamental form at one node.
pub(crate) struct MetricNode {
    pub g: Vec<f64>,
    pub ginv: Vec<f64>,
    pub det: f64,
    pub christoffel: Vec<f64>,
    pub a: Vec<f64>,
    pub h: Vec<f64>,
}

pub(crate) fn metric_node(df: &[f64], ddf: &[f64], m: usize, n: usize) -> Option<MetricNode> {
    let mut g = vec![0.0; m * m];
    for i in 0..m {
        for j in i..m {
            let s: f64 = (0..n).map(|al| df[al * m + i] * df[al * m + j]).sum();
            g[i * m + j] = s;
            g[j * m + i] = s;
        }
    }
    let (ginv, det) = linalg::spd_inverse(&g, m)?;
    if det < DEGENERACY_THRESHOLD {
        return None;
    }
    // ∂_k g_ij from the second derivatives of F.
    let mut dg = vec![0.0; m * m * m];
    for kk in 0..m {
        for i in 0..m {
            for j in 0..m {
                dg[(kk * m + i) * m + j] = (0..n)
                    .map(|al| ddf[(al * m + kk) * m + i] * df[al * m + j] + df[al * m + i] * ddf[(al * m + kk) * m + j])
                    .sum();
            }
        }
    }
    let mut christoffel = vec![0.0; m * m * m];
    for kk in 0..m {
        for i in 0..m {
            for j in 0..m {
                christoffel[(kk * m + i) * m + j] = 0.5
                    * (0..m)
                        .map(|l| {
                            ginv[kk * m + l] * (dg[(i * m + l) * m + j] + dg[(j * m + l) * m + i] - dg[(l * m + i) * m + j])
                        })
                        .sum::<f64>();
            }
        }
    }
    let mut a = vec![0.0; n * m * m];
    let mut h = vec![0.0; n];
    for al in 0..n {
        for i in 0..m {
            for j in 0..m {
                let v = ddf[(al * m + i) * m + j]
                    - (0..m).map(|kk| christoffel[(kk * m + i) * m + j] * df[al * m + kk]).sum::<f64>();
                a[(al * m + i) * m + j] = v;
                h[al] += ginv[i * m + j] * v;
            }
        }
    }
    Some(MetricNode { g, ginv, det, christoffel, a, h })
}

/// Mean curvature vector at every node; the cheap path used by the integrators.
pub fn mean_curvature_field(grid: &ImmersionGrid, order: StencilOrder) -> Result<Field> {
    let (m, n) = (grid.dim(), grid.ambient_dim());
    let (df, ddf) = grid::position_derivatives(grid, order);
    let nodes = grid.node_count();
    let mut h = Field::zeros(nodes, n);
    let bad = std::sync::atomic::AtomicUsize::new(usize::MAX);
    h.data.par_chunks_mut(n).enumerate().for_each(|(node, out)| match metric_node(df.at(node), ddf.at(node), m, n) {
        Some(mn) => out.copy_from_slice(&mn.h),
        None => {
            bad.fetch_min(node, std::sync::atomic::Ordering::Relaxed);
        }
    });
    let bad = bad.into_inner();
    if bad != usize::MAX {
        return Err(McfError::Degenerate { node: bad, det: metric_det(df.at(bad), m, n) });
    }
    Ok(h)
}

fn metric_det(df: &[f64], m: usize, n: usize) -> f64 {
    let mut g = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            g[i * m + j] = (0..n).map(|al| df[al * m + i] * df[al * m + j]).sum();
        }
    }
    linalg::determinant(&g, m)
}

/// Minimum over nodes of the smallest metric eigenvalue.
pub fn min_metric_eigenvalue(grid: &ImmersionGrid, order: StencilOrder) -> f64 {
    let (m, n) = (grid.dim(), grid.ambient_dim());
    let (df, _) = grid::position_derivatives(grid, order);
    (0..grid.node_count())
        .into_par_iter()
        .map(|node| {
            let d = df.at(node);
            let mut g = vec![0.0; m * m];
            for i in 0..m {
                for j in 0..m {
                    g[i * m + j] = (0..n).map(|al| d[al * m + i] * d[al * m + j]).sum();
                }
            }
            linalg::min_eigenvalue(&g, m)
        })
        .reduce(|| f64::INFINITY, f64::min)
}

/// Orthonormal normal frame by modified Gram–Schmidt, seeded with the ambient
/// axes least aligned with the tangent space.
pub fn normal_frame(df: &[f64], m: usize, n: usize) -> Vec<Vec<f64>> {
    let mut tangent: Vec<Vec<f64>> = Vec::with_capacity(m);
    for i in 0..m {
        let col: Vec<f64> = (0..n).map(|al| df[al * m + i]).collect();
        if let Some(e) = linalg::gram_schmidt_step(&tangent, &col, 1e-300) {
            tangent.push(e);
        }
    }
    let mut axes: Vec<(f64, usize)> = (0..n)
        .map(|al| (tangent.iter().map(|e| e[al] * e[al]).sum::<f64>(), al))
        .collect();
    axes.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    let mut basis = tangent;
    let mut normals = Vec::with_capacity(n - m);
    for (_, al) in axes {
        if normals.len() == n - m {
            break;
        }
        let mut e = vec![0.0; n];
        e[al] = 1.0;
        if let Some(v) = linalg::gram_schmidt_step(&basis, &e, 1e-8) {
            basis.push(v.clone());
            normals.push(v);
        }
    }
    normals
}

/// Every per-node tensor derived from one immersion snapshot.
#[derive(Debug, Clone)]
pub struct GeometryState {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub order: StencilOrder,
    pub domain: ParameterDomain,
    pub time: f64,
    pub points: Field,
    pub df: Field,
    pub ddf: Field,
    pub metric: Field,
    pub metric_inv: Field,
    pub sqrt_det: Vec<f64>,
    pub christoffel: Field,
    pub a: Field,
    pub h: Field,
    pub a_tensor: Field,
    pub b: Field,
    pub ricci: Field,
    pub riemann: Field,
    pub scalar_curvature: Vec<f64>,
    pub normal_frame: Field,
    pub a_normal: Field,
    pub rperp: Field,
    pub grad_a: Field,
    pub grad_perp_a: Field,
    pub lambda: Field,
    pub norm_a_sq: Vec<f64>,
    pub norm_h_sq: Vec<f64>,
    pub norm_a_tensor_sq: Vec<f64>,
    pub norm_b_sq: Vec<f64>,
    /// `|R⊥|²` evaluated in the orthonormal normal frame.
    pub norm_rperp_sq: Vec<f64>,
    /// `2|b|² − 2c:c` evaluated with ambient components.
    pub norm_rperp_sq_ambient: Vec<f64>,
    pub normal_gram_sq: Vec<f64>,
    pub norm_grad_a_sq: Vec<f64>,
    pub norm_grad_perp_a_sq: Vec<f64>,
    /// `|∇|A||² = |⟨A, ∇⊥A⟩|² / |A|²`.
    pub grad_abs_a_sq: Vec<f64>,
    /// Reaction term of the `|R⊥|²` evolution equation.
    pub rperp_reaction: Vec<f64>,
}

struct AlgebraNode {
    frame: Vec<f64>,
    a_normal: Vec<f64>,
    a_tensor: Vec<f64>,
    b: Vec<f64>,
    ricci: Vec<f64>,
    riemann: Vec<f64>,
    scalar: f64,
    rperp: Vec<f64>,
    norm_a_sq: f64,
    norm_h_sq: f64,
    norm_a_tensor_sq: f64,
    norm_b_sq: f64,
    norm_rperp_sq: f64,
    norm_rperp_sq_ambient: f64,
    normal_gram_sq: f64,
    reaction: f64,
}

/// `t_ij t_pq g^ip g^jq` for a lower 2-tensor.
fn norm2(t: &[f64], ginv: &[f64], m: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..m {
        for j in 0..m {
            for p in 0..m {
                for q in 0..m {
                    s += t[i * m + j] * t[p * m + q] * ginv[i * m + p] * ginv[j * m + q];
                }
            }
        }
    }
    s
}

fn algebra_node(df: &[f64], mn: &MetricNode, m: usize, n: usize) -> AlgebraNode {
    let k = n - m;
    let a = &mn.a;
    let ginv = &mn.ginv;
    let ai = |al: usize, i: usize, j: usize| a[(al * m + i) * m + j];

    let normals = normal_frame(df, m, n);
    let mut a_normal = vec![0.0; k * m * m];
    for (q, nu) in normals.iter().enumerate() {
        for i in 0..m {
            for j in 0..m {
                a_normal[(q * m + i) * m + j] = (0..n).map(|al| nu[al] * ai(al, i, j)).sum();
            }
        }
    }
    let sample = FundamentalFormSample::new(m, k, mn.g.clone(), a_normal.clone(), None)
        .expect("metric is SPD and A symmetric by construction");
    let inv = tensor_algebra::derive_invariants(&sample);
    let reaction = if k > 1 && m > 1 {
        tensor_algebra::normal_curvature_reaction(&tensor_algebra::gamma_values(&sample))
    } else {
        0.0
    };

    // c^αβ_ij in ambient components.
    let mut c = vec![0.0; n * n * m * m];
    for al in 0..n {
        for be in 0..n {
            for i in 0..m {
                for j in 0..m {
                    let mut s = 0.0;
                    for p in 0..m {
                        for q in 0..m {
                            s += ai(al, i, p) * ginv[p * m + q] * ai(be, q, j);
                        }
                    }
                    c[((al * n + be) * m + i) * m + j] = s;
                }
            }
        }
    }
    let mut a_tensor = vec![0.0; m * m];
    let mut b = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            a_tensor[i * m + j] = (0..n).map(|al| mn.h[al] * ai(al, i, j)).sum();
            b[i * m + j] = (0..n).map(|al| c[((al * n + al) * m + i) * m + j]).sum();
        }
    }
    let mut rperp = vec![0.0; n * n * m * m];
    for ab in 0..n * n {
        for i in 0..m {
            for j in 0..m {
                rperp[(ab * m + i) * m + j] = c[(ab * m + i) * m + j] - c[(ab * m + j) * m + i];
            }
        }
    }
    let norm_b_sq = norm2(&b, ginv, m);
    let mut cc = 0.0;
    let mut gram = 0.0;
    for al in 0..n {
        for be in 0..n {
            let mut t = 0.0;
            for i in 0..m {
                for j in 0..m {
                    t += c[((al * n + be) * m + i) * m + j] * ginv[j * m + i];
                    for p in 0..m {
                        for q in 0..m {
                            cc += c[((al * n + be) * m + i) * m + j]
                                * c[((be * n + al) * m + p) * m + q]
                                * ginv[i * m + p]
                                * ginv[j * m + q];
                        }
                    }
                }
            }
            gram += t * t;
        }
    }
    let mut riemann = vec![0.0; m * m * m * m];
    for i in 0..m {
        for j in 0..m {
            for p in 0..m {
                for q in 0..m {
                    riemann[((i * m + j) * m + p) * m + q] =
                        (0..n).map(|al| ai(al, i, p) * ai(al, j, q) - ai(al, i, q) * ai(al, j, p)).sum();
                }
            }
        }
    }
    let ricci: Vec<f64> = a_tensor.iter().zip(&b).map(|(x, y)| x - y).collect();
    let scalar = (0..m * m).map(|ij| ginv[ij] * ricci[ij]).sum();
    let frame = normals.concat();
    AlgebraNode {
        frame,
        a_normal,
        norm_a_tensor_sq: norm2(&a_tensor, ginv, m),
        a_tensor,
        b,
        ricci,
        riemann,
        scalar,
        rperp,
        norm_a_sq: inv.norm_a_sq,
        norm_h_sq: mn.h.iter().map(|x| x * x).sum(),
        norm_b_sq,
        norm_rperp_sq: inv.norm_rperp_sq,
        norm_rperp_sq_ambient: 2.0 * norm_b_sq - 2.0 * cc,
        normal_gram_sq: gram,
        reaction,
    }
}

/// Covariant derivative of a field of lower `rank`-tensors (optionally with a
/// leading block of `inner` ambient components that take no connection term).
/// Input components `(inner, i1..ir)`, output `(l, inner, i1..ir)`.
pub(crate) fn covariant_derivative(
    domain: &ParameterDomain,
    field: &Field,
    christoffel: &Field,
    m: usize,
    inner: usize,
    rank: usize,
    order: StencilOrder,
) -> Field {
    let partial = grid::gradient(domain, field, order);
    let tsize = m.pow(rank as u32);
    debug_assert_eq!(field.ncomp, inner * tsize);
    let ncomp = field.ncomp;
    let mut out = Field::zeros(field.nodes(), m * ncomp);
    out.data.par_chunks_mut(m * ncomp).enumerate().for_each(|(node, o)| {
        let f = field.at(node);
        let p = partial.at(node);
        let gam = christoffel.at(node);
        let mut idx = vec![0usize; rank];
        for l in 0..m {
            for s in 0..inner {
                for flat in 0..tsize {
                    let mut rem = flat;
                    for r in (0..rank).rev() {
                        idx[r] = rem % m;
                        rem /= m;
                    }
                    let mut v = p[l * ncomp + s * tsize + flat];
                    for r in 0..rank {
                        let stride = m.pow((rank - 1 - r) as u32);
                        let base = flat - idx[r] * stride;
                        for q in 0..m {
                            v -= gam[(q * m + l) * m + idx[r]] * f[s * tsize + base + q * stride];
                        }
                    }
                    o[l * ncomp + s * tsize + flat] = v;
                }
            }
        }
    });
    out
}

impl GeometryState {
    pub fn node_count(&self) -> usize {
        self.domain.node_count()
    }

    #[inline]
    pub fn point(&self, node: usize) -> &[f64] {
        self.points.at(node)
    }

    /// `Δf = g^ij (∂_i∂_j f − Γ^k_ij ∂_k f)` of a periodic scalar field.
    pub fn laplacian(&self, f: &[f64]) -> Vec<f64> {
        let m = self.m;
        let field = Field::from_scalars(f.to_vec());
        let first: Vec<Field> = (0..m).map(|a| grid::diff(&self.domain, &field, a, self.order)).collect();
        let mut second = vec![vec![Vec::new(); m]; m];
        for i in 0..m {
            second[i][i] = grid::diff2(&self.domain, &field, i, self.order).data;
            for j in (i + 1)..m {
                second[i][j] = grid::diff(&self.domain, &first[i], j, self.order).data;
            }
        }
        (0..self.node_count())
            .into_par_iter()
            .map(|node| {
                let ginv = self.metric_inv.at(node);
                let gam = self.christoffel.at(node);
                let mut s = 0.0;
                for i in 0..m {
                    for j in 0..m {
                        let dij = if i <= j { second[i][j][node] } else { second[j][i][node] };
                        let corr: f64 = (0..m).map(|kk| gam[(kk * m + i) * m + j] * first[kk].data[node]).sum();
                        s += ginv[i * m + j] * (dij - corr);
                    }
                }
                s
            })
            .collect()
    }

    /// `|∇f|² = g^ij ∂_i f ∂_j f` of a periodic scalar field.
    pub fn gradient_norm_sq(&self, f: &[f64]) -> Vec<f64> {
        let m = self.m;
        let d = grid::gradient(&self.domain, &Field::from_scalars(f.to_vec()), self.order);
        (0..self.node_count())
            .map(|node| {
                let ginv = self.metric_inv.at(node);
                let g = d.at(node);
                let mut s = 0.0;
                for i in 0..m {
                    for j in 0..m {
                        s += ginv[i * m + j] * g[i] * g[j];
                    }
                }
                s
            })
            .collect()
    }

    /// Norm of a lower `rank`-tensor with `inner` orthonormal components.
    pub fn tensor_norm_sq(&self, node: usize, t: &[f64], inner: usize, rank: usize) -> f64 {
        let m = self.m;
        let ginv = self.metric_inv.at(node);
        let tsize = m.pow(rank as u32);
        let mut s = 0.0;
        let decode = |flat: usize| -> Vec<usize> {
            let mut idx = vec![0; rank];
            let mut rem = flat;
            for r in (0..rank).rev() {
                idx[r] = rem % m;
                rem /= m;
            }
            idx
        };
        let idx: Vec<Vec<usize>> = (0..tsize).map(decode).collect();
        for c in 0..inner {
            for x in 0..tsize {
                let tx = t[c * tsize + x];
                if tx == 0.0 {
                    continue;
                }
                for y in 0..tsize {
                    let w: f64 = (0..rank).map(|r| ginv[idx[x][r] * m + idx[y][r]]).product();
                    s += tx * t[c * tsize + y] * w;
                }
            }
        }
        s
    }

    /// Orthogonal projection of `v` onto the tangent space at `node`.
    pub fn tangential_part(&self, node: usize, v: &[f64]) -> Vec<f64> {
        let (m, n) = (self.m, self.n);
        let df = self.df.at(node);
        let ginv = self.metric_inv.at(node);
        let dots: Vec<f64> = (0..m).map(|i| (0..n).map(|al| df[al * m + i] * v[al]).sum()).collect();
        (0..n)
            .map(|al| {
                let mut s = 0.0;
                for i in 0..m {
                    for j in 0..m {
                        s += df[al * m + i] * ginv[i * m + j] * dots[j];
                    }
                }
                s
            })
            .collect()
    }

    pub fn normal_part(&self, node: usize, v: &[f64]) -> Vec<f64> {
        let t = self.tangential_part(node, v);
        v.iter().zip(t).map(|(a, b)| a - b).collect()
    }

    /// Total volume `∫ dμ` over the fundamental domain (midpoint rule).
    pub fn volume(&self) -> f64 {
        let cell: f64 = (0..self.m).map(|a| self.domain.spacing(a)).product();
        self.sqrt_det.iter().sum::<f64>() * cell
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        let cell: f64 = (0..self.m).map(|a| self.domain.spacing(a)).product();
        f.iter().zip(&self.sqrt_det).map(|(x, w)| x * w).sum::<f64>() * cell
    }

    /// Sup over nodes of the normality defect `|⟨A_ij, F_k⟩|`.
    pub fn normality_residual(&self) -> f64 {
        let (m, n) = (self.m, self.n);
        (0..self.node_count())
            .map(|node| {
                let a = self.a.at(node);
                let df = self.df.at(node);
                let mut worst: f64 = 0.0;
                for i in 0..m {
                    for j in 0..m {
                        for kk in 0..m {
                            let s: f64 = (0..n).map(|al| a[(al * m + i) * m + j] * df[al * m + kk]).sum();
                            worst = worst.max(s.abs());
                        }
                    }
                }
                worst
            })
            .fold(0.0, f64::max)
    }

    /// Sup over nodes of `|g^ij a_ij − |H|²|` and `|g^ij b_ij − |A|²|`.
    pub fn trace_identity_residual(&self) -> f64 {
        let m = self.m;
        (0..self.node_count())
            .map(|node| {
                let ginv = self.metric_inv.at(node);
                let ta: f64 = (0..m * m).map(|ij| ginv[ij] * self.a_tensor.at(node)[ij]).sum();
                let tb: f64 = (0..m * m).map(|ij| ginv[ij] * self.b.at(node)[ij]).sum();
                let e1 = (ta - self.norm_h_sq[node]).abs() / (1.0 + self.norm_h_sq[node]);
                let e2 = (tb - self.norm_a_sq[node]).abs() / (1.0 + self.norm_a_sq[node]);
                e1.max(e2)
            })
            .fold(0.0, f64::max)
    }
}

pub fn sup(values: &[f64]) -> f64 {
    values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

pub fn inf(values: &[f64]) -> f64 {
    values.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Builds the full geometry of an immersion snapshot.
pub fn build_geometry(im: &ImmersionGrid, order: StencilOrder) -> Result<GeometryState> {
    let (m, n) = (im.dim(), im.ambient_dim());
    if n <= m {
        return Err(McfError::InvalidInput("codimension must be at least one".into()));
    }
    let k = n - m;
    let nodes = im.node_count();
    let (df, ddf) = grid::position_derivatives(im, order);

    let metric_nodes: Vec<Option<MetricNode>> =
        (0..nodes).into_par_iter().map(|node| metric_node(df.at(node), ddf.at(node), m, n)).collect();
    if let Some(bad) = metric_nodes.iter().position(|x| x.is_none()) {
        return Err(McfError::Degenerate { node: bad, det: metric_det(df.at(bad), m, n) });
    }
    let metric_nodes: Vec<MetricNode> = metric_nodes.into_iter().map(Option::unwrap).collect();
    let algebra: Vec<AlgebraNode> =
        (0..nodes).into_par_iter().map(|node| algebra_node(df.at(node), &metric_nodes[node], m, n)).collect();

    let gather = |f: &dyn Fn(&MetricNode) -> &[f64]| -> Field {
        let ncomp = f(&metric_nodes[0]).len();
        Field { ncomp, data: metric_nodes.iter().flat_map(|x| f(x).to_vec()).collect() }
    };
    let gather_alg = |f: &dyn Fn(&AlgebraNode) -> &[f64]| -> Field {
        let ncomp = f(&algebra[0]).len();
        Field { ncomp, data: algebra.iter().flat_map(|x| f(x).to_vec()).collect() }
    };
    let metric = gather(&|x| &x.g);
    let metric_inv = gather(&|x| &x.ginv);
    let christoffel = gather(&|x| &x.christoffel);
    let a = gather(&|x| &x.a);
    let h = gather(&|x| &x.h);
    let sqrt_det: Vec<f64> = metric_nodes.iter().map(|x| x.det.sqrt()).collect();
    drop(metric_nodes);

    let b = gather_alg(&|x| &x.b);
    let grad_a = covariant_derivative(&im.domain, &a, &christoffel, m, n, 2, order);
    let grad_b = covariant_derivative(&im.domain, &b, &christoffel, m, 1, 2, order);

    let per_node: Vec<(Vec<f64>, Vec<f64>, f64, f64, f64, f64)> = (0..nodes)
        .into_par_iter()
        .map(|node| {
            let ga = grad_a.at(node);
            let an = a.at(node);
            let d = df.at(node);
            let ginv = metric_inv.at(node);
            let mut gp = ga.to_vec();
            // ∇⊥_l A^α_ij = ∇_l A^α_ij + ⟨A_ij, A_lq⟩ g^{qk} F^α_k
            for l in 0..m {
                for i in 0..m {
                    for j in 0..m {
                        for q in 0..m {
                            let dot: f64 = (0..n).map(|be| an[(be * m + i) * m + j] * an[(be * m + l) * m + q]).sum();
                            for kk in 0..m {
                                let w = dot * ginv[q * m + kk];
                                for al in 0..n {
                                    gp[((l * n + al) * m + i) * m + j] += w * d[al * m + kk];
                                }
                            }
                        }
                    }
                }
            }
            let norm3 = |t: &[f64]| {
                let mut s = 0.0;
                for l in 0..m {
                    for l2 in 0..m {
                        let gl = ginv[l * m + l2];
                        for al in 0..n {
                            let x = &t[(l * n + al) * m * m..(l * n + al + 1) * m * m];
                            let y = &t[(l2 * n + al) * m * m..(l2 * n + al + 1) * m * m];
                            for i in 0..m {
                                for j in 0..m {
                                    for p in 0..m {
                                        for q in 0..m {
                                            s += gl * x[i * m + j] * y[p * m + q] * ginv[i * m + p] * ginv[j * m + q];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                s
            };
            let ng = norm3(ga);
            let ngp = norm3(&gp);
            // ⟨A, ∇⊥_l A⟩
            let x: Vec<f64> = (0..m)
                .map(|l| {
                    let mut s = 0.0;
                    for al in 0..n {
                        for i in 0..m {
                            for j in 0..m {
                                for p in 0..m {
                                    for q in 0..m {
                                        s += an[(al * m + i) * m + j]
                                            * gp[((l * n + al) * m + p) * m + q]
                                            * ginv[i * m + p]
                                            * ginv[j * m + q];
                                    }
                                }
                            }
                        }
                    }
                    s
                })
                .collect();
            let na = algebra[node].norm_a_sq;
            let mut xx = 0.0;
            for l in 0..m {
                for q in 0..m {
                    xx += x[l] * x[q] * ginv[l * m + q];
                }
            }
            let grad_abs = if na > 1e-28 { xx / na } else { 0.0 };
            // λ^p_ik = g^{pq}(∇_i b_qk + ∇_k b_qi − ∇_q b_ik)
            let gb = grad_b.at(node);
            let mut lam = vec![0.0; m * m * m];
            for p in 0..m {
                for i in 0..m {
                    for kk in 0..m {
                        lam[(p * m + i) * m + kk] = (0..m)
                            .map(|q| {
                                ginv[p * m + q]
                                    * (gb[(i * m + q) * m + kk] + gb[(kk * m + q) * m + i] - gb[(q * m + i) * m + kk])
                            })
                            .sum();
                    }
                }
            }
            (gp, lam, ng, ngp, grad_abs, 0.0)
        })
        .collect();

    let grad_perp_a = Field { ncomp: m * n * m * m, data: per_node.iter().flat_map(|x| x.0.clone()).collect() };
    let lambda = Field { ncomp: m * m * m, data: per_node.iter().flat_map(|x| x.1.clone()).collect() };

    Ok(GeometryState {
        m,
        n,
        k,
        order,
        domain: im.domain.clone(),
        time: im.time,
        points: Field { ncomp: n, data: im.points().to_vec() },
        metric,
        metric_inv,
        sqrt_det,
        christoffel,
        h,
        a_tensor: gather_alg(&|x| &x.a_tensor),
        ricci: gather_alg(&|x| &x.ricci),
        riemann: gather_alg(&|x| &x.riemann),
        scalar_curvature: algebra.iter().map(|x| x.scalar).collect(),
        normal_frame: gather_alg(&|x| &x.frame),
        a_normal: gather_alg(&|x| &x.a_normal),
        rperp: gather_alg(&|x| &x.rperp),
        norm_a_sq: algebra.iter().map(|x| x.norm_a_sq).collect(),
        norm_h_sq: algebra.iter().map(|x| x.norm_h_sq).collect(),
        norm_a_tensor_sq: algebra.iter().map(|x| x.norm_a_tensor_sq).collect(),
        norm_b_sq: algebra.iter().map(|x| x.norm_b_sq).collect(),
        norm_rperp_sq: algebra.iter().map(|x| x.norm_rperp_sq).collect(),
        norm_rperp_sq_ambient: algebra.iter().map(|x| x.norm_rperp_sq_ambient).collect(),
        normal_gram_sq: algebra.iter().map(|x| x.normal_gram_sq).collect(),
        rperp_reaction: algebra.iter().map(|x| x.reaction).collect(),
        b,
        a,
        df,
        ddf,
        grad_a,
        grad_perp_a,
        lambda,
        norm_grad_a_sq: per_node.iter().map(|x| x.2).collect(),
        norm_grad_perp_a_sq: per_node.iter().map(|x| x.3).collect(),
        grad_abs_a_sq: per_node.iter().map(|x| x.4).collect(),
    })
}
