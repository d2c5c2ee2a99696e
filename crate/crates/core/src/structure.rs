//! Residuals of the static structure equations on a [`GeometryState`].
//!
//! Riemann convention: `R_qlij = ⟨A_qi, A_lj⟩ − ⟨A_qj, A_li⟩` and
//! `[∇_i, ∇_j] V^m = R^m_lij V^l`, Ricci `R_ij = g^kl R_ikjl`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{covariant_derivative, GeometryState};
use crate::grid::{self, Field};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructureResiduals {
    pub normality: f64,
    pub gauss: f64,
    pub codazzi: f64,
    pub contracted_codazzi: f64,
    pub interchange: f64,
    pub simons: f64,
}

impl StructureResiduals {
    pub fn named(&self) -> [(&'static str, f64); 6] {
        [
            ("normality", self.normality),
            ("gauss", self.gauss),
            ("codazzi", self.codazzi),
            ("contracted_codazzi", self.contracted_codazzi),
            ("interchange", self.interchange),
            ("simons", self.simons),
        ]
    }

    pub fn max(&self) -> f64 {
        self.named().iter().map(|x| x.1).fold(0.0, f64::max)
    }
}

/// Moves the leading index of a `(l, s, rest..)` layout behind `s`: `(s, l, rest..)`.
pub(crate) fn swap_leading(field: &Field, m: usize, inner: usize) -> Field {
    let rest = field.ncomp / (m * inner);
    let mut out = Field::zeros(field.nodes(), field.ncomp);
    out.data.par_chunks_mut(field.ncomp).enumerate().for_each(|(node, o)| {
        let f = field.at(node);
        for l in 0..m {
            for s in 0..inner {
                for r in 0..rest {
                    o[(s * m + l) * rest + r] = f[(l * inner + s) * rest + r];
                }
            }
        }
    });
    out
}

/// Coordinate Riemann tensor `R_qlij` from finite differences of the Christoffel symbols.
pub fn coordinate_riemann(gs: &GeometryState) -> Field {
    let m = gs.m;
    let dgam = grid::gradient(&gs.domain, &gs.christoffel, gs.order);
    let m3 = m * m * m;
    let mut out = Field::zeros(gs.node_count(), m * m3);
    out.data.par_chunks_mut(m * m3).enumerate().for_each(|(node, o)| {
        let gam = gs.christoffel.at(node);
        let d = dgam.at(node);
        let g = gs.metric.at(node);
        let gm = |k: usize, i: usize, j: usize| gam[(k * m + i) * m + j];
        // ∂_x Γ^k_ij stored at (x, k, i, j)
        let dg = |x: usize, k: usize, i: usize, j: usize| d[x * m3 + (k * m + i) * m + j];
        let mut up = vec![0.0; m * m3];
        for mm in 0..m {
            for l in 0..m {
                for i in 0..m {
                    for j in 0..m {
                        let mut v = dg(i, mm, j, l) - dg(j, mm, i, l);
                        for p in 0..m {
                            v += gm(mm, i, p) * gm(p, j, l) - gm(mm, j, p) * gm(p, i, l);
                        }
                        up[((mm * m + l) * m + i) * m + j] = v;
                    }
                }
            }
        }
        for q in 0..m {
            for r in 0..m3 {
                o[q * m3 + r] = (0..m).map(|mm| g[q * m + mm] * up[mm * m3 + r]).sum();
            }
        }
    });
    out
}

/// Sup-norm residuals of normality, Gauss, Codazzi (both forms), the
/// interchange rule on `A` and Simons' identity.
pub fn check_structure_equations(gs: &GeometryState) -> StructureResiduals {
    let (m, n) = (gs.m, gs.n);
    let order = gs.order;
    let m2 = m * m;
    let m4 = m2 * m2;

    let rc = coordinate_riemann(gs);
    let gauss = rc
        .data
        .par_iter()
        .zip(gs.riemann.data.par_iter())
        .map(|(a, b)| (a - b).abs())
        .reduce(|| 0.0, f64::max);

    // ∇∇A at (p, α, l, i, j) = ∇_p ∇_l A^α_ij
    let ga_s = swap_leading(&gs.grad_a, m, n);
    let gga = covariant_derivative(&gs.domain, &ga_s, &gs.christoffel, m, n, 3, order);
    // ∇H at (l, α); ∇∇H at (k, α, l)
    let gh = grid::gradient(&gs.domain, &gs.h, order);
    let ggh = covariant_derivative(&gs.domain, &swap_leading(&gh, m, n), &gs.christoffel, m, n, 1, order);
    // ∇Ric at (l, p, k)
    let gric = covariant_derivative(&gs.domain, &gs.ricci, &gs.christoffel, m, 1, 2, order);

    let per_node: Vec<[f64; 4]> = (0..gs.node_count())
        .into_par_iter()
        .map(|node| {
            let ginv = gs.metric_inv.at(node);
            let df = gs.df.at(node);
            let a = gs.a.at(node);
            let ga = gs.grad_a.at(node);
            let riem = gs.riemann.at(node);
            let ric = gs.ricci.at(node);
            let gg = gga.at(node);
            let hh = ggh.at(node);
            let gr = gric.at(node);
            let gh_n = gh.at(node);
            let a_ = |al: usize, i: usize, j: usize| a[(al * m + i) * m + j];
            let ga_ = |l: usize, al: usize, i: usize, j: usize| ga[((l * n + al) * m + i) * m + j];
            let gg_ = |p: usize, al: usize, l: usize, i: usize, j: usize| gg[(((p * n + al) * m + l) * m + i) * m + j];
            let rm = |q: usize, l: usize, i: usize, j: usize| riem[((q * m + l) * m + i) * m + j];
            // R^u_lij
            let rup = |u: usize, l: usize, i: usize, j: usize| (0..m).map(|q| ginv[u * m + q] * rm(q, l, i, j)).sum::<f64>();
            let ric_up = |u: usize, j: usize| (0..m).map(|q| ginv[u * m + q] * ric[q * m + j]).sum::<f64>();

            let mut codazzi: f64 = 0.0;
            let mut interchange: f64 = 0.0;
            let mut contracted: f64 = 0.0;
            let mut simons: f64 = 0.0;
            for al in 0..n {
                for i in 0..m {
                    for j in 0..m {
                        for k in 0..m {
                            let corr: f64 = (0..m).map(|l| df[al * m + l] * rup(l, k, i, j)).sum();
                            codazzi = codazzi.max((ga_(i, al, j, k) - ga_(j, al, i, k) + corr).abs());
                        }
                    }
                }
                for j in 0..m {
                    let mut lhs = 0.0;
                    for k in 0..m {
                        for i in 0..m {
                            lhs += ginv[k * m + i] * ga_(i, al, j, k);
                        }
                    }
                    let rhs = gh_n[j * n + al] + (0..m).map(|l| df[al * m + l] * ric_up(l, j)).sum::<f64>();
                    contracted = contracted.max((lhs - rhs).abs());
                }
                for i in 0..m {
                    for j in 0..m {
                        for l in 0..m {
                            for k in 0..m {
                                let mut v = gg_(i, al, j, l, k) - gg_(j, al, i, l, k);
                                for u in 0..m {
                                    v += rup(u, l, i, j) * a_(al, u, k) + rup(u, k, i, j) * a_(al, l, u);
                                }
                                interchange = interchange.max(v.abs());
                            }
                        }
                    }
                }
                for l in 0..m {
                    for k in 0..m {
                        let mut lap = 0.0;
                        for i in 0..m {
                            for j in 0..m {
                                lap += ginv[i * m + j] * gg_(i, al, j, l, k);
                            }
                        }
                        let mut rhs = hh[(l * n + al) * m + k];
                        for u in 0..m {
                            rhs += ric_up(u, l) * a_(al, u, k) + ric_up(u, k) * a_(al, u, l);
                        }
                        for j in 0..m {
                            for u in 0..m {
                                for j2 in 0..m {
                                    for u2 in 0..m {
                                        rhs -= 2.0 * a_(al, j, u) * ginv[j * m + j2] * ginv[u * m + u2] * rm(l, j2, k, u2);
                                    }
                                }
                            }
                        }
                        for u in 0..m {
                            for p in 0..m {
                                let w = df[al * m + u] * ginv[u * m + p];
                                rhs += w * (gr[(l * m + p) * m + k] + gr[(k * m + p) * m + l] - gr[(p * m + l) * m + k]);
                            }
                        }
                        simons = simons.max((lap - rhs).abs());
                    }
                }
            }
            let _ = m4;
            [codazzi, contracted, interchange, simons]
        })
        .collect();
    let col = |c: usize| per_node.iter().map(|x| x[c]).fold(0.0, f64::max);
    StructureResiduals {
        normality: gs.normality_residual(),
        gauss,
        codazzi: col(0),
        contracted_codazzi: col(1),
        interchange: col(2),
        simons: col(3),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_geometry;
    use crate::grid::{ImmersionGrid, ParameterDomain, StencilOrder};
    use std::f64::consts::TAU;

    fn torus_of_revolution(nodes: usize) -> ImmersionGrid {
        let d = ParameterDomain::periodic(vec![nodes, nodes], vec![TAU, TAU], 4).unwrap();
        ImmersionGrid::from_fn(d, 4, |x| {
            let (u, v) = (x[0], x[1]);
            let r = 2.0 + v.cos();
            vec![r * u.cos(), r * u.sin(), v.sin(), 0.0]
        })
        .unwrap()
    }

    #[test]
    fn curved_torus_residuals_converge_at_second_order() {
        let r1 = check_structure_equations(&build_geometry(&torus_of_revolution(32), StencilOrder::Second).unwrap());
        let r2 = check_structure_equations(&build_geometry(&torus_of_revolution(64), StencilOrder::Second).unwrap());
        for ((name, a), (_, b)) in r1.named().iter().zip(r2.named().iter()).skip(1) {
            let ratio = a / b;
            assert!((3.2..4.8).contains(&ratio), "{name}: {a} -> {b}");
        }
    }

    #[test]
    fn flat_plane_residuals_vanish() {
        let mut shifts = vec![vec![0.0; 4]; 2];
        shifts[0][0] = TAU;
        shifts[1][1] = TAU;
        let d = ParameterDomain::new(vec![16, 16], vec![TAU, TAU], shifts).unwrap();
        let im = ImmersionGrid::from_fn(d, 4, |x| vec![x[0], x[1], 0.0, 0.0]).unwrap();
        let r = check_structure_equations(&build_geometry(&im, StencilOrder::Second).unwrap());
        assert!(r.max() < 1e-12, "{r:?}");
    }
}
