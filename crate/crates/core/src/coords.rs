//! Coordinate functions `u_i = ⟨F, e_i⟩`, the graph density `w` of a parallel
//! form and the self-expander defect.

use serde::{Deserialize, Serialize};

use crate::error::{McfError, Result};
use crate::geometry::GeometryState;
use crate::linalg;

/// Per-node output of [`coordinate_split`].
#[derive(Debug, Clone)]
pub struct CoordinateSplit {
    pub ell: usize,
    /// `u_i` for `i > ℓ`, `n − ℓ` values per node.
    pub u: Vec<Vec<f64>>,
    pub x_sq: Vec<f64>,
    pub u_sq: Vec<f64>,
    pub f_sq: Vec<f64>,
    /// `Σ_i |∇u_i|²` over the whole basis.
    pub grad_u_sum: Vec<f64>,
}

/// Rows of `basis` must form an orthonormal basis of ℝⁿ.
pub fn check_orthonormal(basis: &[Vec<f64>], n: usize) -> Result<()> {
    if basis.len() != n || basis.iter().any(|r| r.len() != n) {
        return Err(McfError::InvalidInput(format!("basis must be {n} vectors of length {n}")));
    }
    for (i, a) in basis.iter().enumerate() {
        for (j, b) in basis.iter().enumerate() {
            let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            if (d - if i == j { 1.0 } else { 0.0 }).abs() > 1e-10 {
                return Err(McfError::InvalidInput("basis is not orthonormal".into()));
            }
        }
    }
    Ok(())
}

pub fn standard_basis(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            e
        })
        .collect()
}

/// Splits `F` into the first `ℓ` basis directions (`x² = Σ_{i≤ℓ} u_i²`) and the rest (`u²`).
pub fn coordinate_split(gs: &GeometryState, ell: usize, basis: &[Vec<f64>]) -> Result<CoordinateSplit> {
    let (m, n) = (gs.m, gs.n);
    check_orthonormal(basis, n)?;
    if ell == 0 || ell > n {
        return Err(McfError::InvalidInput(format!("ℓ = {ell} outside 1..={n}")));
    }
    let nodes = gs.node_count();
    let mut out = CoordinateSplit {
        ell,
        u: Vec::with_capacity(nodes),
        x_sq: Vec::with_capacity(nodes),
        u_sq: Vec::with_capacity(nodes),
        f_sq: Vec::with_capacity(nodes),
        grad_u_sum: Vec::with_capacity(nodes),
    };
    for node in 0..nodes {
        let f = gs.point(node);
        let coords: Vec<f64> = basis.iter().map(|e| e.iter().zip(f).map(|(a, b)| a * b).sum()).collect();
        let x_sq: f64 = coords[..ell].iter().map(|c| c * c).sum();
        let u_sq: f64 = coords[ell..].iter().map(|c| c * c).sum();
        let df = gs.df.at(node);
        let ginv = gs.metric_inv.at(node);
        let mut grad_sum = 0.0;
        for e in basis {
            let d: Vec<f64> = (0..m).map(|j| (0..n).map(|al| df[al * m + j] * e[al]).sum()).collect();
            for j in 0..m {
                for k in 0..m {
                    grad_sum += ginv[j * m + k] * d[j] * d[k];
                }
            }
        }
        out.u.push(coords[ell..].to_vec());
        out.x_sq.push(x_sq);
        out.u_sq.push(u_sq);
        out.f_sq.push(f.iter().map(|c| c * c).sum());
        out.grad_u_sum.push(grad_sum);
    }
    Ok(out)
}

/// Constant m-form `ω = Σ coef · dy^{a₁} ∧ … ∧ dy^{a_m}` on ℝⁿ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParallelForm {
    pub terms: Vec<(Vec<usize>, f64)>,
}

impl ParallelForm {
    /// `dy^{a₁} ∧ … ∧ dy^{a_m}` for the given increasing axes.
    pub fn coordinate(axes: Vec<usize>) -> Self {
        Self { terms: vec![(axes, 1.0)] }
    }

    pub fn degree(&self) -> usize {
        self.terms.first().map_or(0, |t| t.0.len())
    }

    /// Checks strictly increasing distinct axis tuples of degree `m` in ℝⁿ with unit comass-free norm.
    pub fn validate(&self, m: usize, n: usize) -> Result<()> {
        if self.terms.is_empty() {
            return Err(McfError::InvalidInput("ω has no terms".into()));
        }
        for (i, (axes, _)) in self.terms.iter().enumerate() {
            if axes.len() != m || axes.windows(2).any(|w| w[0] >= w[1]) || axes.iter().any(|a| *a >= n) {
                return Err(McfError::InvalidInput(format!("ω term {i} needs {m} increasing axes below {n}")));
            }
            if self.terms[..i].iter().any(|t| &t.0 == axes) {
                return Err(McfError::InvalidInput("ω has repeated axis tuples".into()));
            }
        }
        let norm: f64 = self.terms.iter().map(|t| t.1 * t.1).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(McfError::InvalidInput(format!("ω must have unit norm, got {}", norm.sqrt())));
        }
        Ok(())
    }

    /// `ω(X₁, …, X_m)` for tangent columns of `df` (layout `(α, i)`).
    pub fn evaluate(&self, df: &[f64], m: usize) -> f64 {
        self.terms
            .iter()
            .map(|(axes, coef)| {
                let mut mat = vec![0.0; m * m];
                for (r, a) in axes.iter().enumerate() {
                    for s in 0..m {
                        mat[r * m + s] = df[a * m + s];
                    }
                }
                coef * linalg::determinant(&mat, m)
            })
            .sum()
    }
}

#[derive(Debug, Clone)]
pub struct GraphQuantity {
    pub w: Vec<f64>,
    /// `v = 1/w` where `w > 0`; `None` flags a non-graphical node.
    pub v: Vec<Option<f64>>,
}

impl GraphQuantity {
    pub fn is_graphical(&self) -> bool {
        self.v.iter().all(Option::is_some)
    }
}

/// `w = ω(F_1, …, F_m) / √det g` at every node.
pub fn graph_w(gs: &GeometryState, omega: &ParallelForm) -> Result<GraphQuantity> {
    omega.validate(gs.m, gs.n)?;
    let w: Vec<f64> =
        (0..gs.node_count()).map(|node| omega.evaluate(gs.df.at(node), gs.m) / gs.sqrt_det[node]).collect();
    let v = w.iter().map(|&x| (x > 0.0).then(|| 1.0 / x)).collect();
    Ok(GraphQuantity { w, v })
}

/// `sup |F⊥ − H|` over nodes.
pub fn expander_residual(gs: &GeometryState) -> f64 {
    (0..gs.node_count())
        .map(|node| {
            let fp = gs.normal_part(node, gs.point(node));
            fp.iter().zip(gs.h.at(node)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_geometry;
    use crate::grid::{ImmersionGrid, ParameterDomain, StencilOrder};
    use std::f64::consts::{PI, TAU};

    #[test]
    fn inclined_line_has_cosine_density() {
        let th = PI / 6.0;
        let d = ParameterDomain::new(vec![16], vec![1.0], vec![vec![th.cos(), th.sin()]]).unwrap();
        let im = ImmersionGrid::from_fn(d, 2, |x| vec![x[0] * th.cos(), x[0] * th.sin()]).unwrap();
        let gs = build_geometry(&im, StencilOrder::Second).unwrap();
        let gq = graph_w(&gs, &ParallelForm::coordinate(vec![0])).unwrap();
        assert!(gq.w.iter().all(|w| (w - th.cos()).abs() < 1e-14));
        assert!(expander_residual(&gs) < 1e-12);
    }

    #[test]
    fn rejects_bad_forms_and_bases() {
        assert!(ParallelForm { terms: vec![(vec![1, 0], 1.0)] }.validate(2, 4).is_err());
        assert!(ParallelForm { terms: vec![(vec![0, 1], 0.5)] }.validate(2, 4).is_err());
        assert!(check_orthonormal(&[vec![1.0, 0.0], vec![1.0, 1.0]], 2).is_err());
    }

    #[test]
    fn circle_expander_residual_is_two() {
        let d = ParameterDomain::periodic(vec![256], vec![TAU], 3).unwrap();
        let im = ImmersionGrid::from_fn(d, 3, |x| vec![x[0].cos(), x[0].sin(), 0.0]).unwrap();
        let gs = build_geometry(&im, StencilOrder::Fourth).unwrap();
        assert!((expander_residual(&gs) - 2.0).abs() < 1e-6);
    }
}
