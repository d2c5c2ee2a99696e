//! Resampling of sampled immersions at arbitrary parameter points.
//!
//! Used to compare two discretizations of the same surface whose
//! parametrizations have drifted apart, by matching points over a common base
//! plane.

use nalgebra::{DMatrix, DVector};

use crate::error::{McfError, Result};
use crate::grid::ImmersionGrid;

/// Tensor-product cubic Lagrange interpolation on a periodic or equivariant grid.
pub struct Interpolant<'a> {
    grid: &'a ImmersionGrid,
}

fn cubic_weights(t: f64) -> [f64; 4] {
    // nodes at −1, 0, 1, 2
    [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ]
}

impl<'a> Interpolant<'a> {
    pub fn new(grid: &'a ImmersionGrid) -> Self {
        Self { grid }
    }

    /// Visits the 4^m stencil around `x` as (node, weight, wrap counts).
    fn stencil(&self, x: &[f64], mut visit: impl FnMut(usize, f64, &[i64])) {
        let d = &self.grid.domain;
        let m = d.dim();
        let mut base = vec![0i64; m];
        let mut w = vec![[0.0; 4]; m];
        for a in 0..m {
            let s = (x[a] - d.origin()[a]) / d.spacing(a);
            let f = s.floor();
            base[a] = f as i64;
            w[a] = cubic_weights(s - f);
        }
        let sizes = d.sizes();
        let mut idx = vec![0usize; m];
        let mut wraps = vec![0i64; m];
        for flat in 0..4usize.pow(m as u32) {
            let mut rem = flat;
            let mut weight = 1.0;
            for a in (0..m).rev() {
                let o = rem % 4;
                rem /= 4;
                let j = base[a] + o as i64 - 1;
                let n = sizes[a] as i64;
                idx[a] = j.rem_euclid(n) as usize;
                wraps[a] = j.div_euclid(n);
                weight *= w[a][o];
            }
            visit(d.linear_index(&idx), weight, &wraps);
        }
    }

    /// Interpolated ambient position, honouring the domain shifts.
    pub fn point(&self, x: &[f64]) -> Vec<f64> {
        let d = &self.grid.domain;
        let n = self.grid.ambient_dim();
        let mut out = vec![0.0; n];
        self.stencil(x, |node, w, wraps| {
            let p = self.grid.point(node);
            for al in 0..n {
                let shift: f64 = wraps.iter().enumerate().map(|(a, c)| *c as f64 * d.shift(a)[al]).sum();
                out[al] += w * (p[al] + shift);
            }
        });
        out
    }

    /// Interpolated value of a periodic scalar field given per node.
    pub fn scalar(&self, values: &[f64], x: &[f64]) -> f64 {
        let mut s = 0.0;
        self.stencil(x, |node, w, _| s += w * values[node]);
        s
    }

    /// Parameter `x` with `F(x)` projecting to `target` on the coordinate
    /// axes `axes`, by Newton iteration from `guess`.
    pub fn invert_projection(&self, axes: &[usize], target: &[f64], guess: &[f64]) -> Result<Vec<f64>> {
        let m = self.grid.dim();
        if axes.len() != m || target.len() != m {
            return Err(McfError::InvalidInput("projection needs one axis per parameter".into()));
        }
        let h = 1e-6 * self.grid.domain.min_spacing();
        let mut x = guess.to_vec();
        for _ in 0..30 {
            let p = self.point(&x);
            let r = DVector::from_iterator(m, axes.iter().zip(target).map(|(a, t)| p[*a] - t));
            if r.amax() < 1e-13 {
                return Ok(x);
            }
            let mut jac = DMatrix::zeros(m, m);
            for b in 0..m {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[b] += h;
                xm[b] -= h;
                let (fp, fm) = (self.point(&xp), self.point(&xm));
                for (row, a) in axes.iter().enumerate() {
                    jac[(row, b)] = (fp[*a] - fm[*a]) / (2.0 * h);
                }
            }
            let dx = jac
                .lu()
                .solve(&r)
                .ok_or_else(|| McfError::InvalidInput("projection is singular".into()))?;
            for b in 0..m {
                x[b] -= dx[b];
            }
        }
        Err(McfError::InvalidInput(format!("projection inverse did not converge near {guess:?}")))
    }
}

/// Sup-norm differences of scalar fields between two samplings of one surface.
///
/// Every node of `reference` is projected to the base coordinates `axes`;
/// the matching parameter point of `other` is found by Newton iteration and
/// each field of `other` is interpolated there.
pub fn base_matched_difference(
    reference: &ImmersionGrid,
    reference_fields: &[&[f64]],
    other: &ImmersionGrid,
    other_fields: &[&[f64]],
    axes: &[usize],
) -> Result<Vec<f64>> {
    if reference_fields.len() != other_fields.len() {
        return Err(McfError::InvalidInput("field lists differ in length".into()));
    }
    let interp = Interpolant::new(other);
    let mut out = vec![0.0f64; reference_fields.len()];
    for node in 0..reference.node_count() {
        let p = reference.point(node);
        let target: Vec<f64> = axes.iter().map(|a| p[*a]).collect();
        let x = interp.invert_projection(axes, &target, &reference.domain.coords(node))?;
        for (k, (rf, of)) in reference_fields.iter().zip(other_fields).enumerate() {
            out[k] = out[k].max((rf[node] - interp.scalar(of, &x)).abs());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{make_scenario, ScenarioSpec};

    #[test]
    fn weights_reproduce_cubics() {
        for t in [0.0, 0.25, 0.7] {
            let w = cubic_weights(t);
            let f = |x: f64| 1.0 - 2.0 * x + 0.5 * x * x * x;
            let v: f64 = w.iter().zip([-1.0, 0.0, 1.0, 2.0]).map(|(w, x)| w * f(x)).sum();
            assert!((v - f(t)).abs() < 1e-14);
        }
    }

    #[test]
    fn equivariant_points_are_resampled_accurately() {
        let eps = 0.3;
        let im = make_scenario(&ScenarioSpec::EpsGraph { eps, nodes: 64 }).unwrap();
        let interp = Interpolant::new(&im);
        for x in [[0.123, -2.9], [3.5, 7.0], [-4.0, 0.01]] {
            let p = interp.point(&x);
            let exact = [x[0], x[1], eps * x[0].sin(), eps * x[1].sin()];
            for (a, b) in p.iter().zip(exact) {
                assert!((a - b).abs() < 1e-5, "{p:?} {exact:?}");
            }
        }
        let y = interp.invert_projection(&[0, 1], &[0.4, -1.3], &[0.0, 0.0]).unwrap();
        assert!((y[0] - 0.4).abs() < 1e-12 && (y[1] + 1.3).abs() < 1e-12);
    }

    #[test]
    fn identical_grids_match_exactly() {
        let im = make_scenario(&ScenarioSpec::EpsGraph { eps: 0.3, nodes: 16 }).unwrap();
        let f: Vec<f64> = (0..im.node_count()).map(|i| im.point(i)[2]).collect();
        let d = base_matched_difference(&im, &[&f], &im, &[&f], &[0, 1]).unwrap();
        assert!(d[0] < 1e-12);
    }
}
