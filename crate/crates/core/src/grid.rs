//! Periodic and equivariant parameter grids, grid-sampled immersions and
//! central finite-difference stencils.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{McfError, Result};

pub const MIN_AXIS_NODES: usize = 8;

/// Central difference accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(try_from = "u8", into = "u8")]
pub enum StencilOrder {
    #[default]
    Second,
    Fourth,
}

impl TryFrom<u8> for StencilOrder {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            2 => Ok(Self::Second),
            4 => Ok(Self::Fourth),
            _ => Err(format!("stencil order must be 2 or 4, got {v}")),
        }
    }
}

impl From<StencilOrder> for u8 {
    fn from(o: StencilOrder) -> u8 {
        match o {
            StencilOrder::Second => 2,
            StencilOrder::Fourth => 4,
        }
    }
}

impl StencilOrder {
    /// `(offset, weight)` pairs of the first-derivative stencil, unit spacing.
    pub fn first(self) -> &'static [(isize, f64)] {
        match self {
            Self::Second => &[(-1, -0.5), (1, 0.5)],
            Self::Fourth => &[(-2, 1.0 / 12.0), (-1, -8.0 / 12.0), (1, 8.0 / 12.0), (2, -1.0 / 12.0)],
        }
    }

    /// `(offset, weight)` pairs of the second-derivative stencil, unit spacing.
    pub fn second(self) -> &'static [(isize, f64)] {
        match self {
            Self::Second => &[(-1, 1.0), (0, -2.0), (1, 1.0)],
            Self::Fourth => &[
                (-2, -1.0 / 12.0),
                (-1, 16.0 / 12.0),
                (0, -30.0 / 12.0),
                (1, 16.0 / 12.0),
                (2, -1.0 / 12.0),
            ],
        }
    }
}

/// Closed or equivariant parameter domain `∏ [0, P_a)` sampled on a uniform grid.
///
/// Wrapping across axis `a` adds `shifts[a]` to the ambient position; a zero
/// shift is plain periodicity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterDomain {
    sizes: Vec<usize>,
    periods: Vec<f64>,
    origin: Vec<f64>,
    shifts: Vec<Vec<f64>>,
    strides: Vec<usize>,
}

impl ParameterDomain {
    pub fn new(sizes: Vec<usize>, periods: Vec<f64>, shifts: Vec<Vec<f64>>) -> Result<Self> {
        let m = sizes.len();
        if m == 0 || periods.len() != m || shifts.len() != m {
            return Err(McfError::InvalidInput("domain axes are inconsistent".into()));
        }
        if let Some(s) = sizes.iter().find(|s| **s < MIN_AXIS_NODES) {
            return Err(McfError::InvalidInput(format!("axis has {s} nodes, need at least {MIN_AXIS_NODES}")));
        }
        if periods.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(McfError::InvalidInput("periods must be positive".into()));
        }
        let n = shifts[0].len();
        if shifts.iter().any(|s| s.len() != n) {
            return Err(McfError::InvalidInput("shift vectors differ in length".into()));
        }
        let mut strides = vec![1; m];
        for a in (0..m.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * sizes[a + 1];
        }
        Ok(Self { origin: vec![0.0; m], sizes, periods, shifts, strides })
    }

    /// Periodic domain without equivariance in ambient dimension `n`.
    pub fn periodic(sizes: Vec<usize>, periods: Vec<f64>, n: usize) -> Result<Self> {
        let m = sizes.len();
        Self::new(sizes, periods, vec![vec![0.0; n]; m])
    }

    pub fn with_origin(mut self, origin: Vec<f64>) -> Self {
        assert_eq!(origin.len(), self.dim());
        self.origin = origin;
        self
    }

    pub fn dim(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn periods(&self) -> &[f64] {
        &self.periods
    }

    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn shifts(&self) -> &[Vec<f64>] {
        &self.shifts
    }

    pub fn shift(&self, axis: usize) -> &[f64] {
        &self.shifts[axis]
    }

    pub fn set_shifts(&mut self, shifts: Vec<Vec<f64>>) {
        assert_eq!(shifts.len(), self.dim());
        self.shifts = shifts;
    }

    pub fn is_equivariant(&self) -> bool {
        self.shifts.iter().flatten().any(|x| *x != 0.0)
    }

    pub fn node_count(&self) -> usize {
        self.sizes.iter().product()
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.periods[axis] / self.sizes[axis] as f64
    }

    pub fn min_spacing(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).fold(f64::INFINITY, f64::min)
    }

    pub fn multi_index(&self, node: usize) -> Vec<usize> {
        (0..self.dim()).map(|a| (node / self.strides[a]) % self.sizes[a]).collect()
    }

    pub fn linear_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn coords(&self, node: usize) -> Vec<f64> {
        self.multi_index(node)
            .iter()
            .enumerate()
            .map(|(a, i)| self.origin[a] + *i as f64 * self.spacing(a))
            .collect()
    }

    /// Neighbour of `node` displaced by `offset` along `axis`, with the signed wrap count.
    #[inline]
    pub fn neighbor(&self, node: usize, axis: usize, offset: isize) -> (usize, i64) {
        let n = self.sizes[axis] as isize;
        let stride = self.strides[axis];
        let i = ((node / stride) % self.sizes[axis]) as isize;
        let j = i + offset;
        let wraps = j.div_euclid(n);
        let jm = j.rem_euclid(n);
        ((node as isize + (jm - i) * stride as isize) as usize, wraps as i64)
    }

    /// Same grid with every axis refined by `factor`.
    pub fn refined(&self, factor: usize) -> Self {
        let mut d = self.clone();
        d.sizes.iter_mut().for_each(|s| *s *= factor);
        let m = d.dim();
        d.strides = vec![1; m];
        for a in (0..m.saturating_sub(1)).rev() {
            d.strides[a] = d.strides[a + 1] * d.sizes[a + 1];
        }
        d
    }
}

/// Sampled immersion `F: grid → ℝⁿ` at flow time `time`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImmersionGrid {
    pub domain: ParameterDomain,
    n: usize,
    points: Vec<f64>,
    pub time: f64,
}

impl ImmersionGrid {
    pub fn new(domain: ParameterDomain, n: usize, points: Vec<f64>, time: f64) -> Result<Self> {
        if points.len() != domain.node_count() * n {
            return Err(McfError::InvalidInput("point array does not match the grid".into()));
        }
        if domain.shifts.iter().any(|s| s.len() != n) {
            return Err(McfError::InvalidInput("shift vectors must live in the ambient space".into()));
        }
        if n < domain.dim() {
            return Err(McfError::InvalidInput("ambient dimension below intrinsic dimension".into()));
        }
        Ok(Self { domain, n, points, time })
    }

    /// Samples `f` at the parameter coordinates of every node.
    pub fn from_fn(domain: ParameterDomain, n: usize, f: impl Fn(&[f64]) -> Vec<f64> + Sync) -> Result<Self> {
        let count = domain.node_count();
        let mut points = vec![0.0; count * n];
        points.par_chunks_mut(n).enumerate().for_each(|(node, out)| {
            let p = f(&domain.coords(node));
            out.copy_from_slice(&p);
        });
        Self::new(domain, n, points, 0.0)
    }

    pub fn ambient_dim(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn codim(&self) -> usize {
        self.n - self.domain.dim()
    }

    pub fn node_count(&self) -> usize {
        self.domain.node_count()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn points_mut(&mut self) -> &mut [f64] {
        &mut self.points
    }

    #[inline]
    pub fn point(&self, node: usize) -> &[f64] {
        &self.points[node * self.n..(node + 1) * self.n]
    }

    /// Ambient position of a neighbour, including equivariance shifts.
    pub fn neighbor_point(&self, node: usize, axis: usize, offset: isize) -> Vec<f64> {
        let (nb, wraps) = self.domain.neighbor(node, axis, offset);
        let s = self.domain.shift(axis);
        self.point(nb).iter().zip(s).map(|(p, s)| p + wraps as f64 * s).collect()
    }
}

/// Per-node vector-valued field stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub ncomp: usize,
    pub data: Vec<f64>,
}

impl Field {
    pub fn zeros(nodes: usize, ncomp: usize) -> Self {
        Self { ncomp, data: vec![0.0; nodes * ncomp] }
    }

    pub fn from_scalars(data: Vec<f64>) -> Self {
        Self { ncomp: 1, data }
    }

    #[inline]
    pub fn at(&self, node: usize) -> &[f64] {
        &self.data[node * self.ncomp..(node + 1) * self.ncomp]
    }

    pub fn nodes(&self) -> usize {
        self.data.len() / self.ncomp
    }

    pub fn sup_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

fn apply_stencil(
    domain: &ParameterDomain,
    data: &[f64],
    ncomp: usize,
    axis: usize,
    stencil: &[(isize, f64)],
    scale: f64,
    shift: Option<&[f64]>,
) -> Vec<f64> {
    let mut out = vec![0.0; data.len()];
    out.par_chunks_mut(ncomp).enumerate().for_each(|(node, o)| {
        for &(off, w) in stencil {
            let (nb, wraps) = domain.neighbor(node, axis, off);
            let src = &data[nb * ncomp..(nb + 1) * ncomp];
            for c in 0..ncomp {
                let mut v = src[c];
                if let Some(s) = shift {
                    v += wraps as f64 * s[c];
                }
                o[c] += w * v;
            }
        }
        o.iter_mut().for_each(|x| *x *= scale);
    });
    out
}

/// First derivative of a periodic field along `axis`.
pub fn diff(domain: &ParameterDomain, field: &Field, axis: usize, order: StencilOrder) -> Field {
    let h = domain.spacing(axis);
    Field { ncomp: field.ncomp, data: apply_stencil(domain, &field.data, field.ncomp, axis, order.first(), 1.0 / h, None) }
}

/// Second derivative of a periodic field along `axis`.
pub fn diff2(domain: &ParameterDomain, field: &Field, axis: usize, order: StencilOrder) -> Field {
    let h = domain.spacing(axis);
    Field {
        ncomp: field.ncomp,
        data: apply_stencil(domain, &field.data, field.ncomp, axis, order.second(), 1.0 / (h * h), None),
    }
}

/// Gradient of a periodic field: output components indexed `(l, c)`.
pub fn gradient(domain: &ParameterDomain, field: &Field, order: StencilOrder) -> Field {
    let m = domain.dim();
    let parts: Vec<Field> = (0..m).map(|a| diff(domain, field, a, order)).collect();
    interleave(&parts)
}

/// Stacks per-axis fields into one field with a leading axis index.
pub fn interleave(parts: &[Field]) -> Field {
    let ncomp = parts[0].ncomp;
    let nodes = parts[0].nodes();
    let m = parts.len();
    let mut data = vec![0.0; nodes * m * ncomp];
    data.par_chunks_mut(m * ncomp).enumerate().for_each(|(node, o)| {
        for (a, p) in parts.iter().enumerate() {
            o[a * ncomp..(a + 1) * ncomp].copy_from_slice(p.at(node));
        }
    });
    Field { ncomp: m * ncomp, data }
}

/// `F^α_i` and `F^α_ij` of an immersion, indexed `(α, i)` and `(α, i, j)`.
pub fn position_derivatives(grid: &ImmersionGrid, order: StencilOrder) -> (Field, Field) {
    let d = &grid.domain;
    let (m, n) = (d.dim(), grid.ambient_dim());
    let first: Vec<Vec<f64>> = (0..m)
        .map(|a| apply_stencil(d, grid.points(), n, a, order.first(), 1.0 / d.spacing(a), Some(d.shift(a))))
        .collect();
    let second: Vec<Vec<f64>> = (0..m)
        .map(|a| {
            let h = d.spacing(a);
            apply_stencil(d, grid.points(), n, a, order.second(), 1.0 / (h * h), Some(d.shift(a)))
        })
        .collect();
    let mut mixed = vec![vec![Vec::new(); m]; m];
    for i in 0..m {
        for j in (i + 1)..m {
            mixed[i][j] = apply_stencil(d, &first[i], n, j, order.first(), 1.0 / d.spacing(j), None);
        }
    }
    let nodes = d.node_count();
    let mut df = Field::zeros(nodes, n * m);
    let mut ddf = Field::zeros(nodes, n * m * m);
    df.data.par_chunks_mut(n * m).zip(ddf.data.par_chunks_mut(n * m * m)).enumerate().for_each(
        |(node, (o1, o2))| {
            for al in 0..n {
                for i in 0..m {
                    o1[al * m + i] = first[i][node * n + al];
                    for j in 0..m {
                        let v = if i == j {
                            second[i][node * n + al]
                        } else if i < j {
                            mixed[i][j][node * n + al]
                        } else {
                            mixed[j][i][node * n + al]
                        };
                        o2[(al * m + i) * m + j] = v;
                    }
                }
            }
        },
    );
    (df, ddf)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neighbor_wraps_with_count() {
        let d = ParameterDomain::periodic(vec![8, 10], vec![1.0, 1.0], 3).unwrap();
        let node = d.linear_index(&[0, 9]);
        assert_eq!(d.neighbor(node, 1, 1), (d.linear_index(&[0, 0]), 1));
        assert_eq!(d.neighbor(node, 0, -2), (d.linear_index(&[6, 9]), -1));
        assert_eq!(d.neighbor(node, 0, 3), (d.linear_index(&[3, 9]), 0));
    }

    #[test]
    fn rejects_small_axes() {
        assert!(ParameterDomain::periodic(vec![4], vec![1.0], 2).is_err());
    }

    #[test]
    fn stencils_differentiate_trig_exactly_in_the_limit() {
        for order in [StencilOrder::Second, StencilOrder::Fourth] {
            let mut errs = Vec::new();
            for n in [32, 64] {
                let d = ParameterDomain::periodic(vec![n], vec![std::f64::consts::TAU], 1).unwrap();
                let f = Field::from_scalars((0..n).map(|i| d.coords(i)[0].sin()).collect());
                let df = diff(&d, &f, 0, order);
                let e = (0..n).map(|i| (df.data[i] - d.coords(i)[0].cos()).abs()).fold(0.0, f64::max);
                errs.push(e);
            }
            let expected = if order == StencilOrder::Second { 4.0 } else { 16.0 };
            let ratio = errs[0] / errs[1];
            assert!((ratio / expected - 1.0).abs() < 0.05, "ratio {ratio}");
        }
    }

    #[test]
    fn equivariant_line_has_constant_tangent() {
        let d = ParameterDomain::new(vec![16], vec![2.0], vec![vec![2.0, 0.0]]).unwrap();
        let g = ImmersionGrid::from_fn(d, 2, |x| vec![x[0], 0.0]).unwrap();
        let (df, ddf) = position_derivatives(&g, StencilOrder::Fourth);
        for node in 0..16 {
            assert!((df.at(node)[0] - 1.0).abs() < 1e-13);
            assert!(ddf.at(node).iter().all(|v| v.abs() < 1e-12));
        }
    }
}
