//! Single-fiber multilinear algebra of the second fundamental form.
//!
//! A [`FundamentalFormSample`] holds the metric `g_ij`, the components
//! `A^α_ij` of the second fundamental form in an orthonormal normal frame
//! and optionally the covariant derivative `∇_l A^α_ij`. Greek indices are
//! orthonormal, so only Latin indices are raised with `g^{ij}`.
//!
//! The cubic contraction invariants `Γ1..Γ7` and the gradient invariants
//! `G1..G4` are evaluated in an orthonormal tangent frame obtained from the
//! Cholesky factor of `g`; all of them are frame independent scalars.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{McfError, Result};
use crate::linalg;

const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalFormSample {
    m: usize,
    k: usize,
    g: Vec<f64>,
    a: Vec<f64>,
    grad: Option<Vec<f64>>,
}

impl FundamentalFormSample {
    /// `g` is row-major `m × m`, `a` is indexed `(α, i, j)`, `grad` is indexed `(l, α, i, j)`.
    pub fn new(m: usize, k: usize, g: Vec<f64>, a: Vec<f64>, grad: Option<Vec<f64>>) -> Result<Self> {
        if m == 0 || k == 0 {
            return Err(McfError::InvalidInput("m and k must be positive".into()));
        }
        if g.len() != m * m || a.len() != k * m * m {
            return Err(McfError::InvalidInput("shape mismatch for g or A".into()));
        }
        if let Some(d) = &grad {
            if d.len() != m * k * m * m {
                return Err(McfError::InvalidInput("shape mismatch for ∇A".into()));
            }
        }
        let sym = |x: f64, y: f64| (x - y).abs() <= SYMMETRY_TOL * (1.0 + x.abs().max(y.abs()));
        for i in 0..m {
            for j in 0..m {
                if !sym(g[i * m + j], g[j * m + i]) {
                    return Err(McfError::InvalidInput("metric is not symmetric".into()));
                }
                for al in 0..k {
                    let o = al * m * m;
                    if !sym(a[o + i * m + j], a[o + j * m + i]) {
                        return Err(McfError::InvalidInput("A is not symmetric in (i,j)".into()));
                    }
                }
                if let Some(d) = &grad {
                    for q in 0..m * k {
                        let o = q * m * m;
                        if !sym(d[o + i * m + j], d[o + j * m + i]) {
                            return Err(McfError::InvalidInput("∇A is not symmetric in (i,j)".into()));
                        }
                    }
                }
            }
        }
        if !linalg::is_spd(&g, m) {
            return Err(McfError::NotPositiveDefinite);
        }
        Ok(Self { m, k, g, a, grad })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn metric(&self) -> &[f64] {
        &self.g
    }

    pub fn form(&self) -> &[f64] {
        &self.a
    }

    pub fn gradient(&self) -> Option<&[f64]> {
        self.grad.as_deref()
    }

    #[inline]
    pub fn a(&self, al: usize, i: usize, j: usize) -> f64 {
        self.a[(al * self.m + i) * self.m + j]
    }

    /// Copy with `A → λA` and `∇A → λ∇A`.
    pub fn scaled(&self, lambda: f64) -> Self {
        Self {
            a: self.a.iter().map(|x| x * lambda).collect(),
            grad: self.grad.as_ref().map(|d| d.iter().map(|x| x * lambda).collect()),
            ..self.clone()
        }
    }

    fn metric_inverse(&self) -> Vec<f64> {
        linalg::spd_inverse(&self.g, self.m).expect("validated SPD").0
    }

    fn orthonormal(&self) -> OrthoForm {
        let (m, k) = (self.m, self.k);
        let l = linalg::cholesky_lower(&self.g, m).expect("validated SPD");
        let li = linalg::lower_inverse(&l, m);
        let mut a = vec![0.0; k * m * m];
        for al in 0..k {
            for p in 0..m {
                for q in 0..m {
                    let mut s = 0.0;
                    for i in 0..m {
                        for j in 0..m {
                            s += li[p * m + i] * li[q * m + j] * self.a(al, i, j);
                        }
                    }
                    a[(al * m + p) * m + q] = s;
                }
            }
        }
        let grad = self.grad.as_ref().map(|d| {
            let mut out = vec![0.0; m * k * m * m];
            for c in 0..m {
                for al in 0..k {
                    for p in 0..m {
                        for q in 0..m {
                            let mut s = 0.0;
                            for l_ in 0..m {
                                for i in 0..m {
                                    for j in 0..m {
                                        s += li[c * m + l_]
                                            * li[p * m + i]
                                            * li[q * m + j]
                                            * d[((l_ * k + al) * m + i) * m + j];
                                    }
                                }
                            }
                            out[((c * k + al) * m + p) * m + q] = s;
                        }
                    }
                }
            }
            out
        });
        OrthoForm { m, k, a, grad }
    }
}

/// Second fundamental form in orthonormal tangent and normal frames.
struct OrthoForm {
    m: usize,
    k: usize,
    a: Vec<f64>,
    grad: Option<Vec<f64>>,
}

impl OrthoForm {
    #[inline]
    fn a(&self, al: usize, i: usize, j: usize) -> f64 {
        self.a[(al * self.m + i) * self.m + j]
    }

    fn b(&self) -> Vec<f64> {
        let m = self.m;
        let mut b = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                b[i * m + j] = (0..self.k)
                    .map(|al| (0..m).map(|s| self.a(al, i, s) * self.a(al, s, j)).sum::<f64>())
                    .sum();
            }
        }
        b
    }

    /// `c[α][β][i][j] = A^α_ik A^β_kj`.
    fn c(&self) -> Vec<f64> {
        let (m, k) = (self.m, self.k);
        let mut c = vec![0.0; k * k * m * m];
        for al in 0..k {
            for be in 0..k {
                for i in 0..m {
                    for j in 0..m {
                        c[((al * k + be) * m + i) * m + j] =
                            (0..m).map(|s| self.a(al, i, s) * self.a(be, s, j)).sum();
                    }
                }
            }
        }
        c
    }

    fn rperp(&self, c: &[f64]) -> Vec<f64> {
        let (m, k) = (self.m, self.k);
        let mut r = vec![0.0; k * k * m * m];
        for ab in 0..k * k {
            for i in 0..m {
                for j in 0..m {
                    r[(ab * m + i) * m + j] = c[(ab * m + i) * m + j] - c[(ab * m + j) * m + i];
                }
            }
        }
        r
    }

    /// Intrinsic curvature from the Gauss equation, `R_ijkl = A_ik·A_jl − A_il·A_jk`.
    fn riemann(&self) -> Vec<f64> {
        let m = self.m;
        let mut r = vec![0.0; m * m * m * m];
        for i in 0..m {
            for j in 0..m {
                for p in 0..m {
                    for q in 0..m {
                        r[((i * m + j) * m + p) * m + q] = (0..self.k)
                            .map(|al| self.a(al, i, p) * self.a(al, j, q) - self.a(al, i, q) * self.a(al, j, p))
                            .sum();
                    }
                }
            }
        }
        r
    }
}

/// Invariants derived pointwise from one sample, in coordinate components.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedInvariants {
    pub m: usize,
    pub k: usize,
    /// `H^α = g^ij A^α_ij`.
    pub h: Vec<f64>,
    /// `a_ij = H^α A^α_ij`.
    pub a: Vec<f64>,
    /// `b_ij = A^α_ik g^kl A^α_lj`.
    pub b: Vec<f64>,
    /// `c^αβ_ij = A^α_ik g^kl A^β_lj`, indexed `(α, β, i, j)`.
    pub c: Vec<f64>,
    /// Normal curvature `R^αβ_ij = c^αβ_ij − c^αβ_ji`, indexed `(α, β, i, j)`.
    pub rperp: Vec<f64>,
    pub norm_a_sq: f64,
    pub norm_h_sq: f64,
    pub norm_a_tensor_sq: f64,
    pub norm_b_sq: f64,
    pub norm_rperp_sq: f64,
    /// `|A^{αm}_n A^{βn}_m|²`, the squared Gram matrix of the shape operators.
    pub normal_gram_sq: f64,
}

impl DerivedInvariants {
    #[inline]
    pub fn rperp_at(&self, al: usize, be: usize, i: usize, j: usize) -> f64 {
        self.rperp[((al * self.k + be) * self.m + i) * self.m + j]
    }

    #[inline]
    pub fn c_at(&self, al: usize, be: usize, i: usize, j: usize) -> f64 {
        self.c[((al * self.k + be) * self.m + i) * self.m + j]
    }
}

fn norm2_lower(t: &[f64], ginv: &[f64], m: usize) -> f64 {
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

pub fn derive_invariants(s: &FundamentalFormSample) -> DerivedInvariants {
    let (m, k) = (s.m, s.k);
    let ginv = s.metric_inverse();
    let h: Vec<f64> = (0..k)
        .map(|al| {
            let mut t = 0.0;
            for i in 0..m {
                for j in 0..m {
                    t += ginv[i * m + j] * s.a(al, i, j);
                }
            }
            t
        })
        .collect();
    let mut a = vec![0.0; m * m];
    let mut c = vec![0.0; k * k * m * m];
    for i in 0..m {
        for j in 0..m {
            a[i * m + j] = (0..k).map(|al| h[al] * s.a(al, i, j)).sum();
            for al in 0..k {
                for be in 0..k {
                    let mut t = 0.0;
                    for p in 0..m {
                        for q in 0..m {
                            t += s.a(al, i, p) * ginv[p * m + q] * s.a(be, q, j);
                        }
                    }
                    c[((al * k + be) * m + i) * m + j] = t;
                }
            }
        }
    }
    let mut b = vec![0.0; m * m];
    for al in 0..k {
        for ij in 0..m * m {
            b[ij] += c[(al * k + al) * m * m + ij];
        }
    }
    let mut rperp = vec![0.0; k * k * m * m];
    for ab in 0..k * k {
        for i in 0..m {
            for j in 0..m {
                rperp[(ab * m + i) * m + j] = c[(ab * m + i) * m + j] - c[(ab * m + j) * m + i];
            }
        }
    }
    let norm_a_sq = (0..k).map(|al| norm2_lower(&s.a[al * m * m..(al + 1) * m * m], &ginv, m)).sum();
    let norm_rperp_sq = (0..k * k).map(|ab| norm2_lower(&rperp[ab * m * m..(ab + 1) * m * m], &ginv, m)).sum();
    let mut normal_gram_sq = 0.0;
    for al in 0..k {
        for be in 0..k {
            let mut t = 0.0;
            for i in 0..m {
                t += c[((al * k + be) * m + i) * m..][..m]
                    .iter()
                    .enumerate()
                    .map(|(j, v)| v * ginv[j * m + i])
                    .sum::<f64>();
            }
            normal_gram_sq += t * t;
        }
    }
    DerivedInvariants {
        m,
        k,
        norm_h_sq: h.iter().map(|x| x * x).sum(),
        norm_a_tensor_sq: norm2_lower(&a, &ginv, m),
        norm_b_sq: norm2_lower(&b, &ginv, m),
        h,
        a,
        b,
        c,
        rperp,
        norm_a_sq,
        norm_rperp_sq,
        normal_gram_sq,
    }
}

/// The seven cubic contractions `Γ1..Γ7` (index 0 holds `Γ1`).
pub fn gamma_values(s: &FundamentalFormSample) -> [f64; 7] {
    gammas_ortho(&s.orthonormal())
}

fn gammas_ortho(o: &OrthoForm) -> [f64; 7] {
    let (m, k) = (o.m, o.k);
    let b = o.b();
    let c = o.c();
    let ci = |al: usize, be: usize, i: usize, j: usize| c[((al * k + be) * m + i) * m + j];
    let tr: Vec<f64> = (0..k * k)
        .map(|ab| (0..m).map(|l| c[(ab * m + l) * m + l]).sum())
        .collect();
    let mut g = [0.0; 7];
    for i in 0..m {
        for j in 0..m {
            for p in 0..m {
                g[0] += b[i * m + j] * b[p * m + i] * b[j * m + p];
            }
        }
    }
    for i in 0..m {
        for j in 0..m {
            for mm in 0..m {
                for kk in 0..m {
                    let bb = b[i * m + j] * b[mm * m + kk];
                    if bb == 0.0 {
                        continue;
                    }
                    let s: f64 = (0..k).map(|al| o.a(al, kk, j) * o.a(al, mm, i)).sum();
                    g[1] += bb * s;
                }
            }
        }
    }
    for al in 0..k {
        for be in 0..k {
            let t = tr[al * k + be];
            for i in 0..m {
                for j in 0..m {
                    g[2] += b[i * m + j] * ci(al, be, j, i) * t;
                    for kk in 0..m {
                        g[3] += b[j * m + i] * ci(al, be, j, kk) * ci(be, al, i, kk);
                    }
                }
            }
        }
    }
    for al in 0..k {
        for ga in 0..k {
            let t = tr[al * k + ga];
            for be in 0..k {
                for i in 0..m {
                    for j in 0..m {
                        if t != 0.0 {
                            g[4] += t * ci(be, ga, i, j) * ci(be, al, j, i);
                        }
                        for p in 0..m {
                            g[5] += ci(al, ga, p, i) * ci(be, ga, j, p) * ci(be, al, i, j);
                            g[6] += ci(al, be, i, j) * ci(al, ga, p, j) * ci(ga, be, i, p);
                        }
                    }
                }
            }
        }
    }
    g
}

/// Reaction term of the `|R⊥|²` evolution equation expressed through `Γ1..Γ7`.
pub fn normal_curvature_reaction(g: &[f64; 7]) -> f64 {
    8.0 * g[0] + 8.0 * g[1] + 16.0 * g[2] - 32.0 * g[3] - 16.0 * g[4] + 16.0 * g[5]
}

/// Absolute and relative residual of one identity `lhs = rhs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityResidual {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub abs: f64,
    pub rel: f64,
}

impl IdentityResidual {
    pub fn new(name: &'static str, lhs: f64, rhs: f64) -> Self {
        let abs = (lhs - rhs).abs();
        Self { name, lhs, rhs, abs, rel: abs / (1.0 + lhs.abs().max(rhs.abs())) }
    }
}

/// Left-hand sides of the four curvature contractions, in the orthonormal frame.
struct CurvatureContractions {
    rrr_riem: f64,
    trace_c_rr: f64,
    rrr: f64,
    b_rr: f64,
}

fn curvature_contractions(o: &OrthoForm) -> CurvatureContractions {
    let (m, k) = (o.m, o.k);
    let c = o.c();
    let r = o.rperp(&c);
    let riem = o.riemann();
    let b = o.b();
    let ri = |al: usize, be: usize, i: usize, j: usize| r[((al * k + be) * m + i) * m + j];
    let tr: Vec<f64> = (0..k * k).map(|ab| (0..m).map(|l| c[(ab * m + l) * m + l]).sum()).collect();
    let mut out = CurvatureContractions { rrr_riem: 0.0, trace_c_rr: 0.0, rrr: 0.0, b_rr: 0.0 };
    for al in 0..k {
        for be in 0..k {
            for i in 0..m {
                for j in 0..m {
                    let rab = ri(al, be, i, j);
                    for p in 0..m {
                        for q in 0..m {
                            out.rrr_riem += rab * ri(al, be, p, q) * riem[((i * m + j) * m + p) * m + q];
                        }
                        out.b_rr += b[i * m + j] * ri(al, be, p, i) * ri(al, be, p, j);
                    }
                    for ga in 0..k {
                        out.trace_c_rr += tr[al * k + ga] * rab * ri(ga, be, i, j);
                        for l in 0..m {
                            out.rrr += rab * ri(al, ga, i, l) * ri(be, ga, j, l);
                        }
                    }
                }
            }
        }
    }
    out
}

/// Residuals of the five pointwise algebraic identities, in order:
/// `R⊥R⊥Riem = 4(Γ6−Γ7)`, `tr(c)R⊥R⊥ = 2(Γ3−Γ5)`, `R⊥R⊥R⊥ = Γ1−3Γ4+3Γ6−Γ7`,
/// `bR⊥R⊥ = 2(Γ2−Γ4)` and `|R⊥|² = 2|b|² − 2c:c`.
pub fn check_pointwise_identities(s: &FundamentalFormSample) -> Vec<IdentityResidual> {
    let o = s.orthonormal();
    let g = gammas_ortho(&o);
    let lhs = curvature_contractions(&o);
    let (m, k) = (o.m, o.k);
    let c = o.c();
    let r = o.rperp(&c);
    let b = o.b();
    let rr: f64 = r.iter().map(|x| x * x).sum();
    let bb: f64 = b.iter().map(|x| x * x).sum();
    let mut cc = 0.0;
    for al in 0..k {
        for be in 0..k {
            for ij in 0..m * m {
                cc += c[(al * k + be) * m * m + ij] * c[(be * k + al) * m * m + ij];
            }
        }
    }
    vec![
        IdentityResidual::new("rperp_rperp_riemann", lhs.rrr_riem, 4.0 * (g[5] - g[6])),
        IdentityResidual::new("trace_c_rperp_rperp", lhs.trace_c_rr, 2.0 * (g[2] - g[4])),
        IdentityResidual::new("rperp_cubed", lhs.rrr, g[0] - 3.0 * g[3] + 3.0 * g[5] - g[6]),
        IdentityResidual::new("b_rperp_rperp", lhs.b_rr, 2.0 * (g[1] - g[3])),
        IdentityResidual::new("rperp_norm_decomposition", rr, 2.0 * bb - 2.0 * cc),
    ]
}

/// The reaction term of the `|R⊥|²` evolution built from the curvature contractions
/// directly: `8 R⊥R⊥R⊥ − 2 Riem R⊥R⊥ + 8 tr(c)R⊥R⊥ + 4 bR⊥R⊥`.
pub fn normal_curvature_reaction_direct(s: &FundamentalFormSample) -> f64 {
    let l = curvature_contractions(&s.orthonormal());
    8.0 * l.rrr - 2.0 * l.rrr_riem + 8.0 * l.trace_c_rr + 4.0 * l.b_rr
}

/// Gradient invariants `G1..G4` plus the transposed contraction `G3ᵗ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientInvariants {
    pub g: [f64; 4],
    pub g3_transposed: f64,
    pub residuals: Vec<IdentityResidual>,
}

pub fn gradient_values(s: &FundamentalFormSample) -> Result<GradientInvariants> {
    if s.grad.is_none() {
        return Err(McfError::MissingGradient);
    }
    let o = s.orthonormal();
    let (m, k) = (o.m, o.k);
    let d = o.grad.as_ref().unwrap();
    let di = |l: usize, al: usize, i: usize, j: usize| d[((l * k + al) * m + i) * m + j];
    let b = o.b();
    let c = o.c();
    let ci = |al: usize, be: usize, i: usize, j: usize| c[((al * k + be) * m + i) * m + j];

    let mut g = [0.0; 4];
    let mut g3t = 0.0;
    for l in 0..m {
        for al in 0..k {
            for be in 0..k {
                for i in 0..m {
                    for kk in 0..m {
                        let dak = di(l, al, i, kk);
                        if dak == 0.0 {
                            continue;
                        }
                        for mm in 0..m {
                            g[2] += ci(al, be, mm, kk) * dak * di(l, be, i, mm);
                            g3t += ci(al, be, kk, mm) * dak * di(l, be, i, mm);
                            for j in 0..m {
                                g[1] += o.a(be, kk, j) * o.a(al, i, mm) * dak * di(l, be, mm, j);
                                g[3] += o.a(be, kk, j) * o.a(be, i, mm) * dak * di(l, al, j, mm);
                            }
                        }
                    }
                }
            }
            for i in 0..m {
                for kk in 0..m {
                    for mm in 0..m {
                        g[0] += b[mm * m + kk] * di(l, al, i, kk) * di(l, al, i, mm);
                    }
                }
            }
        }
    }

    // Product-rule expansions of ∇c, ∇b and ∇R⊥.
    let mut dc = vec![0.0; m * k * k * m * m];
    for l in 0..m {
        for al in 0..k {
            for be in 0..k {
                for i in 0..m {
                    for j in 0..m {
                        dc[(((l * k + al) * k + be) * m + i) * m + j] = (0..m)
                            .map(|s_| di(l, al, i, s_) * o.a(be, s_, j) + o.a(al, i, s_) * di(l, be, s_, j))
                            .sum();
                    }
                }
            }
        }
    }
    let dci = |l: usize, al: usize, be: usize, i: usize, j: usize| dc[(((l * k + al) * k + be) * m + i) * m + j];
    let (mut nr, mut nb, mut ncc) = (0.0, 0.0, 0.0);
    for l in 0..m {
        for i in 0..m {
            for j in 0..m {
                let dbij: f64 = (0..k).map(|al| dci(l, al, al, i, j)).sum();
                nb += dbij * dbij;
                for al in 0..k {
                    for be in 0..k {
                        let dr = dci(l, al, be, i, j) - dci(l, al, be, j, i);
                        nr += dr * dr;
                        ncc += dci(l, al, be, i, j) * dci(l, be, al, i, j);
                    }
                }
            }
        }
    }
    let residuals = vec![
        IdentityResidual::new("grad_rperp_norm", nr, 4.0 * (g[0] + g[1] - g[2] - g[3])),
        IdentityResidual::new("grad_b_norm", nb, 2.0 * (g[1] + g3t)),
        IdentityResidual::new("grad_c_contraction", ncc, 2.0 * (g[2] + g[3])),
    ];
    Ok(GradientInvariants { g, g3_transposed: g3t, residuals })
}

/// Deterministic pseudo-random sample: entries uniform in `[−1, 1]`, symmetrized,
/// metric `I + 0.2 P` with `P` symmetric, resampled until comfortably SPD.
pub fn random_fundamental_form(seed: u64, m: usize, k: usize, with_grad: bool) -> FundamentalFormSample {
    assert!(m >= 1 && k >= 1, "m and k must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = loop {
        let mut g = vec![0.0; m * m];
        for i in 0..m {
            for j in i..m {
                let p = 0.2 * rng.gen_range(-1.0..=1.0);
                g[i * m + j] += p;
                if i != j {
                    g[j * m + i] += p;
                }
            }
            g[i * m + i] += 1.0;
        }
        if linalg::min_eigenvalue(&g, m) > 0.1 {
            break g;
        }
    };
    let sym_block = |count: usize, rng: &mut ChaCha8Rng| {
        let mut v = vec![0.0; count * m * m];
        for q in 0..count {
            for i in 0..m {
                for j in i..m {
                    let x = rng.gen_range(-1.0..=1.0);
                    v[(q * m + i) * m + j] = x;
                    v[(q * m + j) * m + i] = x;
                }
            }
        }
        v
    };
    let a = sym_block(k, &mut rng);
    let grad = with_grad.then(|| sym_block(m * k, &mut rng));
    FundamentalFormSample::new(m, k, g, a, grad).expect("generated sample is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity(m: usize) -> Vec<f64> {
        let mut g = vec![0.0; m * m];
        for i in 0..m {
            g[i * m + i] = 1.0;
        }
        g
    }

    #[test]
    fn codimension_one_is_normally_flat() {
        for seed in 0..20 {
            let s = random_fundamental_form(seed, 3, 1, false);
            let d = derive_invariants(&s);
            assert!(d.rperp.iter().all(|x| x.abs() < 1e-13));
        }
    }

    #[test]
    fn curves_are_normally_flat() {
        let s = random_fundamental_form(3, 1, 3, false);
        let d = derive_invariants(&s);
        assert!(d.rperp.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn zero_form_has_zero_gammas() {
        let s = FundamentalFormSample::new(2, 2, identity(2), vec![0.0; 8], None).unwrap();
        assert_eq!(gamma_values(&s), [0.0; 7]);
    }

    #[test]
    fn gammas_are_degree_six() {
        let s = random_fundamental_form(11, 3, 2, false);
        let g1 = gamma_values(&s);
        let g2 = gamma_values(&s.scaled(1.7));
        for (a, b) in g1.iter().zip(&g2) {
            assert!((b - a * 1.7f64.powi(6)).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            FundamentalFormSample::new(2, 1, vec![1.0, 2.0, 2.0, 1.0], vec![0.0; 4], None),
            Err(McfError::NotPositiveDefinite)
        ));
        assert!(FundamentalFormSample::new(2, 1, identity(2), vec![0.0, 1.0, 0.0, 0.0], None).is_err());
        let s = random_fundamental_form(0, 2, 2, false);
        assert!(matches!(gradient_values(&s), Err(McfError::MissingGradient)));
    }

    #[test]
    fn zero_gradient_gives_zero_g() {
        let s = random_fundamental_form(5, 2, 2, false);
        let s = FundamentalFormSample::new(2, 2, s.metric().to_vec(), s.form().to_vec(), Some(vec![0.0; 16])).unwrap();
        let gv = gradient_values(&s).unwrap();
        assert_eq!(gv.g, [0.0; 4]);
        assert!(gv.residuals.iter().all(|r| r.lhs == 0.0 && r.rhs == 0.0));
    }

    #[test]
    fn reaction_term_two_routes_agree() {
        for seed in 0..50 {
            let s = random_fundamental_form(seed, 3, 3, false);
            let z1 = normal_curvature_reaction(&gamma_values(&s));
            let z2 = normal_curvature_reaction_direct(&s);
            assert!((z1 - z2).abs() <= 1e-10 * (1.0 + z1.abs()), "{z1} vs {z2}");
        }
    }

    #[test]
    fn random_samples_are_deterministic_and_distinct() {
        assert_eq!(random_fundamental_form(0, 2, 2, true), random_fundamental_form(0, 2, 2, true));
        assert_ne!(random_fundamental_form(0, 2, 2, true), random_fundamental_form(1, 2, 2, true));
    }
}
