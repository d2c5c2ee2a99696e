use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

use mcf_core::tensor_algebra::{
    check_pointwise_identities, derive_invariants, gamma_values, gradient_values, random_fundamental_form,
    FundamentalFormSample,
};

/// Coordinate components of one sample, indexed the natural way.
struct Coords {
    m: usize,
    k: usize,
    gi: Vec<Vec<f64>>,
    a: Vec<Vec<Vec<f64>>>,
}

impl Coords {
    fn of(s: &FundamentalFormSample) -> Self {
        let (m, k) = (s.m(), s.k());
        let g = DMatrix::from_row_slice(m, m, s.metric());
        let gi = g.try_inverse().unwrap();
        Self {
            m,
            k,
            gi: (0..m).map(|i| (0..m).map(|j| gi[(i, j)]).collect()).collect(),
            a: (0..k).map(|al| (0..m).map(|i| (0..m).map(|j| s.a(al, i, j)).collect()).collect()).collect(),
        }
    }

    fn c(&self, al: usize, be: usize, i: usize, j: usize) -> f64 {
        let mut s = 0.0;
        for p in 0..self.m {
            for q in 0..self.m {
                s += self.a[al][i][p] * self.gi[p][q] * self.a[be][q][j];
            }
        }
        s
    }

    fn b(&self, i: usize, j: usize) -> f64 {
        (0..self.k).map(|al| self.c(al, al, i, j)).sum()
    }

    /// `T^{ij}` from a lower-index 2-tensor.
    fn up(&self, t: impl Fn(usize, usize) -> f64, i: usize, j: usize) -> f64 {
        let mut s = 0.0;
        for p in 0..self.m {
            for q in 0..self.m {
                s += self.gi[i][p] * self.gi[j][q] * t(p, q);
            }
        }
        s
    }

    /// `T_i{}^j` from a lower-index 2-tensor.
    fn up2(&self, t: impl Fn(usize, usize) -> f64, i: usize, j: usize) -> f64 {
        (0..self.m).map(|q| self.gi[j][q] * t(i, q)).sum()
    }

    /// `T^i{}_j` from a lower-index 2-tensor.
    fn up1(&self, t: impl Fn(usize, usize) -> f64, i: usize, j: usize) -> f64 {
        (0..self.m).map(|p| self.gi[i][p] * t(p, j)).sum()
    }

    fn trace_c(&self, al: usize, be: usize) -> f64 {
        let mut s = 0.0;
        for i in 0..self.m {
            for j in 0..self.m {
                s += self.gi[i][j] * self.c(al, be, i, j);
            }
        }
        s
    }

    /// The seven contractions written index by index in coordinates.
    fn gammas(&self) -> [f64; 7] {
        let (m, k) = (self.m, self.k);
        let b = |i, j| self.b(i, j);
        let mut g = [0.0; 7];
        for i in 0..m {
            for j in 0..m {
                let bu = self.up(b, i, j);
                for p in 0..m {
                    g[0] += bu * self.up1(b, p, i) * b(j, p);
                    for q in 0..m {
                        let s: f64 = (0..k).map(|al| self.a[al][q][j] * self.a[al][p][i]).sum();
                        g[1] += bu * self.up(b, p, q) * s;
                    }
                }
                for al in 0..k {
                    for be in 0..k {
                        g[2] += bu * self.c(al, be, j, i) * self.trace_c(al, be);
                    }
                }
            }
        }
        for al in 0..k {
            for be in 0..k {
                for j in 0..m {
                    for l in 0..m {
                        let bu = self.up(b, j, l);
                        for q in 0..m {
                            g[3] += bu * self.c(al, be, j, q) * self.up2(|x, y| self.c(be, al, x, y), l, q);
                        }
                    }
                }
            }
        }
        for al in 0..k {
            for be in 0..k {
                for ga in 0..k {
                    let tr = self.trace_c(al, ga);
                    for i in 0..m {
                        for j in 0..m {
                            g[4] += tr * self.c(be, ga, i, j) * self.up(|x, y| self.c(be, al, x, y), j, i);
                            for p in 0..m {
                                g[5] += self.c(al, ga, p, i)
                                    * self.up2(|x, y| self.c(be, ga, x, y), j, p)
                                    * self.up(|x, y| self.c(be, al, x, y), i, j);
                                g[6] += self.c(al, be, i, j)
                                    * self.up(|x, y| self.c(al, ga, x, y), p, j)
                                    * self.up1(|x, y| self.c(ga, be, x, y), i, p);
                            }
                        }
                    }
                }
            }
        }
        g
    }
}

/// Components in the orthonormal frame `g^{-1/2}` (symmetric square root).
struct Frame {
    m: usize,
    k: usize,
    a: Vec<f64>,
    d: Vec<f64>,
}

impl Frame {
    fn of(s: &FundamentalFormSample) -> Self {
        let (m, k) = (s.m(), s.k());
        let eig = SymmetricEigen::new(DMatrix::from_row_slice(m, m, s.metric()));
        let mut root = DMatrix::zeros(m, m);
        for (c, l) in eig.eigenvalues.iter().enumerate() {
            let v = eig.eigenvectors.column(c);
            root += v * v.transpose() / l.sqrt();
        }
        let pull2 = |t: &[f64]| {
            let t = DMatrix::from_row_slice(m, m, t);
            let r = &root * t * &root;
            (0..m * m).map(|x| r[(x / m, x % m)]).collect::<Vec<_>>()
        };
        let a: Vec<f64> = (0..k).flat_map(|al| pull2(&s.form()[al * m * m..(al + 1) * m * m])).collect();
        let grad = s.gradient().unwrap();
        let mut d = vec![0.0; m * k * m * m];
        for al in 0..k {
            let parts: Vec<Vec<f64>> =
                (0..m).map(|l| pull2(&grad[(l * k + al) * m * m..(l * k + al + 1) * m * m])).collect();
            for p in 0..m {
                for ij in 0..m * m {
                    let v: f64 = (0..m).map(|l| root[(p, l)] * parts[l][ij]).sum();
                    d[(p * k + al) * m * m + ij] = v;
                }
            }
        }
        Self { m, k, a, d }
    }

    fn a(&self, al: usize, i: usize, j: usize) -> f64 {
        self.a[(al * self.m + i) * self.m + j]
    }

    fn d(&self, l: usize, al: usize, i: usize, j: usize) -> f64 {
        self.d[((l * self.k + al) * self.m + i) * self.m + j]
    }

    fn c(&self, al: usize, be: usize, i: usize, j: usize) -> f64 {
        (0..self.m).map(|s| self.a(al, i, s) * self.a(be, s, j)).sum()
    }

    /// `G1..G4` and the transposed `G3` by explicit nested loops.
    fn gradient_invariants(&self) -> ([f64; 4], f64) {
        let (m, k) = (self.m, self.k);
        let mut g = [0.0; 4];
        let mut g3t = 0.0;
        for l in 0..m {
            for al in 0..k {
                for be in 0..k {
                    for i in 0..m {
                        for kk in 0..m {
                            for mm in 0..m {
                                g[2] += self.c(al, be, mm, kk) * self.d(l, al, i, kk) * self.d(l, be, i, mm);
                                g3t += self.c(al, be, kk, mm) * self.d(l, al, i, kk) * self.d(l, be, i, mm);
                                for j in 0..m {
                                    g[1] += self.a(be, kk, j) * self.a(al, i, mm) * self.d(l, al, i, kk) * self.d(l, be, mm, j);
                                    g[3] += self.a(be, kk, j) * self.a(be, i, mm) * self.d(l, al, i, kk) * self.d(l, al, j, mm);
                                }
                            }
                        }
                    }
                }
            }
        }
        for l in 0..m {
            for al in 0..k {
                for i in 0..m {
                    for kk in 0..m {
                        for mm in 0..m {
                            let b: f64 = (0..k).map(|be| self.c(be, be, mm, kk)).sum();
                            g[0] += b * self.d(l, al, i, kk) * self.d(l, al, i, mm);
                        }
                    }
                }
            }
        }
        (g, g3t)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs().max(b.abs()))
}

#[test]
fn gammas_match_coordinate_loops_for_seed_42() {
    let s = random_fundamental_form(42, 2, 2, false);
    let got = gamma_values(&s);
    let want = Coords::of(&s).gammas();
    for (i, (g, w)) in got.iter().zip(&want).enumerate() {
        assert!((g - w).abs() <= 1e-13 * w.abs().max(1.0), "Γ{} = {g}, loops give {w}", i + 1);
    }
}

#[test]
fn gammas_match_coordinate_loops_in_higher_dimension() {
    for seed in 0..20 {
        let s = random_fundamental_form(seed, 3, 3, false);
        let got = gamma_values(&s);
        let want = Coords::of(&s).gammas();
        for (g, w) in got.iter().zip(&want) {
            assert!(rel(*g, *w) < 1e-12, "seed {seed}: {got:?} vs {want:?}");
        }
    }
}

#[test]
fn gradient_invariants_match_frame_loops() {
    for seed in [42, 7, 1234] {
        let s = random_fundamental_form(seed, 2, 2, true);
        let got = gradient_values(&s).unwrap();
        let (want, want_t) = Frame::of(&s).gradient_invariants();
        for (i, (g, w)) in got.g.iter().zip(&want).enumerate() {
            assert!(rel(*g, *w) < 1e-12, "seed {seed}: G{} = {g} vs {w}", i + 1);
        }
        assert!(rel(got.g3_transposed, want_t) < 1e-12);
        for r in &got.residuals {
            assert!(r.rel < 1e-10, "seed {seed}: {r:?}");
        }
    }
}

#[test]
fn hand_built_normal_curvature() {
    // A¹ = diag(1, 0), A² = antidiag(1, 1)
    let s = FundamentalFormSample::new(2, 2, vec![1.0, 0.0, 0.0, 1.0], vec![1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0], None)
        .unwrap();
    let d = derive_invariants(&s);
    assert_eq!(d.rperp_at(0, 1, 0, 1), 1.0);
    assert_eq!(d.rperp_at(1, 0, 0, 1), -1.0);
    assert_eq!(d.norm_rperp_sq, 4.0);
    assert_eq!(d.b, vec![2.0, 0.0, 0.0, 1.0]);
    let cc: f64 = (0..2)
        .flat_map(|al| (0..2).map(move |be| (al, be)))
        .flat_map(|(al, be)| (0..4).map(move |ij| (al, be, ij)))
        .map(|(al, be, ij)| d.c_at(al, be, ij / 2, ij % 2) * d.c_at(be, al, ij / 2, ij % 2))
        .sum();
    assert_eq!(cc, 3.0);
    assert_eq!(2.0 * d.norm_b_sq - 2.0 * cc, d.norm_rperp_sq);
}

#[test]
fn commuting_shape_operators_have_flat_normal_bundle() {
    let s = FundamentalFormSample::new(2, 2, vec![1.0, 0.0, 0.0, 1.0], vec![1.5, 0.0, 0.0, -0.3, 0.2, 0.0, 0.0, 0.9], None)
        .unwrap();
    assert_eq!(derive_invariants(&s).norm_rperp_sq, 0.0);
    let g = gamma_values(&s);
    assert!(g[1] != 0.0 && (g[1] - g[3]).abs() < 1e-14, "{g:?}");
    for r in check_pointwise_identities(&s) {
        assert!(r.abs < 1e-13, "{r:?}");
    }
}

#[test]
fn thousand_samples_satisfy_every_identity() {
    let mut worst = 0.0f64;
    for seed in 0..1000u64 {
        let m = 2 + (seed % 2) as usize;
        let k = 1 + (seed % 3) as usize;
        let s = random_fundamental_form(seed, m, k, true);
        for r in check_pointwise_identities(&s).iter().chain(&gradient_values(&s).unwrap().residuals) {
            worst = worst.max(r.rel);
        }
    }
    assert!(worst < 1e-10, "worst relative residual {worst:e}");
}

#[test]
fn codimension_one_gradient_of_normal_curvature_vanishes() {
    let s = random_fundamental_form(9, 3, 1, true);
    let gv = gradient_values(&s).unwrap();
    assert!(gv.residuals[0].lhs.abs() < 1e-13);
    let g = gv.g;
    assert!((4.0 * (g[0] + g[1] - g[2] - g[3])).abs() < 1e-12);
}

fn sample_strategy() -> impl Strategy<Value = FundamentalFormSample> {
    (2usize..=3, 1usize..=3).prop_flat_map(|(m, k)| {
        let sym = m * (m + 1) / 2;
        (
            proptest::collection::vec(-0.2f64..0.2, sym),
            proptest::collection::vec(-1.0f64..1.0, k * sym),
            proptest::collection::vec(-1.0f64..1.0, m * k * sym),
        )
            .prop_map(move |(p, a, d)| {
                let fill = |vals: &[f64], blocks: usize| {
                    let mut out = vec![0.0; blocks * m * m];
                    for q in 0..blocks {
                        let mut it = vals[q * sym..(q + 1) * sym].iter();
                        for i in 0..m {
                            for j in i..m {
                                let x = *it.next().unwrap();
                                out[(q * m + i) * m + j] = x;
                                out[(q * m + j) * m + i] = x;
                            }
                        }
                    }
                    out
                };
                let mut g = fill(&p, 1);
                for i in 0..m {
                    g[i * m + i] += 1.0;
                }
                FundamentalFormSample::new(m, k, g, fill(&a, k), Some(fill(&d, m * k))).unwrap()
            })
    })
}

/// Same geometry under the coordinate change `P` and normal rotation `Q`.
fn transformed(s: &FundamentalFormSample, p: &DMatrix<f64>, q: &DMatrix<f64>) -> FundamentalFormSample {
    let (m, k) = (s.m(), s.k());
    let g = DMatrix::from_row_slice(m, m, s.metric());
    let g2 = p.transpose() * g * p;
    let block = |t: &[f64]| DMatrix::from_row_slice(m, m, t);
    let a_old: Vec<DMatrix<f64>> = (0..k).map(|al| block(&s.form()[al * m * m..(al + 1) * m * m])).collect();
    let grad = s.gradient().unwrap();
    let d_old: Vec<Vec<DMatrix<f64>>> = (0..m)
        .map(|l| (0..k).map(|al| block(&grad[(l * k + al) * m * m..(l * k + al + 1) * m * m])).collect())
        .collect();
    let mut a = Vec::new();
    for al in 0..k {
        let mut t = DMatrix::zeros(m, m);
        for be in 0..k {
            t += q[(al, be)] * &a_old[be];
        }
        a.extend((p.transpose() * t * p).transpose().iter().copied());
    }
    let mut d = Vec::new();
    for l in 0..m {
        for al in 0..k {
            let mut t = DMatrix::zeros(m, m);
            for r in 0..m {
                for be in 0..k {
                    t += p[(r, l)] * q[(al, be)] * &d_old[r][be];
                }
            }
            d.extend((p.transpose() * t * p).transpose().iter().copied());
        }
    }
    let g2: Vec<f64> = g2.transpose().iter().copied().collect();
    let g2: Vec<f64> = (0..m * m).map(|x| 0.5 * (g2[x] + g2[(x % m) * m + x / m])).collect();
    FundamentalFormSample::new(m, k, g2, a, Some(d)).unwrap()
}

fn rotation(k: usize, angles: &[f64]) -> DMatrix<f64> {
    let mut q = DMatrix::identity(k, k);
    for (n, th) in angles.iter().enumerate().take(k * (k - 1) / 2) {
        let (i, j) = [(0, 1), (0, 2), (1, 2)][n];
        let mut r = DMatrix::identity(k, k);
        r[(i, i)] = th.cos();
        r[(j, j)] = th.cos();
        r[(i, j)] = -th.sin();
        r[(j, i)] = th.sin();
        q = r * q;
    }
    q
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn normal_curvature_is_antisymmetric(s in sample_strategy()) {
        let d = derive_invariants(&s);
        let (m, k) = (s.m(), s.k());
        for al in 0..k { for be in 0..k { for i in 0..m { for j in 0..m {
            let r = d.rperp_at(al, be, i, j);
            prop_assert!((r + d.rperp_at(be, al, i, j)).abs() < 1e-13);
            prop_assert!((r + d.rperp_at(al, be, j, i)).abs() < 1e-13);
        }}}}
    }

    #[test]
    fn traces_of_a_and_b(s in sample_strategy()) {
        let d = derive_invariants(&s);
        let c = Coords::of(&s);
        let m = s.m();
        let (mut ta, mut tb) = (0.0, 0.0);
        for i in 0..m { for j in 0..m {
            ta += c.gi[i][j] * d.a[i * m + j];
            tb += c.gi[i][j] * d.b[i * m + j];
        }}
        prop_assert!(rel(ta, d.norm_h_sq) < 1e-12);
        prop_assert!(rel(tb, d.norm_a_sq) < 1e-12);
    }

    #[test]
    fn homogeneity_under_scaling(s in sample_strategy(), lambda in 0.3f64..3.0) {
        let (d1, d2) = (derive_invariants(&s), derive_invariants(&s.scaled(lambda)));
        for (a, b) in gamma_values(&s).iter().zip(&gamma_values(&s.scaled(lambda))) {
            prop_assert!(rel(b / lambda.powi(6), *a) < 1e-12);
        }
        prop_assert!(rel(d2.norm_rperp_sq, d1.norm_rperp_sq * lambda.powi(4)) < 1e-12);
        for (a, b) in d1.b.iter().zip(&d2.b) {
            prop_assert!(rel(*b, a * lambda * lambda) < 1e-12);
        }
    }

    #[test]
    fn shape_operator_gram_is_bounded_by_norm_squared(s in sample_strategy()) {
        let d = derive_invariants(&s);
        prop_assert!(d.normal_gram_sq <= d.norm_a_sq * d.norm_a_sq * (1.0 + 1e-12));
    }

    #[test]
    fn identities_hold(s in sample_strategy()) {
        for r in check_pointwise_identities(&s).iter().chain(&gradient_values(&s).unwrap().residuals) {
            prop_assert!(r.rel < 1e-10, "{:?}", r);
        }
    }

    #[test]
    fn scalars_are_frame_independent(
        s in sample_strategy(),
        shear in proptest::collection::vec(-0.4f64..0.4, 9),
        angles in proptest::collection::vec(-3.0f64..3.0, 3),
    ) {
        let m = s.m();
        let p = DMatrix::from_fn(m, m, |i, j| if i == j { 1.0 + shear[i * 3 + j] } else { shear[i * 3 + j] });
        prop_assume!(p.determinant().abs() > 0.2);
        let t = transformed(&s, &p, &rotation(s.k(), &angles));
        let (d1, d2) = (derive_invariants(&s), derive_invariants(&t));
        prop_assert!(rel(d1.norm_a_sq, d2.norm_a_sq) < 1e-10);
        prop_assert!(rel(d1.norm_rperp_sq, d2.norm_rperp_sq) < 1e-10);
        prop_assert!(rel(d1.norm_b_sq, d2.norm_b_sq) < 1e-10);
        for (a, b) in gamma_values(&s).iter().zip(&gamma_values(&t)) {
            prop_assert!(rel(*a, *b) < 1e-10);
        }
        let (g1, g2) = (gradient_values(&s).unwrap(), gradient_values(&t).unwrap());
        for (a, b) in g1.g.iter().zip(&g2.g) {
            prop_assert!(rel(*a, *b) < 1e-10);
        }
    }
}
