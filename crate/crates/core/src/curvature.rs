//! Curvature of toric Kähler metrics `g = u_ij dx_i dx_j + u^ij dθ_i dθ_j`
//! computed in closed form from an exact four-jet of the symplectic
//! potential. Only the x–x block is produced; mixed blocks vanish and the
//! θ–θ block follows from J-invariance.

use crate::basis::Jet4;
use crate::error::{Error, Result};

pub type Sym2 = [[f64; 2]; 2];

/// Value, gradient and Hessian of a torus-invariant function of `(x₁, x₂)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScalarField2Jet {
    pub value: f64,
    pub grad: [f64; 2],
    pub hess: Sym2,
}

impl ScalarField2Jet {
    pub fn constant(value: f64) -> Self {
        Self {
            value,
            ..Default::default()
        }
    }

    pub fn affine(value: f64, grad: [f64; 2]) -> Self {
        Self {
            value,
            grad,
            hess: [[0.0; 2]; 2],
        }
    }
}

impl std::ops::Add for ScalarField2Jet {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let mut h = self.hess;
        for i in 0..2 {
            for j in 0..2 {
                h[i][j] += o.hess[i][j];
            }
        }
        Self {
            value: self.value + o.value,
            grad: [self.grad[0] + o.grad[0], self.grad[1] + o.grad[1]],
            hess: h,
        }
    }
}

/// One facet of the canonical potential, `l(x) = ⟨ν, x⟩ + λ`, evaluated at
/// the current point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FacetTerm {
    pub normal: [f64; 2],
    pub value: f64,
}

/// A facet's rank-one share of the third and fourth derivatives of the
/// potential, together with `w = u⁻¹ν`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct RankOne {
    nu: [f64; 2],
    c3: f64,
    c4: f64,
    w: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricData {
    /// `u_ij`
    pub h: Sym2,
    /// `u^ij`
    pub hinv: Sym2,
    pub det: f64,
    /// `log det D²u`
    pub log_det: f64,
    /// `∂_k log det`
    pub g_k: [f64; 2],
    /// `∂_k ∂_l log det`
    pub g_kl: Sym2,
    pub u3: [[[f64; 2]; 2]; 2],
    pub u4: [[[[f64; 2]; 2]; 2]; 2],
    /// `dinv[i][k][j] = ∂_j u^{ik}`
    pub dinv: [[[f64; 2]; 2]; 2],
    /// `christoffel[k][i][j] = Γ^k_ij = ½ u^{km} u_{ijm}`
    pub christoffel: [[[f64; 2]; 2]; 2],
    terms: Vec<RankOne>,
    f3: [[[f64; 2]; 2]; 2],
    f4: [[[[f64; 2]; 2]; 2]; 2],
}

fn third(jet: &Jet4) -> [[[f64; 2]; 2]; 2] {
    let mut t = [[[0.0; 2]; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                t[i][j][k] = jet.d3(i, j, k);
            }
        }
    }
    t
}

fn fourth(jet: &Jet4) -> [[[[f64; 2]; 2]; 2]; 2] {
    let mut t = [[[[0.0; 2]; 2]; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    t[i][j][k][l] = jet.d4(i, j, k, l);
                }
            }
        }
    }
    t
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Metric data for a potential given as a single jet.
pub fn metric_data(jet: &Jet4) -> Result<MetricData> {
    metric_data_split(&[], jet)
}

/// Metric data for `u = ½ Σ l log l + F`, with the facets passed separately
/// from the jet of the smooth part `F`.
///
/// Near a facet the summed third and fourth derivatives grow like `1/l²`
/// and `1/l³` while every contraction with `u⁻¹` is bounded, so forming the
/// sums first and contracting afterwards loses most significant digits.
/// Each facet contributes a rank-one tensor along its normal, and for 2×2
/// matrices `adj(ννᵀ)ν = 0` exactly. Contracting facet by facet through
/// `w = u⁻¹ν` keeps every intermediate at the size of its result.
pub fn metric_data_split(facets: &[FacetTerm], smooth: &Jet4) -> Result<MetricData> {
    let hs = smooth.hess();
    let adj_s = [[hs[1][1], -hs[0][1]], [-hs[1][0], hs[0][0]]];
    let mut h = hs;
    let mut adj = adj_s;
    let mut det = hs[0][0] * hs[1][1] - hs[0][1] * hs[1][0];
    let c2: Vec<f64> = facets.iter().map(|f| 0.5 / f.value).collect();
    for (r, f) in facets.iter().enumerate() {
        if !(f.value > 0.0) {
            return Err(Error::NonConvexPoint {
                det: f64::NAN,
                trace: f64::NAN,
            });
        }
        let [n1, n2] = f.normal;
        h[0][0] += c2[r] * n1 * n1;
        h[0][1] += c2[r] * n1 * n2;
        h[1][0] += c2[r] * n1 * n2;
        h[1][1] += c2[r] * n2 * n2;
        adj[0][0] += c2[r] * n2 * n2;
        adj[0][1] -= c2[r] * n1 * n2;
        adj[1][0] -= c2[r] * n1 * n2;
        adj[1][1] += c2[r] * n1 * n1;
        let nu_adj_nu =
            n1 * (adj_s[0][0] * n1 + adj_s[0][1] * n2) + n2 * (adj_s[1][0] * n1 + adj_s[1][1] * n2);
        det += c2[r] * nu_adj_nu;
        for (s, g) in facets.iter().enumerate().skip(r + 1) {
            let cross = n1 * g.normal[1] - n2 * g.normal[0];
            det += c2[r] * c2[s] * cross * cross;
        }
    }
    let trace = h[0][0] + h[1][1];
    if !(det > 0.0 && trace > 0.0) {
        return Err(Error::NonConvexPoint { det, trace });
    }
    let hinv = [
        [adj[0][0] / det, adj[0][1] / det],
        [adj[1][0] / det, adj[1][1] / det],
    ];

    let mut terms = Vec::with_capacity(facets.len());
    for (r, f) in facets.iter().enumerate() {
        let nu = f.normal;
        // adj(u) ν without the facet's own term, which annihilates ν.
        let mut wd = [
            adj_s[0][0] * nu[0] + adj_s[0][1] * nu[1],
            adj_s[1][0] * nu[0] + adj_s[1][1] * nu[1],
        ];
        for (s, g) in facets.iter().enumerate() {
            if s != r {
                let perp = [g.normal[1], -g.normal[0]];
                let k = c2[s] * dot(perp, nu);
                wd[0] += k * perp[0];
                wd[1] += k * perp[1];
            }
        }
        let v = f.value;
        terms.push(RankOne {
            nu,
            c3: -0.5 / (v * v),
            c4: 1.0 / (v * v * v),
            w: [wd[0] / det, wd[1] / det],
        });
    }

    let f3 = third(smooth);
    let f4 = fourth(smooth);
    let mut u3 = f3;
    let mut u4 = f4;
    for t in &terms {
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    let n3 = t.nu[i] * t.nu[j] * t.nu[k];
                    u3[i][j][k] += t.c3 * n3;
                    for l in 0..2 {
                        u4[i][j][k][l] += t.c4 * n3 * t.nu[l];
                    }
                }
            }
        }
    }

    let mut dinv = [[[0.0; 2]; 2]; 2];
    for i in 0..2 {
        for k in 0..2 {
            for j in 0..2 {
                let mut s = 0.0;
                for p in 0..2 {
                    for q in 0..2 {
                        s += hinv[i][p] * f3[p][q][j] * hinv[q][k];
                    }
                }
                for t in &terms {
                    s += t.c3 * t.w[i] * t.w[k] * t.nu[j];
                }
                dinv[i][k][j] = -s;
            }
        }
    }

    let mut g_k = [0.0; 2];
    let mut g_kl = [[0.0; 2]; 2];
    for k in 0..2 {
        for p in 0..2 {
            for q in 0..2 {
                g_k[k] += hinv[p][q] * f3[p][q][k];
            }
        }
        for t in &terms {
            g_k[k] += t.c3 * dot(t.nu, t.w) * t.nu[k];
        }
    }
    for k in 0..2 {
        for l in 0..2 {
            let mut s = 0.0;
            for p in 0..2 {
                for q in 0..2 {
                    s += hinv[p][q] * f4[p][q][k][l] + dinv[p][q][l] * f3[p][q][k];
                }
            }
            for t in &terms {
                s += t.c4 * dot(t.nu, t.w) * t.nu[k] * t.nu[l];
                s += t.c3 * nu_dinv_nu(&terms, &f3, t, l) * t.nu[k];
            }
            g_kl[k][l] = s;
        }
    }

    let mut christoffel = [[[0.0; 2]; 2]; 2];
    for k in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                let mut s = hinv[k][0] * f3[i][j][0] + hinv[k][1] * f3[i][j][1];
                for t in &terms {
                    s += t.c3 * t.w[k] * t.nu[i] * t.nu[j];
                }
                christoffel[k][i][j] = 0.5 * s;
            }
        }
    }

    Ok(MetricData {
        h,
        hinv,
        det,
        log_det: det.ln(),
        g_k,
        g_kl,
        u3,
        u4,
        dinv,
        christoffel,
        terms,
        f3,
        f4,
    })
}

/// `νᵀ (∂_l u⁻¹) ν` for the normal of `t`, evaluated through the `w` vectors.
fn nu_dinv_nu(terms: &[RankOne], f3: &[[[f64; 2]; 2]; 2], t: &RankOne, l: usize) -> f64 {
    let mut s = 0.0;
    for p in 0..2 {
        for q in 0..2 {
            s += t.w[p] * f3[p][q][l] * t.w[q];
        }
    }
    for o in terms {
        let a = dot(t.nu, o.w);
        s += o.c3 * a * a * o.nu[l];
    }
    -s
}

/// `(∂_l u⁻¹) ν` for the normal of `t`.
fn dinv_nu(md: &MetricData, t: &RankOne, l: usize) -> [f64; 2] {
    let mut out = [0.0; 2];
    for (i, o) in out.iter_mut().enumerate() {
        let mut s = 0.0;
        for p in 0..2 {
            for q in 0..2 {
                s += md.hinv[i][p] * md.f3[p][q][l] * t.w[q];
            }
        }
        for r in &md.terms {
            s += r.c3 * r.w[i] * dot(r.w, t.nu) * r.nu[l];
        }
        *o = -s;
    }
    out
}

/// `Ric(∂_a, ∂_b) = ½ (G_ab − u^{kl} u_{abk} G_l)`, `G = log det D²u`.
pub fn ricci_xx(md: &MetricData) -> Sym2 {
    ricci_with_correction_sign(md, 1.0)
}

/// Ricci block with a configurable sign on the first-order correction.
/// `sign = 1` is the correct formula; any other value exists only so the
/// self-test can demonstrate that the trace identity catches the mutation.
#[doc(hidden)]
pub fn ricci_with_correction_sign(md: &MetricData, sign: f64) -> Sym2 {
    // v = u⁻¹ ∇G, assembled facet by facet for the same reason as above.
    let mut v = [0.0; 2];
    for (k, vk) in v.iter_mut().enumerate() {
        for l in 0..2 {
            let mut gl = 0.0;
            for p in 0..2 {
                for q in 0..2 {
                    gl += md.hinv[p][q] * md.f3[p][q][l];
                }
            }
            *vk += md.hinv[k][l] * gl;
        }
        for t in &md.terms {
            *vk += t.c3 * dot(t.nu, t.w) * t.w[k];
        }
    }
    let mut ric = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            let mut corr = v[0] * md.f3[a][b][0] + v[1] * md.f3[a][b][1];
            for t in &md.terms {
                corr += t.c3 * dot(t.nu, v) * t.nu[a] * t.nu[b];
            }
            ric[a][b] = 0.5 * (md.g_kl[a][b] - sign * corr);
        }
    }
    ric
}

/// `∂_k ∂_l u^{ij}` from the summed derivative tensors. Accurate away from
/// the boundary only; [`scalar_curvature`] uses the facet-wise form.
pub fn inverse_second_derivative(md: &MetricData, i: usize, j: usize, k: usize, l: usize) -> f64 {
    let w = &md.hinv;
    let mut s = 0.0;
    for p in 0..2 {
        for q in 0..2 {
            s -= w[i][p] * md.u4[p][q][k][l] * w[q][j];
            for a in 0..2 {
                for b in 0..2 {
                    s += w[i][p] * md.u3[p][a][k] * w[a][b] * md.u3[b][q][l] * w[q][j];
                    s += w[i][p] * md.u3[p][a][l] * w[a][b] * md.u3[b][q][k] * w[q][j];
                }
            }
        }
    }
    s
}

/// Abreu's formula `S = −Σ u^{ij}_{,ij}`, expanded as
/// `Σ (u⁻¹ u_{ij··} u⁻¹)_{ij} + (D_j u_{i··} u⁻¹)_{ij} + (u⁻¹ u_{i··} D_j)_{ij}`
/// with `D_j = ∂_j u⁻¹`.
pub fn scalar_curvature(md: &MetricData) -> f64 {
    let w = &md.hinv;
    let d = &md.dinv;
    let mut s = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            for p in 0..2 {
                for q in 0..2 {
                    s += w[i][p] * md.f4[p][q][i][j] * w[q][j];
                    s += d[i][p][j] * md.f3[p][q][i] * w[q][j];
                    s += w[i][p] * md.f3[p][q][i] * d[q][j][j];
                }
            }
        }
    }
    for t in &md.terms {
        let nw = dot(t.nu, t.w);
        s += t.c4 * nw * nw;
        for j in 0..2 {
            s += t.c3 * t.w[j] * nu_dinv_nu(&md.terms, &md.f3, t, j);
            s += t.c3 * nw * dinv_nu(md, t, j)[j];
        }
    }
    s
}

/// x–x block of the Riemannian Hessian, `f_ab − Γ^k_ab f_k`.
pub fn hessian(md: &MetricData, f: &ScalarField2Jet) -> Sym2 {
    let mut out = f.hess;
    for a in 0..2 {
        for b in 0..2 {
            out[a][b] -= md.christoffel[0][a][b] * f.grad[0] + md.christoffel[1][a][b] * f.grad[1];
        }
    }
    out
}

/// Laplace–Beltrami operator, `u^{ij} f_ij + (∂_i u^{ij}) f_j` (det g = 1).
pub fn laplacian(md: &MetricData, f: &ScalarField2Jet) -> f64 {
    let mut s = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            s += md.hinv[i][j] * f.hess[i][j] + md.dinv[i][j][i] * f.grad[j];
        }
    }
    s
}

/// `g(∇f, ∇h) = u^{ij} f_i h_j`.
pub fn grad_inner(md: &MetricData, f: &ScalarField2Jet, h: &ScalarField2Jet) -> f64 {
    let mut s = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            s += md.hinv[i][j] * f.grad[i] * h.grad[j];
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::canonical_jet;
    use crate::polytope::make_simplex;

    fn flat_jet() -> Jet4 {
        // u = ½(x₁² + x₂²)
        let mut j = Jet4::default();
        j.set_partial(2, 0, 1.0);
        j.set_partial(0, 2, 1.0);
        j
    }

    #[test]
    fn simplex_metric_at_origin() {
        let j = canonical_jet(&make_simplex(), [0.0, 0.0]).unwrap();
        let md = metric_data(&j).unwrap();
        assert_eq!(md.h, [[1.0, 0.5], [0.5, 1.0]]);
        assert!((md.det - 0.75).abs() < 1e-15);
        let expect = [[1.0 / 0.75, -0.5 / 0.75], [-0.5 / 0.75, 1.0 / 0.75]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((md.hinv[i][j] - expect[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn flat_metric_is_flat() {
        let md = metric_data(&flat_jet()).unwrap();
        assert_eq!(md.log_det, 0.0);
        assert_eq!(md.g_k, [0.0; 2]);
        assert_eq!(md.christoffel, [[[0.0; 2]; 2]; 2]);
        assert_eq!(ricci_xx(&md), [[0.0; 2]; 2]);
        assert_eq!(scalar_curvature(&md), 0.0);
        let f = ScalarField2Jet::affine(0.3, [1.0, -2.0]);
        assert_eq!(hessian(&md, &f), [[0.0; 2]; 2]);
        let x1 = ScalarField2Jet::affine(0.0, [1.0, 0.0]);
        assert_eq!(grad_inner(&md, &x1, &x1), 1.0);
        assert_eq!(laplacian(&md, &ScalarField2Jet::constant(4.0)), 0.0);
    }

    #[test]
    fn indefinite_hessian_is_rejected() {
        let mut j = Jet4::default();
        j.set_partial(2, 0, 1.0);
        j.set_partial(1, 1, 2.0);
        j.set_partial(0, 2, 1.0);
        assert!(matches!(metric_data(&j), Err(Error::NonConvexPoint { .. })));
    }

    #[test]
    fn affine_function_hessian_is_minus_christoffel() {
        let md = metric_data(&canonical_jet(&make_simplex(), [0.0, 0.0]).unwrap()).unwrap();
        let h = hessian(&md, &ScalarField2Jet::affine(0.0, [1.0, 0.0]));
        for a in 0..2 {
            for b in 0..2 {
                assert_eq!(h[a][b], -md.christoffel[0][a][b]);
            }
        }
        let lap = laplacian(&md, &ScalarField2Jet::affine(0.0, [0.7, -0.2]));
        let expect: f64 = (0..2)
            .map(|j| [0.7, -0.2][j] * (md.dinv[0][j][0] + md.dinv[1][j][1]))
            .sum();
        assert!((lap - expect).abs() < 1e-15);
    }

    #[test]
    fn fubini_study_is_einstein() {
        let p = make_simplex();
        for x in [[0.0, 0.0], [0.7, -0.4], [-0.9, 1.6], [1.5, -0.8]] {
            let md = metric_data(&canonical_jet(&p, x).unwrap()).unwrap();
            let ric = ricci_xx(&md);
            for a in 0..2 {
                for b in 0..2 {
                    assert!((ric[a][b] - md.h[a][b]).abs() < 1e-10, "{x:?}");
                }
            }
            assert!((scalar_curvature(&md) - 4.0).abs() < 1e-10);
        }
    }

    #[test]
    fn split_form_matches_summed_jet_in_the_interior() {
        use crate::basis::{MonomialBasis, Symmetry, SymplecticPotential};
        use crate::polytope::make_pentagon;
        let basis = MonomialBasis::new(4, Symmetry::Z2).unwrap();
        let coeffs: Vec<f64> = (0..basis.len())
            .map(|i| 0.01 * (i as f64 + 1.0).sin())
            .collect();
        let s = SymplecticPotential::new(make_pentagon(2.0).unwrap(), basis, coeffs).unwrap();
        for x in [[0.1, 0.2], [-0.4, 0.3], [0.5, -0.6]] {
            let a = s.metric_data(x).unwrap();
            let b = metric_data(&s.jet(x).unwrap()).unwrap();
            let close = |p: f64, q: f64| (p - q).abs() < 1e-11 * (1.0 + q.abs());
            assert!(close(a.det, b.det));
            assert!(close(scalar_curvature(&a), scalar_curvature(&b)));
            let (ra, rb) = (ricci_xx(&a), ricci_xx(&b));
            for i in 0..2 {
                assert!(close(a.g_k[i], b.g_k[i]));
                for j in 0..2 {
                    assert!(close(a.hinv[i][j], b.hinv[i][j]));
                    assert!(close(a.g_kl[i][j], b.g_kl[i][j]));
                    assert!(close(ra[i][j], rb[i][j]));
                    for k in 0..2 {
                        assert!(close(a.dinv[i][j][k], b.dinv[i][j][k]));
                        assert!(close(a.christoffel[i][j][k], b.christoffel[i][j][k]));
                    }
                }
            }
        }
    }

    #[test]
    fn split_form_is_accurate_in_a_corner() {
        // Fubini–Study is Einstein with S = 4 up to the boundary.
        let p = make_simplex();
        let v = p.vertices()[0];
        let c = [
            p.vertices().iter().map(|q| q[0]).sum::<f64>() / 3.0,
            p.vertices().iter().map(|q| q[1]).sum::<f64>() / 3.0,
        ];
        let x = [v[0] + 1e-5 * (c[0] - v[0]), v[1] + 1e-5 * (c[1] - v[1])];
        let s = crate::basis::SymplecticPotential::canonical(p);
        let md = s.metric_data(x).unwrap();
        assert!((scalar_curvature(&md) - 4.0).abs() < 1e-7);
        let ric = ricci_xx(&md);
        for a in 0..2 {
            for b in 0..2 {
                assert!((ric[a][b] - md.h[a][b]).abs() < 1e-6 * md.h[a][b].abs().max(1.0));
            }
        }
    }
}
