//! Independent reference computations for the integration tests. Nothing
//! here reuses the curvature code under test: integrals come from exact
//! integer arithmetic on triangles, and curvature comes from finite
//! differences of the full four-dimensional metric.

#![allow(dead_code)]

/// Exact `∫_P x₁ᵖ x₂^q` over a convex polygon with integer vertices listed
/// counter-clockwise, by fanning into triangles from the first vertex.
///
/// On a triangle `∫ x^p y^q = 2|T| p! q! / (p+q+2)! · Σ Π C(·)` with the sum
/// running over the splittings of both exponents among the three vertices.
pub fn exact_monomial_integral(vertices: &[[i64; 2]], p: u32, q: u32) -> f64 {
    let v0 = vertices[0];
    let mut total: i128 = 0;
    for w in vertices[1..].windows(2) {
        let (v1, v2) = (w[0], w[1]);
        let twice_area =
            ((v1[0] - v0[0]) * (v2[1] - v0[1]) - (v2[0] - v0[0]) * (v1[1] - v0[1])) as i128;
        let mut s: i128 = 0;
        for i in 0..=p {
            for j in 0..=p - i {
                let k = p - i - j;
                let xs = ipow(v0[0], i) * ipow(v1[0], j) * ipow(v2[0], k);
                for l in 0..=q {
                    for m in 0..=q - l {
                        let n = q - l - m;
                        s += choose(i + l, i)
                            * choose(j + m, j)
                            * choose(k + n, k)
                            * xs
                            * ipow(v0[1], l)
                            * ipow(v1[1], m)
                            * ipow(v2[1], n);
                    }
                }
            }
        }
        total += twice_area * s;
    }
    let n = (p + q) as i128;
    total as f64 / (choose(p + q, p) * (n + 1) * (n + 2)) as f64
}

fn ipow(b: i64, e: u32) -> i128 {
    (b as i128).pow(e)
}

fn choose(n: u32, k: u32) -> i128 {
    (0..k as i128).fold(1, |acc, i| acc * (n as i128 - i) / (i + 1))
}

/// Fourth-order central difference of a vector-valued function along one
/// coordinate.
fn diff<const N: usize>(
    f: &dyn Fn([f64; 2]) -> [f64; N],
    x: [f64; 2],
    dir: usize,
    h: f64,
) -> [f64; N] {
    let at = |s: f64| {
        let mut y = x;
        y[dir] += s * h;
        f(y)
    };
    let (p1, m1, p2, m2) = (at(1.0), at(-1.0), at(2.0), at(-2.0));
    std::array::from_fn(|i| (8.0 * (p1[i] - m1[i]) - (p2[i] - m2[i])) / (12.0 * h))
}

type Mat4 = [[f64; 4]; 4];

fn inv2(m: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    [
        [m[1][1] / det, -m[0][1] / det],
        [-m[1][0] / det, m[0][0] / det],
    ]
}

/// Riemannian geometry of `g = u_ij dxⁱdxʲ + u^ij dθᵢdθⱼ` computed from the
/// Hessian `u_ij(x)` alone. The metric does not depend on θ, so only the x
/// directions carry derivatives.
pub struct RiemannOracle<'a> {
    pub hessian: &'a dyn Fn([f64; 2]) -> [[f64; 2]; 2],
    pub h: f64,
}

impl RiemannOracle<'_> {
    pub fn metric(&self, x: [f64; 2]) -> Mat4 {
        let u = (self.hessian)(x);
        let w = inv2(u);
        let mut g = [[0.0; 4]; 4];
        for i in 0..2 {
            for j in 0..2 {
                g[i][j] = u[i][j];
                g[i + 2][j + 2] = w[i][j];
            }
        }
        g
    }

    fn metric_flat(&self, x: [f64; 2]) -> [f64; 16] {
        let g = self.metric(x);
        std::array::from_fn(|k| g[k / 4][k % 4])
    }

    /// `Γ^a_bc` flattened as `a·16 + b·4 + c`.
    pub fn christoffel_flat(&self, x: [f64; 2]) -> [f64; 64] {
        // The inverse of g swaps the two blocks: u^{ij} on x and u_ij on θ.
        let u = (self.hessian)(x);
        let w = inv2(u);
        let mut ginv = [[0.0; 4]; 4];
        for i in 0..2 {
            for j in 0..2 {
                ginv[i][j] = w[i][j];
                ginv[i + 2][j + 2] = u[i][j];
            }
        }
        let f = |y: [f64; 2]| self.metric_flat(y);
        let dg: [[f64; 16]; 2] = [diff(&f, x, 0, self.h), diff(&f, x, 1, self.h)];
        // ∂_k g_ij, zero for the angle directions k = 2, 3.
        let d = |k: usize, i: usize, j: usize| if k < 2 { dg[k][i * 4 + j] } else { 0.0 };
        let mut out = [0.0; 64];
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    let mut s = 0.0;
                    for e in 0..4 {
                        s += ginv[a][e] * (d(b, e, c) + d(c, e, b) - d(e, b, c));
                    }
                    out[a * 16 + b * 4 + c] = 0.5 * s;
                }
            }
        }
        out
    }

    /// Ricci tensor `R_bd = ∂_a Γ^a_bd − ∂_d Γ^a_ab + Γ^a_ae Γ^e_bd − Γ^a_de Γ^e_ab`.
    pub fn ricci(&self, x: [f64; 2]) -> Mat4 {
        let gam = self.christoffel_flat(x);
        let f = |y: [f64; 2]| self.christoffel_flat(y);
        let dgam: [[f64; 64]; 2] = [diff(&f, x, 0, self.h), diff(&f, x, 1, self.h)];
        let g = |a: usize, b: usize, c: usize| gam[a * 16 + b * 4 + c];
        let dg = |k: usize, a: usize, b: usize, c: usize| {
            if k < 2 {
                dgam[k][a * 16 + b * 4 + c]
            } else {
                0.0
            }
        };
        let mut r = [[0.0; 4]; 4];
        for b in 0..4 {
            for dd in 0..4 {
                let mut s = 0.0;
                for a in 0..4 {
                    s += dg(a, a, b, dd) - dg(dd, a, a, b);
                    for e in 0..4 {
                        s += g(a, a, e) * g(e, b, dd) - g(a, dd, e) * g(e, a, b);
                    }
                }
                r[b][dd] = s;
            }
        }
        r
    }

    pub fn scalar(&self, x: [f64; 2]) -> f64 {
        let g = self.metric(x);
        let ric = self.ricci(x);
        let u = [[g[0][0], g[0][1]], [g[1][0], g[1][1]]];
        let w = inv2(u);
        let mut s = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                s += w[i][j] * ric[i][j] + u[i][j] * ric[i + 2][j + 2];
            }
        }
        s
    }

    /// Laplace–Beltrami of a torus-invariant `f`. The volume form of `g`
    /// is `dx dθ`, so `Δf = ∂_i (u^{ij} ∂_j f)`.
    pub fn laplacian(&self, f: &dyn Fn([f64; 2]) -> f64, x: [f64; 2]) -> f64 {
        let flux = |y: [f64; 2]| {
            let w = inv2((self.hessian)(y));
            let grad = diff(&|z: [f64; 2]| [f(z)], y, 0, self.h)[0];
            let grad2 = diff(&|z: [f64; 2]| [f(z)], y, 1, self.h)[0];
            [
                w[0][0] * grad + w[0][1] * grad2,
                w[1][0] * grad + w[1][1] * grad2,
            ]
        };
        diff(&flux, x, 0, self.h)[0] + diff(&flux, x, 1, self.h)[1]
    }

    /// x–x block of the Riemannian Hessian `∂_a∂_b f − Γ^k_ab ∂_k f`.
    pub fn hessian_of(&self, f: &dyn Fn([f64; 2]) -> f64, x: [f64; 2]) -> [[f64; 2]; 2] {
        let gam = self.christoffel_flat(x);
        let grad = |y: [f64; 2]| {
            [
                diff(&|z: [f64; 2]| [f(z)], y, 0, self.h)[0],
                diff(&|z: [f64; 2]| [f(z)], y, 1, self.h)[0],
            ]
        };
        let g0 = grad(x);
        let dgrad = [diff(&grad, x, 0, self.h), diff(&grad, x, 1, self.h)];
        let mut out = [[0.0; 2]; 2];
        for a in 0..2 {
            for b in 0..2 {
                out[a][b] = dgrad[a][b] - gam[a * 4 + b] * g0[0] - gam[16 + a * 4 + b] * g0[1];
            }
        }
        out
    }
}
