//! Self-test of the numerical building blocks: polygon quadrature against
//! exact integrals, potential jets against finite differences, the curvature
//! trace identity and the Fubini–Study metric.

use serde::Serialize;

use toric_core::basis::{MonomialBasis, Symmetry, SymplecticPotential};
use toric_core::curvature::{ricci_with_correction_sign, scalar_curvature};
use toric_core::polytope::{make_pentagon, make_simplex, make_trapezium, Polytope};
use toric_core::quadrature::scheme_for;
use toric_core::residual::max_grid;
use toric_core::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            pass: value <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadcheckReport {
    pub checks: Vec<Check>,
    pub all_pass: bool,
}

/// Exact `∫_P x₁ᵖ x₂^q` for a convex polygon with integer vertices, by a fan
/// of triangles and the barycentric moment formula, summed in integers.
pub fn exact_monomial_integral(vertices: &[[i64; 2]], p: u32, q: u32) -> f64 {
    let mut total: i128 = 0;
    let v0 = vertices[0];
    for w in vertices[1..].windows(2) {
        let (v1, v2) = (w[0], w[1]);
        let twice_area =
            ((v1[0] - v0[0]) * (v2[1] - v0[1]) - (v2[0] - v0[0]) * (v1[1] - v0[1])) as i128;
        total += twice_area * triangle_moment_sum([v0, v1, v2], p, q);
    }
    // p! q! / (p+q+2)! = 1 / (C(p+q, p) (p+q+1) (p+q+2))
    let n = p + q;
    let denom = binomial_i128(n, p) * (n as i128 + 1) * (n as i128 + 2);
    total as f64 / denom as f64
}

fn binomial_i128(n: u32, k: u32) -> i128 {
    let mut r: i128 = 1;
    for i in 0..k.min(n - k) as i128 {
        r = r * (n as i128 - i) / (i + 1);
    }
    r
}

/// `Σ C(i+l,i) C(j+m,j) C(k+n,k) x₀ⁱx₁ʲx₂ᵏ y₀ˡy₁ᵐy₂ⁿ` over `i+j+k = p`,
/// `l+m+n = q`.
fn triangle_moment_sum(v: [[i64; 2]; 3], p: u32, q: u32) -> i128 {
    let pow = |b: i64, e: u32| (b as i128).pow(e);
    let mut s: i128 = 0;
    for i in 0..=p {
        for j in 0..=p - i {
            let k = p - i - j;
            let xs = pow(v[0][0], i) * pow(v[1][0], j) * pow(v[2][0], k);
            if xs == 0 {
                continue;
            }
            for l in 0..=q {
                for m in 0..=q - l {
                    let n = q - l - m;
                    let c =
                        binomial_i128(i + l, i) * binomial_i128(j + m, j) * binomial_i128(k + n, k);
                    s += c * xs * pow(v[0][1], l) * pow(v[1][1], m) * pow(v[2][1], n);
                }
            }
        }
    }
    s
}

fn integer_vertices(p: &Polytope) -> Option<Vec<[i64; 2]>> {
    p.vertices()
        .iter()
        .map(|v| {
            let r = [v[0].round(), v[1].round()];
            ((r[0] - v[0]).abs() < 1e-12 && (r[1] - v[1]).abs() < 1e-12)
                .then_some([r[0] as i64, r[1] as i64])
        })
        .collect()
}

/// Points of the Halton sequence in bases 2 and 3 mapped into the bounding
/// box and kept when at least `margin` inside every facet.
pub fn halton_interior_points(p: &Polytope, count: usize, margin: f64) -> Vec<[f64; 2]> {
    let radical = |mut i: usize, base: usize| {
        let (mut f, mut r) = (1.0, 0.0);
        while i > 0 {
            f /= base as f64;
            r += f * (i % base) as f64;
            i /= base;
        }
        r
    };
    let [x0, x1, y0, y1] = p.bounding_box();
    let mut out = Vec::with_capacity(count);
    let mut i = 1;
    while out.len() < count {
        let x = [
            x0 + (x1 - x0) * radical(i, 2),
            y0 + (y1 - y0) * radical(i, 3),
        ];
        if p.contains(x, margin) {
            out.push(x);
        }
        i += 1;
    }
    out
}

fn quadrature_checks(checks: &mut Vec<Check>) -> Result<()> {
    let polys = [
        ("trapezium(1)", make_trapezium(1.0)?),
        ("pentagon(2)", make_pentagon(2.0)?),
        ("simplex", make_simplex()),
    ];
    for (name, poly) in &polys {
        let verts = integer_vertices(poly).expect("reference polygons have integer vertices");
        let scheme = scheme_for(poly, 20)?;
        let area = exact_monomial_integral(&verts, 0, 0);
        checks.push(Check::new(
            format!("area {name} = {area}"),
            (scheme.total_weight() - area).abs() / area,
            1e-12,
        ));
        let mut worst: f64 = 0.0;
        for n in 0..=30u32 {
            for a in 0..=n {
                let exact = exact_monomial_integral(&verts, a, n - a);
                let f = |x: [f64; 2]| x[0].powi(a as i32) * x[1].powi((n - a) as i32);
                let quad = scheme.integrate(f);
                // Odd moments of a centred polygon vanish, so errors are
                // measured against ∫|f| where the exact value is small.
                let scale = exact.abs().max(scheme.integrate(|x| f(x).abs()));
                worst = worst.max((quad - exact).abs() / scale);
            }
        }
        checks.push(Check::new(
            format!("monomials to degree 30 on {name}"),
            worst,
            1e-12,
        ));
    }
    Ok(())
}

/// A fixed ℤ₂ potential on the pentagon used by the pointwise checks.
fn test_potential() -> Result<SymplecticPotential> {
    let basis = MonomialBasis::new(6, Symmetry::Z2)?;
    let coeffs = (0..basis.len())
        .map(|i| 0.05 * ((i as f64 + 1.0) * 1.7).sin())
        .collect();
    SymplecticPotential::new(make_pentagon(2.0)?, basis, coeffs)
}

fn jet_checks(checks: &mut Vec<Check>, ricci_sign: f64) -> Result<()> {
    let s = test_potential()?;
    let pts = halton_interior_points(s.polytope(), 50, 0.05);
    let h = 1e-4;
    let mut worst_hess: f64 = 0.0;
    let mut worst_trace: f64 = 0.0;
    for &x in &pts {
        let jet = s.jet(x)?;
        let f = |dx: f64, dy: f64| s.value([x[0] + dx, x[1] + dy]);
        let fd = [
            [
                (f(h, 0.0)? - 2.0 * f(0.0, 0.0)? + f(-h, 0.0)?) / (h * h),
                (f(h, h)? - f(h, -h)? - f(-h, h)? + f(-h, -h)?) / (4.0 * h * h),
            ],
            [
                0.0,
                (f(0.0, h)? - 2.0 * f(0.0, 0.0)? + f(0.0, -h)?) / (h * h),
            ],
        ];
        let hess = jet.hess();
        for (i, j) in [(0, 0), (0, 1), (1, 1)] {
            worst_hess = worst_hess.max((hess[i][j] - fd[i][j]).abs() / hess[i][j].abs().max(1.0));
        }
        let md = s.metric_data(x)?;
        let ric = ricci_with_correction_sign(&md, ricci_sign);
        let mut tr = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                tr += md.hinv[i][j] * ric[i][j];
            }
        }
        let sc = scalar_curvature(&md);
        worst_trace = worst_trace.max((sc - 2.0 * tr).abs() / sc.abs().max(1.0));
    }
    checks.push(Check::new(
        "potential Hessian against finite differences",
        worst_hess,
        1e-5,
    ));
    checks.push(Check::new(
        "trace identity S = 2 tr(u⁻¹ Ric)",
        worst_trace,
        1e-10,
    ));
    Ok(())
}

fn fubini_study_checks(checks: &mut Vec<Check>, ricci_sign: f64) -> Result<()> {
    let poly = make_simplex();
    let s = SymplecticPotential::canonical(poly.clone());
    let inner = poly.shrink(0.01)?;
    let (mut ric_err, mut s_err): (f64, f64) = (0.0, 0.0);
    for x in max_grid(&poly, 101) {
        if !inner.contains(x, 0.0) {
            continue;
        }
        let md = s.metric_data(x)?;
        let ric = ricci_with_correction_sign(&md, ricci_sign);
        for i in 0..2 {
            for j in 0..2 {
                ric_err = ric_err.max((ric[i][j] - md.h[i][j]).abs());
            }
        }
        s_err = s_err.max((scalar_curvature(&md) - 4.0).abs());
    }
    checks.push(Check::new(
        "Fubini-Study max |Ric - g| on P_0.01",
        ric_err,
        1e-8,
    ));
    checks.push(Check::new(
        "Fubini-Study max |S - 4| on P_0.01",
        s_err,
        1e-8,
    ));
    Ok(())
}

/// Runs every check. `mutate_ricci` flips the sign of the first-order
/// correction in the Ricci formula, which the trace identity must detect.
pub fn quadcheck(mutate_ricci: bool) -> Result<QuadcheckReport> {
    let sign = if mutate_ricci { -1.0 } else { 1.0 };
    let mut checks = Vec::new();
    quadrature_checks(&mut checks)?;
    jet_checks(&mut checks, sign)?;
    fubini_study_checks(&mut checks, sign)?;
    let all_pass = checks.iter().all(|c| c.pass);
    Ok(QuadcheckReport { checks, all_pass })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_integrals_of_the_unit_square() {
        let sq = [[0, 0], [1, 0], [1, 1], [0, 1]];
        assert_eq!(exact_monomial_integral(&sq, 0, 0), 1.0);
        assert_eq!(exact_monomial_integral(&sq, 1, 0), 0.5);
        assert!((exact_monomial_integral(&sq, 2, 3) - 1.0 / 12.0).abs() < 1e-16);
    }

    #[test]
    fn halton_points_are_interior() {
        let p = make_pentagon(2.0).unwrap();
        for x in halton_interior_points(&p, 20, 0.05) {
            assert!(p.contains(x, 0.05));
        }
    }
}
