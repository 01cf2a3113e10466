//! Polygon quadrature against exact integrals of monomials.

mod common;

use common::exact_monomial_integral;
use toric_core::polytope::{make_pentagon, make_simplex, make_trapezium, Polytope};
use toric_core::quadrature::scheme_for;

fn integer_vertices(p: &Polytope) -> Vec<[i64; 2]> {
    p.vertices()
        .iter()
        .map(|v| {
            let r = [v[0].round(), v[1].round()];
            assert!((r[0] - v[0]).abs() < 1e-12 && (r[1] - v[1]).abs() < 1e-12);
            [r[0] as i64, r[1] as i64]
        })
        .collect()
}

#[test]
fn exact_integrals_of_reference_shapes() {
    let square = [[0, 0], [1, 0], [1, 1], [0, 1]];
    assert_eq!(exact_monomial_integral(&square, 0, 0), 1.0);
    assert_eq!(exact_monomial_integral(&square, 3, 0), 0.25);
    assert!((exact_monomial_integral(&square, 2, 3) - 1.0 / 12.0).abs() < 1e-16);
    let tri = [[0, 0], [1, 0], [0, 1]];
    // ∫ x y over the unit triangle is 1/24.
    assert!((exact_monomial_integral(&tri, 1, 1) - 1.0 / 24.0).abs() < 1e-16);
}

/// Returns the worst error over all monomials of total degree ≤ 30, relative
/// to `max(|∫f|, ∫|f|)`. The second term matters only for the moments that
/// vanish by symmetry, where a pure relative error is undefined.
fn worst_monomial_error(p: &Polytope) -> f64 {
    let verts = integer_vertices(p);
    let scheme = scheme_for(p, 20).unwrap();
    let mut worst = 0.0f64;
    for n in 0..=30u32 {
        for a in 0..=n {
            let f = |x: [f64; 2]| x[0].powi(a as i32) * x[1].powi((n - a) as i32);
            let exact = exact_monomial_integral(&verts, a, n - a);
            let scale = exact.abs().max(scheme.integrate(|x| f(x).abs()));
            worst = worst.max((scheme.integrate(f) - exact).abs() / scale);
        }
    }
    worst
}

#[test]
fn monomials_to_degree_30_are_exact() {
    for p in [
        make_trapezium(1.0).unwrap(),
        make_pentagon(2.0).unwrap(),
        make_simplex(),
    ] {
        let e = worst_monomial_error(&p);
        assert!(e <= 1e-12, "{:?}: {e:e}", p.kind());
    }
}

#[test]
fn areas_match_exact_values() {
    for (p, area) in [
        (make_trapezium(1.0).unwrap(), 4.0),
        (make_pentagon(2.0).unwrap(), 3.5),
        (make_simplex(), 4.5),
    ] {
        let exact = exact_monomial_integral(&integer_vertices(&p), 0, 0);
        assert_eq!(exact, area);
        let q = scheme_for(&p, 20).unwrap().total_weight();
        assert!((q - area).abs() <= 1e-12 * area, "{q}");
        assert!((p.volume() - area).abs() <= 1e-12 * area);
    }
}
