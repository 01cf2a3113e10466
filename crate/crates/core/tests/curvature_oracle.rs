//! Curvature of random potentials against a finite-difference Riemannian
//! oracle, and the Fubini–Study metric on the simplex.

mod common;

use common::RiemannOracle;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use toric_core::basis::{MonomialBasis, Symmetry, SymplecticPotential};
use toric_core::curvature::{hessian, laplacian, ricci_xx, scalar_curvature, ScalarField2Jet};
use toric_core::polytope::{make_pentagon, make_simplex};
use toric_core::residual::max_grid;

const TOL: f64 = 1e-5;

/// `f = sin x₁ + x₁ x₂²` with its exact jet.
fn test_fn(x: [f64; 2]) -> f64 {
    x[0].sin() + x[0] * x[1] * x[1]
}

fn test_jet(x: [f64; 2]) -> ScalarField2Jet {
    ScalarField2Jet {
        value: test_fn(x),
        grad: [x[0].cos() + x[1] * x[1], 2.0 * x[0] * x[1]],
        hess: [[-x[0].sin(), 2.0 * x[1]], [2.0 * x[1], 2.0 * x[0]]],
    }
}

fn max_abs(m: &[[f64; 2]; 2]) -> f64 {
    m.iter().flatten().fold(0.0, |a, v| a.max(v.abs()))
}

/// `max|a − b| / max(1, max|b|)` over the entries.
fn rel2(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> f64 {
    let mut d = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            d[i][j] = a[i][j] - b[i][j];
        }
    }
    max_abs(&d) / max_abs(b).max(1.0)
}

fn random_potential(rng: &mut ChaCha8Rng) -> SymplecticPotential {
    let basis = MonomialBasis::new(6, Symmetry::Z2).unwrap();
    let coeffs = (0..basis.len())
        .map(|_| rng.gen_range(-0.05..=0.05))
        .collect();
    SymplecticPotential::new(make_pentagon(2.0).unwrap(), basis, coeffs).unwrap()
}

fn random_interior_point(rng: &mut ChaCha8Rng, s: &SymplecticPotential) -> [f64; 2] {
    let [x0, x1, y0, y1] = s.polytope().bounding_box();
    loop {
        let x = [rng.gen_range(x0..x1), rng.gen_range(y0..y1)];
        if s.polytope().contains(x, 0.05) {
            return x;
        }
    }
}

#[test]
fn curvature_matches_the_riemannian_oracle_at_random_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut worst = [0.0f64; 6];
    for _ in 0..50 {
        let s = random_potential(&mut rng);
        let x = random_interior_point(&mut rng, &s);
        let hess_fn = |y: [f64; 2]| s.jet(y).unwrap().hess();
        let oracle = RiemannOracle {
            hessian: &hess_fn,
            h: 2.5e-4,
        };
        let md = s.metric_data(x).unwrap();

        let ric = ricci_xx(&md);
        let ric4 = oracle.ricci(x);
        let ric_o = [[ric4[0][0], ric4[0][1]], [ric4[1][0], ric4[1][1]]];
        worst[0] = worst[0].max(rel2(&ric, &ric_o));

        let sc = scalar_curvature(&md);
        let sc_o = oracle.scalar(x);
        worst[1] = worst[1].max((sc - sc_o).abs() / sc_o.abs().max(1.0));

        let gam = oracle.christoffel_flat(x);
        for k in 0..2 {
            let o = [
                [gam[k * 16], gam[k * 16 + 1]],
                [gam[k * 16 + 4], gam[k * 16 + 5]],
            ];
            worst[2] = worst[2].max(rel2(&md.christoffel[k], &o));
        }

        let f = test_jet(x);
        worst[3] = worst[3].max(rel2(&hessian(&md, &f), &oracle.hessian_of(&test_fn, x)));
        let lap_o = oracle.laplacian(&test_fn, x);
        worst[4] = worst[4].max((laplacian(&md, &f) - lap_o).abs() / lap_o.abs().max(1.0));

        let mut tr = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                tr += md.hinv[i][j] * ric[i][j];
            }
        }
        worst[5] = worst[5].max((sc - 2.0 * tr).abs() / sc.abs().max(1.0));
    }
    let names = [
        "Ricci",
        "scalar",
        "Christoffel",
        "Hessian",
        "Laplacian",
        "trace identity",
    ];
    for (n, w) in names.iter().zip(worst) {
        println!("{n}: {w:.3e}");
    }
    for w in &worst[..5] {
        assert!(*w <= TOL, "{worst:?}");
    }
    assert!(worst[5] <= 1e-10, "{worst:?}");
}

#[test]
fn oracle_ricci_is_kahler_shaped() {
    // For a Kähler metric the angle block is u⁻¹ Ric u⁻¹ and the mixed
    // block vanishes; a check on the oracle itself.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let s = random_potential(&mut rng);
    let x = random_interior_point(&mut rng, &s);
    let hess_fn = |y: [f64; 2]| s.jet(y).unwrap().hess();
    let oracle = RiemannOracle {
        hessian: &hess_fn,
        h: 2.5e-4,
    };
    let r = oracle.ricci(x);
    let w = s.metric_data(x).unwrap().hinv;
    for i in 0..2 {
        for j in 0..2 {
            assert!(r[i][j + 2].abs() < 1e-6);
            let mut expect = 0.0;
            for k in 0..2 {
                for l in 0..2 {
                    expect += w[i][k] * r[k][l] * w[l][j];
                }
            }
            assert!((r[i + 2][j + 2] - expect).abs() < 1e-6);
        }
    }
}

#[test]
fn oracle_reproduces_fubini_study() {
    let s = SymplecticPotential::canonical(make_simplex());
    let hess_fn = |y: [f64; 2]| s.jet(y).unwrap().hess();
    let oracle = RiemannOracle {
        hessian: &hess_fn,
        h: 2.5e-4,
    };
    for x in [[0.0, 0.0], [0.5, -0.3], [-0.6, 0.9]] {
        let g = oracle.metric(x);
        let r = oracle.ricci(x);
        for i in 0..4 {
            for j in 0..4 {
                assert!((r[i][j] - g[i][j]).abs() < 1e-6, "{x:?}");
            }
        }
        assert!((oracle.scalar(x) - 4.0).abs() < 1e-6);
    }
}

#[test]
fn fubini_study_is_einstein_on_the_shrunken_simplex() {
    let poly = make_simplex();
    let s = SymplecticPotential::canonical(poly.clone());
    let inner = poly.shrink(0.01).unwrap();
    let (mut ric_err, mut s_err, mut n) = (0.0f64, 0.0f64, 0);
    for x in max_grid(&poly, 201) {
        if !inner.contains(x, 0.0) {
            continue;
        }
        n += 1;
        let md = s.metric_data(x).unwrap();
        let ric = ricci_xx(&md);
        for i in 0..2 {
            for j in 0..2 {
                ric_err = ric_err.max((ric[i][j] - md.h[i][j]).abs());
            }
        }
        s_err = s_err.max((scalar_curvature(&md) - 4.0).abs());
    }
    assert!(n > 10_000);
    assert!(ric_err <= 1e-8, "max |Ric - u| = {ric_err}");
    assert!(s_err <= 1e-8, "max |S - 4| = {s_err}");
}
