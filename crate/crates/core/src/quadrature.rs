//! Gauss–Legendre rules and tensor-product schemes on moment polygons.
//!
//! A convex polygon is cut into vertical slabs at the x₁-coordinates of its
//! vertices. Inside each slab the lower and upper boundaries are single
//! edges, so the iterated integral has a smooth (affine-limit) inner range
//! and the 1-D rules apply without loss of order. On the trapezium this
//! gives the two regions `x₁ ∈ [−1, 1−a]`, `x₁ ∈ [1−a, 2]`; on the pentagon
//! `x₁ ∈ [−1, 0]`, `x₁ ∈ [0, a−1]`.

use crate::error::{Error, Result};
use crate::polytope::{Point, Polytope, PolytopeKind};

/// Nodes ascending on `[−1, 1]` with matching weights.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let (pn, pn1) = if n == 0 { (1.0, 0.0) } else { (p1, p0) };
    let d = n as f64 * (x * pn - pn1) / (x * x - 1.0);
    (pn, d)
}

/// Weighted points integrating over `region`.
#[derive(Debug, Clone)]
pub struct QuadratureScheme {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub region: Polytope,
    pub order: usize,
}

impl QuadratureScheme {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Fixed-order sum `Σ w̃ᵢ f(pᵢ)`.
    pub fn integrate<F: Fn(Point) -> f64>(&self, f: F) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(*p))
            .sum()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Slab-decomposition scheme with `n` nodes per direction per slab.
pub fn scheme_for(region: &Polytope, n: usize) -> Result<QuadratureScheme> {
    if n == 0 {
        return Err(Error::ParameterDomain("quadrature order 0".into()));
    }
    let (nodes, weights) = gauss_legendre(n);
    let mut xs: Vec<f64> = region.vertices().iter().map(|v| v[0]).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup_by(|a, b| (*a - *b).abs() < 1e-13);

    let mut points = Vec::new();
    let mut w_out = Vec::new();
    for slab in xs.windows(2) {
        let (xa, xb) = (slab[0], slab[1]);
        if xb - xa <= 0.0 {
            continue;
        }
        let (lo_a, hi_a) = vertical_range(region, xa);
        let (lo_b, hi_b) = vertical_range(region, xb);
        let mid = 0.5 * (xa + xb);
        let half = 0.5 * (xb - xa);
        for (s, ws) in nodes.iter().zip(&weights) {
            let x1 = mid + half * s;
            let tau = (x1 - xa) / (xb - xa);
            let lo = lo_a + tau * (lo_b - lo_a);
            let hi = hi_a + tau * (hi_b - hi_a);
            let inner_mid = 0.5 * (lo + hi);
            let inner_half = 0.5 * (hi - lo);
            for (r, wr) in nodes.iter().zip(&weights) {
                points.push([x1, inner_mid + inner_half * r]);
                w_out.push(ws * half * wr * inner_half);
            }
        }
    }
    Ok(QuadratureScheme {
        points,
        weights: w_out,
        region: region.clone(),
        order: n,
    })
}

/// `(min x₂, max x₂)` over the closed polygon at abscissa `x1`.
fn vertical_range(p: &Polytope, x1: f64) -> (f64, f64) {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for l in p.facets() {
        let [n1, n2] = l.normal;
        if n2 == 0.0 {
            continue;
        }
        let bound = -(n1 * x1 + l.offset) / n2;
        if n2 > 0.0 {
            lo = lo.max(bound);
        } else {
            hi = hi.min(bound);
        }
    }
    (lo, hi.max(lo))
}

fn check_kind(p: &Polytope, expected: PolytopeKind) -> Result<()> {
    if p.kind() != expected {
        return Err(Error::KindMismatch {
            expected: expected.to_string(),
            got: p.kind().to_string(),
        });
    }
    Ok(())
}

pub fn scheme_trapezium(p: &Polytope, n: usize) -> Result<QuadratureScheme> {
    check_kind(p, PolytopeKind::Trapezium)?;
    scheme_for(p, n)
}

pub fn scheme_pentagon(p: &Polytope, n: usize) -> Result<QuadratureScheme> {
    check_kind(p, PolytopeKind::Pentagon)?;
    scheme_for(p, n)
}

/// Scheme over the parallel polytope `P_δ`.
pub fn scheme_shrunken(p: &Polytope, delta: f64, n: usize) -> Result<QuadratureScheme> {
    scheme_for(&p.shrink(delta)?, n)
}
