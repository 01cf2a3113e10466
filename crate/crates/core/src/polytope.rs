//! Moment polygons of toric surfaces.
//!
//! A polytope is stored as the list of affine functionals `l_r(x) = ν·x + λ₀`
//! whose common non-negativity region is the polygon. Facet order is part of
//! the coefficient-file contract and is never reordered.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

const VERTEX_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineFunctional {
    pub normal: [f64; 2],
    pub offset: f64,
}

impl AffineFunctional {
    pub fn new(normal: [f64; 2], offset: f64) -> Result<Self> {
        if normal[0] == 0.0 && normal[1] == 0.0 {
            return Err(Error::DegeneratePolytope("facet normal is zero".into()));
        }
        Ok(Self { normal, offset })
    }

    #[inline]
    pub fn eval(&self, x: Point) -> f64 {
        self.normal[0] * x[0] + self.normal[1] * x[1] + self.offset
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolytopeKind {
    /// `CP² # (-CP²)`, facets `a+x₁+x₂, 1+x₁, 1+x₂, 1−x₁−x₂`.
    Trapezium,
    /// `CP² # 2(-CP²)`, facets `1+x₁, 1+x₂, a−1−x₁, a−1−x₂, a−1−x₁−x₂`.
    Pentagon,
    /// Reflexive simplex of `CP²`.
    Simplex,
    /// Any other convex polygon built from explicit facets.
    Custom,
}

impl std::fmt::Display for PolytopeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            PolytopeKind::Trapezium => "trapezium",
            PolytopeKind::Pentagon => "pentagon",
            PolytopeKind::Simplex => "simplex",
            PolytopeKind::Custom => "custom",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    facets: Vec<AffineFunctional>,
    class_param: f64,
    kind: PolytopeKind,
    /// Counter-clockwise.
    vertices: Vec<Point>,
}

impl Polytope {
    /// Builds a polygon from facets and validates it (non-empty interior,
    /// no redundant facet, positive area).
    pub fn from_facets(
        kind: PolytopeKind,
        class_param: f64,
        facets: Vec<AffineFunctional>,
    ) -> Result<Self> {
        if facets.len() < 3 {
            return Err(Error::DegeneratePolytope(format!(
                "{} facets cannot bound a polygon",
                facets.len()
            )));
        }
        let vertices = compute_vertices(&facets)?;
        let p = Self {
            facets,
            class_param,
            kind,
            vertices,
        };
        if !(p.volume() > 0.0) {
            return Err(Error::DegeneratePolytope("zero area".into()));
        }
        Ok(p)
    }

    pub fn facets(&self) -> &[AffineFunctional] {
        &self.facets
    }

    pub fn class_param(&self) -> f64 {
        self.class_param
    }

    pub fn kind(&self) -> PolytopeKind {
        self.kind
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    /// Exact area by the shoelace formula on the ordered vertices.
    pub fn volume(&self) -> f64 {
        shoelace(&self.vertices)
    }

    /// True iff `l_r(x) > strict_margin` for every facet.
    pub fn contains(&self, x: Point, strict_margin: f64) -> bool {
        self.facets.iter().all(|l| l.eval(x) > strict_margin)
    }

    pub fn facet_values(&self, x: Point) -> impl Iterator<Item = f64> + '_ {
        self.facets.iter().map(move |l| l.eval(x))
    }

    /// `[x1_min, x1_max, x2_min, x2_max]`
    pub fn bounding_box(&self) -> [f64; 4] {
        let mut b = [
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        ];
        for v in &self.vertices {
            b[0] = b[0].min(v[0]);
            b[1] = b[1].max(v[0]);
            b[2] = b[2].min(v[1]);
            b[3] = b[3].max(v[1]);
        }
        b
    }

    /// The parallel polytope `P_δ = {l_r > δ}`: every offset is reduced by δ.
    pub fn shrink(&self, delta: f64) -> Result<Self> {
        if !(delta >= 0.0) {
            return Err(Error::ParameterDomain(format!(
                "shrink distance {delta} < 0"
            )));
        }
        if delta == 0.0 {
            return Ok(self.clone());
        }
        let facets = self
            .facets
            .iter()
            .map(|l| AffineFunctional {
                normal: l.normal,
                offset: l.offset - delta,
            })
            .collect();
        Self::from_facets(self.kind, self.class_param, facets).map_err(|e| match e {
            Error::DegeneratePolytope(msg) => {
                Error::DegeneratePolytope(format!("shrink by {delta}: {msg}"))
            }
            other => other,
        })
    }
}

pub fn make_trapezium(a: f64) -> Result<Polytope> {
    if !(a > -1.0 && a < 2.0) {
        return Err(Error::ParameterDomain(format!(
            "trapezium class parameter a = {a} outside (-1, 2)"
        )));
    }
    let facets = vec![
        AffineFunctional::new([1.0, 1.0], a)?,
        AffineFunctional::new([1.0, 0.0], 1.0)?,
        AffineFunctional::new([0.0, 1.0], 1.0)?,
        AffineFunctional::new([-1.0, -1.0], 1.0)?,
    ];
    Polytope::from_facets(PolytopeKind::Trapezium, a, facets)
}

pub fn make_pentagon(a: f64) -> Result<Polytope> {
    if !(a > 1.0) || !a.is_finite() {
        return Err(Error::ParameterDomain(format!(
            "pentagon class parameter a = {a} must exceed 1"
        )));
    }
    let facets = vec![
        AffineFunctional::new([1.0, 0.0], 1.0)?,
        AffineFunctional::new([0.0, 1.0], 1.0)?,
        AffineFunctional::new([-1.0, 0.0], a - 1.0)?,
        AffineFunctional::new([0.0, -1.0], a - 1.0)?,
        AffineFunctional::new([-1.0, -1.0], a - 1.0)?,
    ];
    Polytope::from_facets(PolytopeKind::Pentagon, a, facets)
}

pub fn make_simplex() -> Polytope {
    let facets = vec![
        AffineFunctional {
            normal: [1.0, 0.0],
            offset: 1.0,
        },
        AffineFunctional {
            normal: [0.0, 1.0],
            offset: 1.0,
        },
        AffineFunctional {
            normal: [-1.0, -1.0],
            offset: 1.0,
        },
    ];
    Polytope::from_facets(PolytopeKind::Simplex, 1.0, facets).expect("simplex is valid")
}

fn shoelace(v: &[Point]) -> f64 {
    let n = v.len();
    let mut s = 0.0;
    for i in 0..n {
        let p = v[i];
        let q = v[(i + 1) % n];
        s += p[0] * q[1] - q[0] * p[1];
    }
    0.5 * s
}

fn compute_vertices(facets: &[AffineFunctional]) -> Result<Vec<Point>> {
    let mut verts: Vec<Point> = Vec::new();
    for i in 0..facets.len() {
        for j in (i + 1)..facets.len() {
            let (li, lj) = (facets[i], facets[j]);
            let det = li.normal[0] * lj.normal[1] - li.normal[1] * lj.normal[0];
            if det.abs() < 1e-14 {
                continue;
            }
            let x1 = (-li.offset * lj.normal[1] + lj.offset * li.normal[1]) / det;
            let x2 = (-li.normal[0] * lj.offset + lj.normal[0] * li.offset) / det;
            let p = [x1, x2];
            let scale = 1.0 + x1.abs().max(x2.abs());
            if facets.iter().all(|l| l.eval(p) >= -VERTEX_TOL * scale)
                && !verts
                    .iter()
                    .any(|q| (q[0] - p[0]).abs() + (q[1] - p[1]).abs() < VERTEX_TOL * scale)
            {
                verts.push(p);
            }
        }
    }
    if verts.len() < 3 {
        return Err(Error::DegeneratePolytope(format!(
            "only {} vertices; interior is empty",
            verts.len()
        )));
    }
    let cx = verts.iter().map(|v| v[0]).sum::<f64>() / verts.len() as f64;
    let cy = verts.iter().map(|v| v[1]).sum::<f64>() / verts.len() as f64;
    verts.sort_by(|p, q| {
        let ap = (p[1] - cy).atan2(p[0] - cx);
        let aq = (q[1] - cy).atan2(q[0] - cx);
        ap.total_cmp(&aq)
    });
    for (r, l) in facets.iter().enumerate() {
        let on = verts
            .iter()
            .filter(|v| l.eval(**v).abs() <= VERTEX_TOL * (1.0 + v[0].abs().max(v[1].abs())))
            .count();
        if on < 2 {
            return Err(Error::DegeneratePolytope(format!(
                "facet {r} does not support an edge"
            )));
        }
    }
    Ok(verts)
}
