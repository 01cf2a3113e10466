//! Residual integrands for the soliton and quasi-Einstein equations, the
//! weighted least-squares objective and the reported error metrics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{MonomialBasis, Polynomial, SymplecticPotential};
use crate::curvature::{
    grad_inner, hessian, laplacian, ricci_xx, scalar_curvature, MetricData, ScalarField2Jet, Sym2,
};
use crate::error::{Error, Result};
use crate::polytope::{Point, Polytope};
use crate::quadrature::QuadratureScheme;

/// Real dimension of the surfaces under study.
pub const DIMENSION: f64 = 4.0;

/// Shrink distance for tensor residuals and for the `Max` grid.
pub const DEFAULT_DELTA: f64 = 0.005;

pub const DEFAULT_GRID_N: usize = 201;

/// Soliton potential `φ = coeff·(x₁ + x₂)`, λ = 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolitonData {
    pub coeff: f64,
}

impl SolitonData {
    pub fn phi(&self) -> ScalarField2Jet {
        ScalarField2Jet::affine(0.0, [self.coeff, self.coeff])
    }
}

/// Conformal factor and quasi-Einstein potential
/// `σ = −log(bt+c) + ε₁`, `φ = −m log((d(bt+c)+1)/(bt+c)) + ε₂`, `t = x₁+x₂`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformalData {
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub m: f64,
    pub mu: f64,
    /// ℤ₂ coefficients over total degrees `1..=eps_degree`; empty when absent.
    #[serde(default)]
    pub eps1: Vec<f64>,
    #[serde(default)]
    pub eps2: Vec<f64>,
    #[serde(default)]
    pub eps_degree: u32,
}

impl ConformalData {
    pub fn new(b: f64, c: f64, d: f64, m: f64, mu: f64) -> Result<Self> {
        if !(m > 1.0) {
            return Err(Error::ParameterDomain(format!("m = {m} must exceed 1")));
        }
        Ok(Self {
            b,
            c,
            d,
            m,
            mu,
            eps1: Vec::new(),
            eps2: Vec::new(),
            eps_degree: 0,
        })
    }

    /// Attaches zero perturbation polynomials of the given degree.
    pub fn with_eps_degree(mut self, degree: u32) -> Result<Self> {
        if degree == 0 {
            self.eps1.clear();
            self.eps2.clear();
            self.eps_degree = 0;
            return Ok(self);
        }
        let n = MonomialBasis::z2_range(1, degree)?.len();
        self.eps1 = vec![0.0; n];
        self.eps2 = vec![0.0; n];
        self.eps_degree = degree;
        Ok(self)
    }

    pub fn eps_basis(&self) -> Option<MonomialBasis> {
        (self.eps_degree > 0).then(|| MonomialBasis::z2_range(1, self.eps_degree).expect("valid"))
    }

    /// Precomputed form used in the hot loop.
    pub fn fields(&self) -> Result<ConformalFields<'_>> {
        let (e1, e2) = match self.eps_basis() {
            Some(basis) => (
                Some(basis.expand(&self.eps1)?),
                Some(basis.expand(&self.eps2)?),
            ),
            None => (None, None),
        };
        Ok(ConformalFields {
            data: self,
            eps1: e1,
            eps2: e2,
        })
    }
}

pub struct ConformalFields<'a> {
    data: &'a ConformalData,
    eps1: Option<Polynomial>,
    eps2: Option<Polynomial>,
}

impl ConformalFields<'_> {
    pub fn sigma(&self, x: Point) -> Result<ScalarField2Jet> {
        let cd = self.data;
        let s = cd.b * (x[0] + x[1]) + cd.c;
        if !(s > 0.0) {
            return Err(Error::NonPositiveLog(s));
        }
        let d1 = -cd.b / s;
        let d2 = cd.b * cd.b / (s * s);
        let base = ScalarField2Jet {
            value: -s.ln(),
            grad: [d1, d1],
            hess: [[d2, d2], [d2, d2]],
        };
        Ok(match &self.eps1 {
            Some(p) => base + p.jet2(x),
            None => base,
        })
    }

    pub fn phi(&self, x: Point) -> Result<ScalarField2Jet> {
        let cd = self.data;
        let s = cd.b * (x[0] + x[1]) + cd.c;
        let big = cd.d * s + 1.0;
        if !(s > 0.0) {
            return Err(Error::NonPositiveLog(s));
        }
        if !(big > 0.0) {
            return Err(Error::NonPositiveLog(big));
        }
        let (b, d, m) = (cd.b, cd.d, cd.m);
        let d1 = -m * (d * b / big - b / s);
        let d2 = m * (d * d * b * b / (big * big) - b * b / (s * s));
        let base = ScalarField2Jet {
            value: -m * (big.ln() - s.ln()),
            grad: [d1, d1],
            hess: [[d2, d2], [d2, d2]],
        };
        Ok(match &self.eps2 {
            Some(p) => base + p.jet2(x),
            None => base,
        })
    }
}

pub fn field_jet_sigma(cd: &ConformalData, x: Point) -> Result<ScalarField2Jet> {
    cd.fields()?.sigma(x)
}

pub fn field_jet_phi_qe(cd: &ConformalData, x: Point) -> Result<ScalarField2Jet> {
    cd.fields()?.phi(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResidualKind {
    /// `S + Δφ − 4`
    T1,
    /// `‖Ric + ∇²φ − g‖`
    T2,
    /// `‖Ric − 𝒜‖`
    T3,
    /// trace of the quasi-Einstein equation in the conformal metric
    T4,
}

impl ResidualKind {
    pub fn is_tensor(self) -> bool {
        matches!(self, ResidualKind::T2 | ResidualKind::T3)
    }

    pub fn is_soliton(self) -> bool {
        matches!(self, ResidualKind::T1 | ResidualKind::T2)
    }

    /// The scalar/tensor companion reported alongside this residual.
    pub fn companion(self) -> ResidualKind {
        match self {
            ResidualKind::T1 => ResidualKind::T2,
            ResidualKind::T2 => ResidualKind::T1,
            ResidualKind::T3 => ResidualKind::T4,
            ResidualKind::T4 => ResidualKind::T3,
        }
    }
}

impl std::fmt::Display for ResidualKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ResidualKind::T1 => "t1",
            ResidualKind::T2 => "t2",
            ResidualKind::T3 => "t3",
            ResidualKind::T4 => "t4",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    FullPolytope,
    Shrunken(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    /// `rᵢ = √w̃ᵢ·T(pᵢ)`, so `Σ rᵢ²` is the quadrature of `∫T²`.
    SqrtWeight,
    /// `rᵢ = w̃ᵢ·T(pᵢ)`, the literal weighted sum of squares.
    PlainWeight,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualSpec {
    pub kind: ResidualKind,
    pub region: Region,
    pub weight_mode: WeightMode,
}

impl ResidualSpec {
    /// Tensor residuals on `P_δ` (δ = 0.005), scalar ones on `P`.
    pub fn standard(kind: ResidualKind, weight_mode: WeightMode) -> Self {
        let region = if kind.is_tensor() {
            Region::Shrunken(DEFAULT_DELTA)
        } else {
            Region::FullPolytope
        };
        Self {
            kind,
            region,
            weight_mode,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind.is_tensor() && !matches!(self.region, Region::Shrunken(d) if d > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "{} is singular at the boundary and needs a shrunken region",
                self.kind
            )));
        }
        Ok(())
    }

    pub fn region_polytope(&self, p: &Polytope) -> Result<Polytope> {
        match self.region {
            Region::FullPolytope => Ok(p.clone()),
            Region::Shrunken(d) => p.shrink(d),
        }
    }
}

/// Which equation the residual measures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldData {
    Soliton(SolitonData),
    QuasiEinstein(ConformalData),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorMetrics {
    /// `Vol(P)⁻¹ √𝓘`
    pub normalized: f64,
    /// `√(𝓘 / Vol(P))`, the root-mean-square residual
    pub rms: f64,
    /// `max |T|` over the grid restricted to `P_0.005`
    pub max_abs: f64,
    /// `max |T|` over the quadrature nodes
    pub max_nodes: f64,
    /// `𝓘`
    pub objective: f64,
}

fn sym_add(a: Sym2, b: Sym2, s: f64) -> Sym2 {
    [
        [a[0][0] + s * b[0][0], a[0][1] + s * b[0][1]],
        [a[1][0] + s * b[1][0], a[1][1] + s * b[1][1]],
    ]
}

/// Frobenius norm over ordered index pairs (off-diagonal counted twice).
pub fn sym_norm(r: &Sym2) -> f64 {
    (r[0][0] * r[0][0] + r[0][1] * r[0][1] + r[1][0] * r[1][0] + r[1][1] * r[1][1]).sqrt()
}

/// Conformal quasi-Einstein tensor (x–x block): the right-hand side of
/// `Ric(g_K) = 𝒜` for `g = e^{2σ} g_K` solving
/// `Ric(g) + ∇²φ − (1/m) dφ⊗dφ = g`.
pub fn qe_tensor_a(
    md: &MetricData,
    sigma: &ScalarField2Jet,
    phi: &ScalarField2Jet,
    m: f64,
) -> Sym2 {
    let hs = hessian(md, sigma);
    let hp = hessian(md, phi);
    let ds = sigma.grad;
    let dp = phi.grad;
    let scalar = laplacian(md, sigma) + 2.0 * grad_inner(md, sigma, sigma)
        - grad_inner(md, sigma, phi)
        + (2.0 * sigma.value).exp();
    let mut a = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            a[i][j] = 2.0 * hs[i][j] - hp[i][j] - 2.0 * ds[i] * ds[j]
                + ds[i] * dp[j]
                + dp[i] * ds[j]
                + dp[i] * dp[j] / m
                + scalar * md.h[i][j];
        }
    }
    a
}

/// Trace of the quasi-Einstein equation taken in `g = e^{2σ} g_K`, minus 4.
pub fn qe_trace(md: &MetricData, sigma: &ScalarField2Jet, phi: &ScalarField2Jet, m: f64) -> f64 {
    let s_k = scalar_curvature(md);
    let lap_s = laplacian(md, sigma);
    let lap_p = laplacian(md, phi);
    let gss = grad_inner(md, sigma, sigma);
    let gsp = grad_inner(md, sigma, phi);
    let gpp = grad_inner(md, phi, phi);
    (-2.0 * sigma.value).exp() * (s_k - 6.0 * lap_s - 6.0 * gss + lap_p + 2.0 * gsp - gpp / m)
        - DIMENSION
}

pub fn t1(s: &SymplecticPotential, sd: &SolitonData, x: Point) -> Result<f64> {
    let md = s.metric_data(x)?;
    Ok(t1_at(&md, sd))
}

fn t1_at(md: &MetricData, sd: &SolitonData) -> f64 {
    scalar_curvature(md) + laplacian(md, &sd.phi()) - DIMENSION
}

/// `Ric_ab + (∇²φ)_ab − u_ab`.
pub fn t2_components(s: &SymplecticPotential, sd: &SolitonData, x: Point) -> Result<Sym2> {
    let md = s.metric_data(x)?;
    Ok(t2_at(&md, sd))
}

fn t2_at(md: &MetricData, sd: &SolitonData) -> Sym2 {
    let r = sym_add(ricci_xx(md), hessian(md, &sd.phi()), 1.0);
    sym_add(r, md.h, -1.0)
}

/// `Ric_ab − 𝒜_ab`.
pub fn t3_components(s: &SymplecticPotential, cd: &ConformalData, x: Point) -> Result<Sym2> {
    let f = cd.fields()?;
    let md = s.metric_data(x)?;
    let (sig, phi) = (f.sigma(x)?, f.phi(x)?);
    Ok(sym_add(
        ricci_xx(&md),
        qe_tensor_a(&md, &sig, &phi, cd.m),
        -1.0,
    ))
}

pub fn t4(s: &SymplecticPotential, cd: &ConformalData, x: Point) -> Result<f64> {
    let f = cd.fields()?;
    let md = s.metric_data(x)?;
    Ok(qe_trace(&md, &f.sigma(x)?, &f.phi(x)?, cd.m))
}

/// Pointwise evaluator with per-call precomputation hoisted out of the
/// quadrature loop.
pub struct Evaluator<'a> {
    potential: &'a SymplecticPotential,
    kind: ResidualKind,
    soliton: Option<SolitonData>,
    conformal: Option<(ConformalFields<'a>, f64)>,
}

impl<'a> Evaluator<'a> {
    pub fn new(
        potential: &'a SymplecticPotential,
        data: &'a FieldData,
        kind: ResidualKind,
    ) -> Result<Self> {
        let (soliton, conformal) = match (data, kind.is_soliton()) {
            (FieldData::Soliton(sd), true) => (Some(*sd), None),
            (FieldData::QuasiEinstein(cd), false) => (None, Some((cd.fields()?, cd.m))),
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "residual {kind} does not match the supplied field data"
                )))
            }
        };
        Ok(Self {
            potential,
            kind,
            soliton,
            conformal,
        })
    }

    pub fn eval(&self, x: Point) -> Result<f64> {
        match self.components(x)? {
            PointResidual::Scalar(v) => Ok(v),
            PointResidual::Tensor(r) => Ok(sym_norm(&r)),
        }
    }

    /// Scalar residual, or the full tensor for T2/T3.
    pub fn components(&self, x: Point) -> Result<PointResidual> {
        let md = self.potential.metric_data(x)?;
        let v = match self.kind {
            ResidualKind::T1 => {
                PointResidual::Scalar(t1_at(&md, self.soliton.as_ref().expect("checked")))
            }
            ResidualKind::T2 => {
                PointResidual::Tensor(t2_at(&md, self.soliton.as_ref().expect("checked")))
            }
            ResidualKind::T3 => {
                let (f, m) = self.conformal.as_ref().expect("checked");
                let (sig, phi) = (f.sigma(x)?, f.phi(x)?);
                PointResidual::Tensor(sym_add(
                    ricci_xx(&md),
                    qe_tensor_a(&md, &sig, &phi, *m),
                    -1.0,
                ))
            }
            ResidualKind::T4 => {
                let (f, m) = self.conformal.as_ref().expect("checked");
                PointResidual::Scalar(qe_trace(&md, &f.sigma(x)?, &f.phi(x)?, *m))
            }
        };
        let finite = match &v {
            PointResidual::Scalar(t) => t.is_finite(),
            PointResidual::Tensor(r) => r.iter().flatten().all(|t| t.is_finite()),
        };
        if finite {
            Ok(v)
        } else {
            Err(Error::NonFinite)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PointResidual {
    Scalar(f64),
    Tensor(Sym2),
}

/// Weighted residual vector and `𝓘 = Σ rᵢ²`.
///
/// Tensor residuals contribute `ω(R₁₁, √2 R₁₂, R₂₂)` per point rather than
/// `ω‖R‖`. The sum of squares is the same, but the components are smooth in
/// the coefficients where the norm has a kink at `R = 0`, which would
/// otherwise spoil the finite-difference Jacobian near convergence.
pub fn objective(
    s: &SymplecticPotential,
    data: &FieldData,
    spec: &ResidualSpec,
    scheme: &QuadratureScheme,
) -> Result<(Vec<f64>, f64)> {
    spec.validate()?;
    let expected = spec.region_polytope(s.polytope())?;
    if expected.facets() != scheme.region.facets() {
        return Err(Error::InvalidConfig(
            "quadrature region does not match the residual region".into(),
        ));
    }
    let ev = Evaluator::new(s, data, spec.kind)?;
    let per_point: Vec<PointResidual> = scheme
        .points
        .par_iter()
        .map(|p| ev.components(*p))
        .collect::<Result<_>>()?;
    let mut r = Vec::with_capacity(3 * per_point.len());
    for (v, w) in per_point.iter().zip(&scheme.weights) {
        let omega = match spec.weight_mode {
            WeightMode::SqrtWeight => w.sqrt(),
            WeightMode::PlainWeight => *w,
        };
        match v {
            PointResidual::Scalar(t) => r.push(omega * t),
            PointResidual::Tensor(m) => {
                r.push(omega * m[0][0]);
                r.push(omega * std::f64::consts::SQRT_2 * m[0][1]);
                r.push(omega * m[1][1]);
            }
        }
    }
    let total = r.iter().map(|v| v * v).sum();
    Ok((r, total))
}

/// Uniform `grid_n × grid_n` lattice on the bounding box of `p`, restricted
/// to `P_0.005`.
pub fn max_grid(p: &Polytope, grid_n: usize) -> Vec<Point> {
    let [x0, x1, y0, y1] = p.bounding_box();
    let n = grid_n.max(2);
    let mut pts = Vec::new();
    for i in 0..n {
        let a = x0 + (x1 - x0) * i as f64 / (n - 1) as f64;
        for j in 0..n {
            let b = y0 + (y1 - y0) * j as f64 / (n - 1) as f64;
            if p.contains([a, b], DEFAULT_DELTA) {
                pts.push([a, b]);
            }
        }
    }
    pts
}

pub fn max_abs_residual(
    s: &SymplecticPotential,
    data: &FieldData,
    kind: ResidualKind,
    grid_n: usize,
) -> Result<f64> {
    let ev = Evaluator::new(s, data, kind)?;
    let vals = max_grid(s.polytope(), grid_n)
        .par_iter()
        .map(|p| ev.eval(*p).map(f64::abs))
        .collect::<Result<Vec<f64>>>()?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

pub fn error_metrics(
    s: &SymplecticPotential,
    data: &FieldData,
    spec: &ResidualSpec,
    scheme: &QuadratureScheme,
    grid_n: usize,
) -> Result<ErrorMetrics> {
    let (_, total) = objective(s, data, spec, scheme)?;
    let vol = s.polytope().volume();
    let ev = Evaluator::new(s, data, spec.kind)?;
    let nodes = scheme
        .points
        .par_iter()
        .map(|p| ev.eval(*p).map(f64::abs))
        .collect::<Result<Vec<f64>>>()?;
    Ok(ErrorMetrics {
        normalized: total.sqrt() / vol,
        rms: (total / vol).sqrt(),
        max_abs: max_abs_residual(s, data, spec.kind, grid_n)?,
        max_nodes: nodes.into_iter().fold(0.0, f64::max),
        objective: total,
    })
}
