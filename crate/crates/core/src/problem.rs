//! Least-squares problems assembled from a manifold, a basis symmetry and a
//! residual, in the form consumed by the degree continuation.

use serde::{Deserialize, Serialize};

use crate::basis::{MonomialBasis, Symmetry, SymplecticPotential};
use crate::error::{Error, Result};
use crate::lm::{DegreeProblem, ParameterPack};
use crate::polytope::{make_pentagon, make_simplex, make_trapezium, Polytope};
use crate::quadrature::{scheme_for, QuadratureScheme};
use crate::residual::{
    error_metrics, objective, ConformalData, ErrorMetrics, FieldData, Region, ResidualKind,
    ResidualSpec, SolitonData, WeightMode, DEFAULT_DELTA,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Manifold {
    /// One-point blow-up of CP², trapezium polytope.
    Cp2Blowup1,
    /// Two-point blow-up of CP², pentagon polytope.
    Cp2Blowup2,
    /// CP² itself.
    Simplex,
}

impl Manifold {
    /// Class parameter of the first Chern class.
    pub fn canonical_class(self) -> f64 {
        match self {
            Manifold::Cp2Blowup1 => 1.0,
            Manifold::Cp2Blowup2 => 2.0,
            Manifold::Simplex => 1.0,
        }
    }

    pub fn polytope(self, a: f64) -> Result<Polytope> {
        match self {
            Manifold::Cp2Blowup1 => make_trapezium(a),
            Manifold::Cp2Blowup2 => make_pentagon(a),
            Manifold::Simplex => Ok(make_simplex()),
        }
    }
}

impl std::fmt::Display for Manifold {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Manifold::Cp2Blowup1 => "cp2-blowup1",
            Manifold::Cp2Blowup2 => "cp2-blowup2",
            Manifold::Simplex => "simplex",
        })
    }
}

/// Quasi-Einstein constants that are never optimised.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QeConstants {
    pub m: f64,
    pub mu: f64,
    pub eps_degree: u32,
}

/// Residual minimisation on one manifold; degree varies, everything else
/// is fixed at construction.
#[derive(Debug, Clone)]
pub struct SearchProblem {
    pub manifold: Manifold,
    pub symmetry: Symmetry,
    pub kind: ResidualKind,
    pub weight_mode: WeightMode,
    pub order: usize,
    /// `None` for soliton problems.
    pub qe: Option<QeConstants>,
    /// Shrinking distance for the tensor residuals.
    pub delta: f64,
    free_class: bool,
    cached: Option<(f64, Polytope, QuadratureScheme)>,
}

impl SearchProblem {
    pub fn new(
        manifold: Manifold,
        symmetry: Symmetry,
        kind: ResidualKind,
        weight_mode: WeightMode,
        order: usize,
        qe: Option<QeConstants>,
        seed: &ParameterPack,
    ) -> Result<Self> {
        if kind.is_soliton() == qe.is_some() {
            return Err(Error::InvalidConfig(format!(
                "residual {kind} does not match the equation"
            )));
        }
        if symmetry == Symmetry::U2 && manifold == Manifold::Cp2Blowup2 {
            return Err(Error::InvalidConfig(
                "U(2) symmetry is not available on the two-point blow-up".into(),
            ));
        }
        let mut p = Self {
            manifold,
            symmetry,
            kind,
            weight_mode,
            order,
            qe,
            delta: DEFAULT_DELTA,
            free_class: seed.mask.class_param,
            cached: None,
        };
        p.rebuild_cache(seed.class_param)?;
        Ok(p)
    }

    /// Replaces the tensor shrinking distance.
    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "delta = {delta} must be positive"
            )));
        }
        self.delta = delta;
        if let Some((a, _, _)) = self.cached.take() {
            self.rebuild_cache(a)?;
        }
        Ok(self)
    }

    fn rebuild_cache(&mut self, a: f64) -> Result<()> {
        if !self.free_class {
            let poly = self.manifold.polytope(a)?;
            let scheme = scheme_for(&self.spec(self.kind).region_polytope(&poly)?, self.order)?;
            self.cached = Some((a, poly, scheme));
        }
        Ok(())
    }

    pub fn spec(&self, kind: ResidualKind) -> ResidualSpec {
        let mut spec = ResidualSpec::standard(kind, self.weight_mode);
        if kind.is_tensor() {
            spec.region = Region::Shrunken(self.delta);
        }
        spec
    }

    pub fn field_data(&self, pack: &ParameterPack) -> Result<FieldData> {
        match self.qe {
            None => Ok(FieldData::Soliton(SolitonData {
                coeff: pack.soliton,
            })),
            Some(q) => {
                let mut cd = ConformalData::new(pack.b, pack.c, pack.d, q.m, q.mu)?;
                if q.eps_degree > 0 {
                    cd = cd.with_eps_degree(q.eps_degree)?;
                    if pack.eps1.len() == cd.eps1.len() && pack.eps2.len() == cd.eps2.len() {
                        cd.eps1.clone_from(&pack.eps1);
                        cd.eps2.clone_from(&pack.eps2);
                    } else if !(pack.eps1.is_empty() && pack.eps2.is_empty()) {
                        return Err(Error::BasisMismatch("perturbation length".into()));
                    }
                }
                Ok(FieldData::QuasiEinstein(cd))
            }
        }
    }

    pub fn potential(&self, pack: &ParameterPack) -> Result<SymplecticPotential> {
        let poly = match &self.cached {
            Some((a, p, _)) if *a == pack.class_param => p.clone(),
            _ => self.manifold.polytope(pack.class_param)?,
        };
        SymplecticPotential::new(poly, self.basis(pack.degree)?, pack.coeffs.clone())
    }

    fn scheme_for_kind(
        &self,
        pack: &ParameterPack,
        kind: ResidualKind,
    ) -> Result<QuadratureScheme> {
        if kind == self.kind {
            if let Some((a, _, s)) = &self.cached {
                if *a == pack.class_param {
                    return Ok(s.clone());
                }
            }
        }
        let poly = self.manifold.polytope(pack.class_param)?;
        scheme_for(&self.spec(kind).region_polytope(&poly)?, self.order)
    }

    /// Residual vector for an arbitrary kind compatible with the equation.
    pub fn residual_vector(
        &self,
        pack: &ParameterPack,
        kind: ResidualKind,
    ) -> Result<(Vec<f64>, f64)> {
        let s = self.potential(pack)?;
        let data = self.field_data(pack)?;
        match (&self.cached, kind == self.kind) {
            (Some((a, _, scheme)), true) if *a == pack.class_param => {
                objective(&s, &data, &self.spec(kind), scheme)
            }
            _ => objective(
                &s,
                &data,
                &self.spec(kind),
                &self.scheme_for_kind(pack, kind)?,
            ),
        }
    }

    /// Scalar and tensor metrics: `(T1, T2)` for solitons, `(T4, T3)` for
    /// quasi-Einstein problems.
    pub fn metrics(
        &self,
        pack: &ParameterPack,
        grid_n: usize,
    ) -> Result<(ErrorMetrics, ErrorMetrics)> {
        let (scalar, tensor) = if self.qe.is_none() {
            (ResidualKind::T1, ResidualKind::T2)
        } else {
            (ResidualKind::T4, ResidualKind::T3)
        };
        let s = self.potential(pack)?;
        let data = self.field_data(pack)?;
        let m1 = error_metrics(
            &s,
            &data,
            &self.spec(scalar),
            &self.scheme_for_kind(pack, scalar)?,
            grid_n,
        )?;
        let m2 = error_metrics(
            &s,
            &data,
            &self.spec(tensor),
            &self.scheme_for_kind(pack, tensor)?,
            grid_n,
        )?;
        Ok((m1, m2))
    }
}

impl DegreeProblem for SearchProblem {
    fn basis(&self, degree: u32) -> Result<MonomialBasis> {
        MonomialBasis::new(degree, self.symmetry)
    }

    fn residuals(&self, pack: &ParameterPack) -> Result<Vec<f64>> {
        Ok(self.residual_vector(pack, self.kind)?.0)
    }
}
