//! Polynomial bases for the smooth part `F` of a symplectic potential
//! `u = u_can + F`, and exact derivative jets of `u` through order four.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polytope::{Point, Polytope};

/// Bumped whenever generator enumeration order changes; recorded in files.
pub const ORDERING_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Symmetry {
    /// Invariant under the swap `x₁ ↔ x₂`.
    Z2,
    /// Functions of `t = x₁ + x₂` only.
    U2,
}

impl std::fmt::Display for Symmetry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Symmetry::Z2 => "z2",
            Symmetry::U2 => "u2",
        })
    }
}

/// One basis function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Generator {
    /// `x₁ᵃx₂ᵇ + x₁ᵇx₂ᵃ` (a single term when `a == b`), with `a ≥ b`.
    Symmetric { a: u32, b: u32 },
    /// `tᵏ`, `t = x₁ + x₂`.
    TPower { k: u32 },
}

impl Generator {
    pub fn total_degree(&self) -> u32 {
        match *self {
            Generator::Symmetric { a, b } => a + b,
            Generator::TPower { k } => k,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonomialBasis {
    degree: u32,
    min_degree: u32,
    symmetry: Symmetry,
    generators: Vec<Generator>,
}

impl MonomialBasis {
    /// Potential basis: total degrees `2..=degree`.
    pub fn new(degree: u32, symmetry: Symmetry) -> Result<Self> {
        if degree < 2 {
            return Err(Error::ParameterDomain(format!("basis degree {degree} < 2")));
        }
        Ok(Self::with_range(2, degree, symmetry))
    }

    /// ℤ₂ basis with total degrees `min_degree..=degree`. Used for the σ/φ
    /// perturbation polynomials, which start at degree one.
    pub fn z2_range(min_degree: u32, degree: u32) -> Result<Self> {
        if min_degree == 0 || min_degree > degree {
            return Err(Error::ParameterDomain(format!(
                "invalid degree range {min_degree}..={degree}"
            )));
        }
        Ok(Self::with_range(min_degree, degree, Symmetry::Z2))
    }

    fn with_range(min_degree: u32, degree: u32, symmetry: Symmetry) -> Self {
        let mut generators = Vec::new();
        for k in min_degree..=degree {
            match symmetry {
                Symmetry::Z2 => {
                    // most mixed first: b runs from ⌊k/2⌋ down to 0
                    for b in (0..=k / 2).rev() {
                        generators.push(Generator::Symmetric { a: k - b, b });
                    }
                }
                Symmetry::U2 => generators.push(Generator::TPower { k }),
            }
        }
        Self {
            degree,
            min_degree,
            symmetry,
            generators,
        }
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn min_degree(&self) -> u32 {
        self.min_degree
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    /// Expands `Σ cᵢ gᵢ` into a dense bivariate polynomial.
    pub fn expand(&self, coeffs: &[f64]) -> Result<Polynomial> {
        if coeffs.len() != self.len() {
            return Err(Error::BasisMismatch(format!(
                "{} coefficients for a basis of {} generators",
                coeffs.len(),
                self.len()
            )));
        }
        let mut poly = Polynomial::zero(self.degree);
        for (g, &c) in self.generators.iter().zip(coeffs) {
            if c == 0.0 {
                continue;
            }
            match *g {
                Generator::Symmetric { a, b } => {
                    poly.add(a, b, c);
                    if a != b {
                        poly.add(b, a, c);
                    }
                }
                Generator::TPower { k } => {
                    for j in 0..=k {
                        poly.add(k - j, j, c * binomial(k, j));
                    }
                }
            }
        }
        Ok(poly)
    }
}

/// Generator count of the ℤ₂ potential basis of degree `d`.
pub fn z2_count(d: u32) -> usize {
    (2..=d).map(|k| (k as usize + 2) / 2).sum()
}

pub fn binomial(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r.round()
}

/// Rewrites `F(t) = Σ κ_k t^k` (k = 2..=d) in the ℤ₂ basis of degree `d`.
pub fn embed_u2_in_z2(kappa: &[f64], d: u32) -> Result<Vec<f64>> {
    let z2 = MonomialBasis::new(d, Symmetry::Z2)?;
    if kappa.len() != d as usize - 1 {
        return Err(Error::BasisMismatch(format!(
            "{} U(2) coefficients for degree {d}",
            kappa.len()
        )));
    }
    Ok(z2
        .generators()
        .iter()
        .map(|g| match *g {
            Generator::Symmetric { a, b } => kappa[(a + b) as usize - 2] * binomial(a + b, b),
            Generator::TPower { .. } => unreachable!(),
        })
        .collect())
}

/// Least-squares inverse of [`embed_u2_in_z2`]: the `κ_k` whose embedding is
/// closest to the given ℤ₂ coefficients, and the Euclidean norm of what is
/// left over. The residual is zero exactly when the input depends on
/// `x₁ + x₂` alone.
pub fn project_z2_to_u2(coeffs: &[f64], d: u32) -> Result<(Vec<f64>, f64)> {
    let z2 = MonomialBasis::new(d, Symmetry::Z2)?;
    if coeffs.len() != z2.len() {
        return Err(Error::BasisMismatch(format!(
            "{} ℤ₂ coefficients for degree {d}",
            coeffs.len()
        )));
    }
    // Each generator feeds exactly one κ_k, so the normal equations are
    // diagonal.
    let mut num = vec![0.0; d as usize - 1];
    let mut den = vec![0.0; d as usize - 1];
    for (g, c) in z2.generators().iter().zip(coeffs) {
        if let Generator::Symmetric { a, b } = *g {
            let w = binomial(a + b, b);
            num[(a + b) as usize - 2] += w * c;
            den[(a + b) as usize - 2] += w * w;
        }
    }
    let kappa: Vec<f64> = num.iter().zip(&den).map(|(n, d)| n / d).collect();
    let fitted = embed_u2_in_z2(&kappa, d)?;
    let residual = fitted
        .iter()
        .zip(coeffs)
        .map(|(f, c)| (f - c) * (f - c))
        .sum::<f64>()
        .sqrt();
    Ok((kappa, residual))
}

/// Warm-start embedding of a degree-`from` vector into a degree-`to` basis
/// of the same symmetry: prefix copied, new generators zero.
pub fn embed_lower_degree(
    coeffs: &[f64],
    from: &MonomialBasis,
    to: &MonomialBasis,
) -> Result<Vec<f64>> {
    if from.symmetry != to.symmetry || from.min_degree != to.min_degree {
        return Err(Error::BasisMismatch(format!(
            "cannot embed {} basis into {} basis",
            from.symmetry, to.symmetry
        )));
    }
    if to.degree < from.degree {
        return Err(Error::BasisMismatch(format!(
            "target degree {} below source degree {}",
            to.degree, from.degree
        )));
    }
    if coeffs.len() != from.len() {
        return Err(Error::BasisMismatch("coefficient length".into()));
    }
    let mut out = vec![0.0; to.len()];
    out[..coeffs.len()].copy_from_slice(coeffs);
    Ok(out)
}

/// Dense polynomial `Σ c_{pq} x₁ᵖ x₂^q` with `p + q ≤ degree`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    degree: u32,
    /// (p, q, coefficient), nonzero entries only
    terms: Vec<(u32, u32, f64)>,
}

impl Polynomial {
    pub fn zero(degree: u32) -> Self {
        Self {
            degree,
            terms: Vec::new(),
        }
    }

    pub fn add(&mut self, p: u32, q: u32, c: f64) {
        debug_assert!(p + q <= self.degree);
        if let Some(t) = self.terms.iter_mut().find(|t| t.0 == p && t.1 == q) {
            t.2 += c;
        } else {
            self.terms.push((p, q, c));
        }
    }

    pub fn terms(&self) -> &[(u32, u32, f64)] {
        &self.terms
    }

    pub fn eval(&self, x: Point) -> f64 {
        self.terms
            .iter()
            .map(|&(p, q, c)| c * x[0].powi(p as i32) * x[1].powi(q as i32))
            .sum()
    }

    /// Exact partial derivatives through order four.
    pub fn jet(&self, x: Point) -> Jet4 {
        let n = self.degree as usize + 1;
        let mut p1 = vec![1.0; n];
        let mut p2 = vec![1.0; n];
        for k in 1..n {
            p1[k] = p1[k - 1] * x[0];
            p2[k] = p2[k - 1] * x[1];
        }
        let mut jet = Jet4::default();
        for &(p, q, c) in &self.terms {
            for order in 0..=4u32 {
                for j in 0..=order {
                    let i = order - j;
                    if i > p || j > q {
                        continue;
                    }
                    let f = falling(p, i) * falling(q, j);
                    jet.parts[Jet4::index(i as usize, j as usize)] +=
                        c * f * p1[(p - i) as usize] * p2[(q - j) as usize];
                }
            }
        }
        jet
    }

    pub fn jet2(&self, x: Point) -> crate::curvature::ScalarField2Jet {
        let j = self.jet(x);
        crate::curvature::ScalarField2Jet {
            value: j.value(),
            grad: j.grad(),
            hess: j.hess(),
        }
    }
}

fn falling(n: u32, k: u32) -> f64 {
    (0..k).map(|i| (n - i) as f64).product()
}

/// Derivatives of a function of `(x₁, x₂)` through order four. Each
/// symmetric tensor is stored once per multiset of indices, keyed by the
/// number of x₁ and x₂ derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet4 {
    parts: [f64; 15],
}

impl Jet4 {
    #[inline]
    fn index(n1: usize, n2: usize) -> usize {
        let order = n1 + n2;
        order * (order + 1) / 2 + n2
    }

    /// `∂₁^{n1} ∂₂^{n2}`, `n1 + n2 ≤ 4`.
    #[inline]
    pub fn partial(&self, n1: usize, n2: usize) -> f64 {
        self.parts[Self::index(n1, n2)]
    }

    #[inline]
    pub fn set_partial(&mut self, n1: usize, n2: usize, v: f64) {
        self.parts[Self::index(n1, n2)] = v;
    }

    pub fn value(&self) -> f64 {
        self.parts[0]
    }

    pub fn grad(&self) -> [f64; 2] {
        [self.partial(1, 0), self.partial(0, 1)]
    }

    pub fn hess(&self) -> [[f64; 2]; 2] {
        let h12 = self.partial(1, 1);
        [[self.partial(2, 0), h12], [h12, self.partial(0, 2)]]
    }

    /// Third derivative with coordinate indices in {0, 1}.
    #[inline]
    pub fn d3(&self, i: usize, j: usize, k: usize) -> f64 {
        let n2 = i + j + k;
        self.partial(3 - n2, n2)
    }

    #[inline]
    pub fn d4(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let n2 = i + j + k + l;
        self.partial(4 - n2, n2)
    }

    /// The jet of the same function after swapping `x₁ ↔ x₂`.
    pub fn swapped(&self) -> Jet4 {
        let mut out = Jet4::default();
        for order in 0..=4 {
            for n2 in 0..=order {
                out.set_partial(n2, order - n2, self.partial(order - n2, n2));
            }
        }
        out
    }
}

impl std::ops::Add for Jet4 {
    type Output = Jet4;
    fn add(mut self, rhs: Jet4) -> Jet4 {
        for (a, b) in self.parts.iter_mut().zip(rhs.parts) {
            *a += b;
        }
        self
    }
}

/// Exact jet of `u_can = ½ Σ l log l`.
pub fn canonical_jet(p: &Polytope, x: Point) -> Result<Jet4> {
    let mut jet = Jet4::default();
    for (r, l) in p.facets().iter().enumerate() {
        let v = l.eval(x);
        if !(v > 0.0) {
            return Err(Error::SingularEvaluation {
                x1: x[0],
                x2: x[1],
                facet: r,
                value: v,
            });
        }
        let log = v.ln();
        let radial = [
            0.5 * v * log,
            0.5 * (log + 1.0),
            0.5 / v,
            -0.5 / (v * v),
            1.0 / (v * v * v),
        ];
        let [n1, n2] = l.normal;
        for order in 0..=4usize {
            for j in 0..=order {
                let i = order - j;
                jet.parts[Jet4::index(i, j)] +=
                    radial[order] * n1.powi(i as i32) * n2.powi(j as i32);
            }
        }
    }
    Ok(jet)
}

/// `u = u_can + F` with `F` in a polynomial basis.
#[derive(Debug, Clone)]
pub struct SymplecticPotential {
    polytope: Polytope,
    basis: MonomialBasis,
    coeffs: Vec<f64>,
    poly: Polynomial,
}

impl SymplecticPotential {
    pub fn new(polytope: Polytope, basis: MonomialBasis, coeffs: Vec<f64>) -> Result<Self> {
        let poly = basis.expand(&coeffs)?;
        Ok(Self {
            polytope,
            basis,
            coeffs,
            poly,
        })
    }

    /// The canonical potential (`F = 0`) on the degree-2 ℤ₂ basis.
    pub fn canonical(polytope: Polytope) -> Self {
        let basis = MonomialBasis::new(2, Symmetry::Z2).expect("degree 2 is valid");
        Self::new(polytope, basis, vec![0.0; 2]).expect("length matches")
    }

    pub fn polytope(&self) -> &Polytope {
        &self.polytope
    }

    pub fn basis(&self) -> &MonomialBasis {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn smooth_part(&self) -> &Polynomial {
        &self.poly
    }

    /// Pointwise value of `u`.
    pub fn value(&self, x: Point) -> Result<f64> {
        let mut s = 0.0;
        for (r, l) in self.polytope.facets().iter().enumerate() {
            let v = l.eval(x);
            if !(v > 0.0) {
                return Err(Error::SingularEvaluation {
                    x1: x[0],
                    x2: x[1],
                    facet: r,
                    value: v,
                });
            }
            s += 0.5 * v * v.ln();
        }
        Ok(s + self.poly.eval(x))
    }

    pub fn jet(&self, x: Point) -> Result<Jet4> {
        Ok(canonical_jet(&self.polytope, x)? + self.poly.jet(x))
    }

    /// Metric data at `x`, with the canonical part kept facet by facet.
    pub fn metric_data(&self, x: Point) -> Result<crate::curvature::MetricData> {
        let mut facets = Vec::with_capacity(self.polytope.facets().len());
        for (r, l) in self.polytope.facets().iter().enumerate() {
            let v = l.eval(x);
            if !(v > 0.0) {
                return Err(Error::SingularEvaluation {
                    x1: x[0],
                    x2: x[1],
                    facet: r,
                    value: v,
                });
            }
            facets.push(crate::curvature::FacetTerm {
                normal: l.normal,
                value: v,
            });
        }
        crate::curvature::metric_data_split(&facets, &self.poly.jet(x))
    }
}

/// Free-function form of [`SymplecticPotential::jet`].
pub fn potential_jet(s: &SymplecticPotential, x: Point) -> Result<Jet4> {
    s.jet(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polytope::{make_pentagon, make_simplex, make_trapezium};

    #[test]
    fn z2_degree_four_ordering() {
        let b = MonomialBasis::new(4, Symmetry::Z2).unwrap();
        let pairs: Vec<(u32, u32)> = b
            .generators()
            .iter()
            .map(|g| match *g {
                Generator::Symmetric { a, b } => (a, b),
                _ => panic!(),
            })
            .collect();
        assert_eq!(
            pairs,
            vec![(1, 1), (2, 0), (2, 1), (3, 0), (2, 2), (3, 1), (4, 0)]
        );
    }

    #[test]
    fn generator_counts_match_tables() {
        let expected = [
            (2, 2),
            (3, 4),
            (4, 7),
            (5, 10),
            (6, 14),
            (7, 18),
            (8, 23),
            (9, 28),
            (10, 34),
            (15, 70),
        ];
        for (d, n) in expected {
            assert_eq!(MonomialBasis::new(d, Symmetry::Z2).unwrap().len(), n);
            assert_eq!(z2_count(d), n);
        }
        for d in 2..=15 {
            assert_eq!(
                MonomialBasis::new(d, Symmetry::U2).unwrap().len(),
                d as usize - 1
            );
            assert_eq!(
                z2_count(d),
                MonomialBasis::new(d, Symmetry::Z2).unwrap().len()
            );
        }
        assert!(MonomialBasis::new(1, Symmetry::Z2).is_err());
    }

    #[test]
    fn u2_embedding() {
        assert_eq!(embed_u2_in_z2(&[0.3], 2).unwrap(), vec![0.6, 0.3]);
        assert_eq!(
            embed_u2_in_z2(&[0.0, 0.5], 3).unwrap(),
            vec![0.0, 0.0, 1.5, 0.5]
        );
        assert!(embed_u2_in_z2(&[0.0; 8], 9)
            .unwrap()
            .iter()
            .all(|c| *c == 0.0));
    }

    #[test]
    fn lower_degree_embedding() {
        let b2 = MonomialBasis::new(2, Symmetry::Z2).unwrap();
        let b3 = MonomialBasis::new(3, Symmetry::Z2).unwrap();
        let u3 = MonomialBasis::new(3, Symmetry::U2).unwrap();
        assert_eq!(
            embed_lower_degree(&[1.0, 2.0], &b2, &b3).unwrap(),
            vec![1.0, 2.0, 0.0, 0.0]
        );
        assert_eq!(
            embed_lower_degree(&[1.0, 2.0], &b2, &b2).unwrap(),
            vec![1.0, 2.0]
        );
        assert!(embed_lower_degree(&[1.0, 2.0], &u3, &b3).is_err());
    }

    #[test]
    fn simplex_canonical_jet_at_origin() {
        let j = canonical_jet(&make_simplex(), [0.0, 0.0]).unwrap();
        assert_eq!(j.hess(), [[1.0, 0.5], [0.5, 1.0]]);
        assert_eq!(j.d4(0, 0, 0, 0), 2.0);
        // third: ν₃ = (−1,−1) only facet with both components; −½(ν₁³ + ... )
        assert_eq!(j.d3(0, 0, 0), -0.5 * (1.0 + (-1.0f64).powi(3)));
    }

    #[test]
    fn canonical_jet_rejects_boundary() {
        let p = make_trapezium(1.0).unwrap();
        assert!(matches!(
            canonical_jet(&p, [2.0, -1.0]),
            Err(Error::SingularEvaluation { .. })
        ));
        assert!(canonical_jet(&p, [5.0, 5.0]).is_err());
    }

    #[test]
    fn quadratic_term_adds_identity() {
        let p = make_pentagon(2.0).unwrap();
        let basis = MonomialBasis::new(2, Symmetry::Z2).unwrap();
        let s = SymplecticPotential::new(p.clone(), basis, vec![0.0, 0.7]).unwrap();
        let x = [0.1, -0.3];
        let a = canonical_jet(&p, x).unwrap().hess();
        let b = s.jet(x).unwrap().hess();
        assert!((b[0][0] - a[0][0] - 1.4).abs() < 1e-14);
        assert!((b[1][1] - a[1][1] - 1.4).abs() < 1e-14);
        assert!((b[0][1] - a[0][1]).abs() < 1e-14);
        let zero = SymplecticPotential::new(
            p.clone(),
            MonomialBasis::new(5, Symmetry::Z2).unwrap(),
            vec![0.0; 10],
        )
        .unwrap();
        assert_eq!(zero.jet(x).unwrap(), canonical_jet(&p, x).unwrap());
    }

    #[test]
    fn u2_evaluation_matches_power_series() {
        let kappa = [0.3, -0.2, 0.05, 0.01];
        let z2 = embed_u2_in_z2(&kappa, 5).unwrap();
        let poly = MonomialBasis::new(5, Symmetry::Z2)
            .unwrap()
            .expand(&z2)
            .unwrap();
        let direct = MonomialBasis::new(5, Symmetry::U2)
            .unwrap()
            .expand(&kappa)
            .unwrap();
        for x in [[0.2, -0.7], [1.3, 0.4], [-0.9, -0.95]] {
            let t: f64 = x[0] + x[1];
            let f: f64 = kappa
                .iter()
                .enumerate()
                .map(|(i, k)| k * t.powi(i as i32 + 2))
                .sum();
            assert!((poly.eval(x) - f).abs() < 1e-14);
            assert!((direct.eval(x) - f).abs() < 1e-14);
        }
    }

    #[test]
    fn projection_inverts_embedding() {
        let kappa = [0.3, -0.2, 0.05, 0.01];
        let z = embed_u2_in_z2(&kappa, 5).unwrap();
        let (back, res) = project_z2_to_u2(&z, 5).unwrap();
        assert!(res < 1e-15);
        for (a, b) in back.iter().zip(kappa) {
            assert!((a - b).abs() < 1e-15);
        }
        let mut off = z.clone();
        off[1] += 0.1;
        assert!(project_z2_to_u2(&off, 5).unwrap().1 > 1e-3);
    }
}
