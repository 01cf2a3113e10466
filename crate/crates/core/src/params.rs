//! Closed parameter systems: the soliton vector field, the Lü–Page–Pope
//! constants, the quasi-Einstein constraints on the two-point blow-up and
//! the exact Koiso–Cao reference profile.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polytope::{make_pentagon, Polytope};
use crate::quadrature::{gauss_legendre, scheme_for, scheme_pentagon};

/// Default 1-D order for constraint integrals.
pub const CONSTRAINT_ORDER: usize = 40;

fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let (mut flo, fhi) = (f(lo), f(hi));
    if !(flo * fhi <= 0.0) {
        return Err(Error::RootFinding(format!(
            "no sign change on [{lo}, {hi}]: f = {flo:e}, {fhi:e}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        if hi - lo < tol {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Secant polish of a bracketed root, falling back to the input if the
/// iteration wanders.
fn polish<F: Fn(f64) -> f64>(f: F, x0: f64, h: f64) -> f64 {
    let (mut a, mut b) = (x0 - h, x0);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..50 {
        if fb == fa {
            break;
        }
        let c = b - fb * (b - a) / (fb - fa);
        if !c.is_finite() || (c - x0).abs() > 100.0 * h {
            return x0;
        }
        a = b;
        fa = fb;
        b = c;
        fb = f(b);
        if (b - a).abs() < 1e-15 * b.abs().max(1.0) {
            break;
        }
    }
    b
}

/// Coefficient `s` of the soliton potential `φ = s·(x₁ + x₂)`.
///
/// `h(c) = ∫_P t e^{ct} dx` is strictly increasing in `c`; its root `c*`
/// gives `s = −c*`.
pub fn soliton_coefficient(p: &Polytope) -> Result<f64> {
    let scheme = scheme_for(p, CONSTRAINT_ORDER)?;
    let h = |c: f64| {
        scheme.integrate(|x| {
            let t = x[0] + x[1];
            t * (c * t).exp()
        })
    };
    let mut r = 1.0;
    while h(-r) * h(r) > 0.0 {
        r *= 2.0;
        if r > 1e3 {
            return Err(Error::RootFinding(
                "soliton coefficient not bracketed".into(),
            ));
        }
    }
    let root = bisect(h, -r, r, 1e-13)?;
    let root = polish(h, root, 1e-6);
    Ok(-root)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LppParams {
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub m: f64,
    /// Kim–Kim constant fixed by the facet condition at `t = 1`.
    pub mu: f64,
}

fn lpp_c_d(b: f64) -> (f64, f64) {
    let c = (b * b + 1.0).sqrt();
    (c, 1.0 / (2.0 * (2.0 * b - c)))
}

/// `μ` from `D/ξ − μ ξ/D = −2b` at `t = 1`, with `ξ = bt + c`, `D = dξ + 1`.
fn lpp_mu(b: f64, c: f64, d: f64) -> f64 {
    let xi = b + c;
    let big = d * xi + 1.0;
    (big / xi + 2.0 * b) * big / xi
}

/// `∫_P (e^{−φ} − μ e^{(2/m−1)φ}) e^{4σ} dx` on the trapezium with `a = 1`,
/// reduced to `t = x₁ + x₂ ∈ [−1, 1]` with cross-section length `2 + t`.
pub fn lpp_constraint(b: f64, m: f64, order: usize) -> f64 {
    let (c, d) = lpp_c_d(b);
    let mu = lpp_mu(b, c, d);
    let (nodes, weights) = gauss_legendre(order);
    nodes
        .iter()
        .zip(&weights)
        .map(|(t, w)| {
            let xi = b * t + c;
            let ratio = (d * xi + 1.0) / xi;
            w * (ratio.powf(m) - mu * ratio.powf(m - 2.0)) * (2.0 + t) / xi.powi(4)
        })
        .sum()
}

/// Lü–Page–Pope constants for the given `m`.
pub fn lpp_parameters(m: f64) -> Result<LppParams> {
    if !(m > 1.0) {
        return Err(Error::ParameterDomain(format!("m = {m} must exceed 1")));
    }
    let f = |b: f64| lpp_constraint(b, m, CONSTRAINT_ORDER);
    // Scan small positive b for the first sign change; at b = 0 the
    // conformal factor is constant.
    let mut lo = 1e-6;
    let mut found = None;
    let step = 0.005;
    let mut flo = f(lo);
    while lo < 0.4 {
        let hi = lo + step;
        let fhi = f(hi);
        if flo.is_finite() && fhi.is_finite() && flo * fhi <= 0.0 {
            found = Some((lo, hi));
            break;
        }
        lo = hi;
        flo = fhi;
    }
    let (lo, hi) = found.ok_or_else(|| Error::RootFinding(format!("no LPP root for m = {m}")))?;
    let b = polish(f, bisect(f, lo, hi, 1e-14)?, 1e-7);
    let (c, d) = lpp_c_d(b);
    Ok(LppParams {
        b,
        c,
        d,
        m,
        mu: lpp_mu(b, c, d),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Qe2Params {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub mu: f64,
    pub m: f64,
}

/// The three algebraic constraints at `t = −2`, `t = a − 2`, `t = a − 1`.
pub fn qe2_algebraic(a: f64, v: [f64; 4]) -> [f64; 3] {
    let [b, c, d, mu] = v;
    let xi = |t: f64| b * t + c;
    let big = |t: f64| d * (b * t + c) + 1.0;
    let (x0, d0) = (xi(-2.0), big(-2.0));
    let (x1, d1) = (xi(a - 2.0), big(a - 2.0));
    let (x2, d2) = (xi(a - 1.0), big(a - 1.0));
    [
        4.0 * b / (x0 * d0) - 1.0 / (x0 * x0) + mu / (d0 * d0),
        1.0 / (x1 * x1) - mu / (d1 * d1),
        -2.0 * b / (x2 * d2) - 1.0 / (x2 * x2) + mu / (d2 * d2),
    ]
}

/// `∫_P (e^{−φ} − μ e^{(2/m−1)φ}) e^{4σ} dx` over the pentagon.
pub fn qe2_integral(m: f64, a: f64, v: [f64; 4], order: usize) -> Result<f64> {
    let [b, c, d, mu] = v;
    let p = make_pentagon(a)?;
    let scheme = scheme_pentagon(&p, order)?;
    let bad = std::cell::Cell::new(None);
    let val = scheme.integrate(|x| {
        let xi = b * (x[0] + x[1]) + c;
        let big = d * xi + 1.0;
        if !(xi > 0.0 && big > 0.0) {
            bad.set(Some(xi.min(big)));
        }
        let ratio = big / xi;
        (ratio.powf(m) - mu * ratio.powf(m - 2.0)) / xi.powi(4)
    });
    match bad.get() {
        Some(v) => Err(Error::NonPositiveLog(v)),
        None => Ok(val),
    }
}

fn qe2_system(m: f64, a: f64, v: [f64; 4], order: usize) -> Result<[f64; 4]> {
    let [e1, e2, e3] = qe2_algebraic(a, v);
    let e4 = qe2_integral(m, a, v, order)?;
    let out = [e1, e2, e3, e4];
    if out.iter().all(|x| x.is_finite()) {
        Ok(out)
    } else {
        Err(Error::NonFinite)
    }
}

fn newton4(m: f64, a: f64, start: [f64; 4], order: usize) -> Result<[f64; 4]> {
    let mut v = start;
    let mut f = qe2_system(m, a, v, order)?;
    for _ in 0..100 {
        let norm = f.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-13 {
            return Ok(v);
        }
        let mut jac = DMatrix::zeros(4, 4);
        for j in 0..4 {
            let h = 1e-7 * v[j].abs().max(1e-3);
            let mut vp = v;
            let mut vm = v;
            vp[j] += h;
            vm[j] -= h;
            let fp = qe2_system(m, a, vp, order)?;
            let fm = qe2_system(m, a, vm, order)?;
            for i in 0..4 {
                jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        let rhs = DVector::from_column_slice(&f);
        let step = jac
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::RootFinding("singular Newton matrix".into()))?;
        // backtracking on the residual norm
        let mut lambda = 1.0;
        loop {
            let mut trial = v;
            for j in 0..4 {
                trial[j] -= lambda * step[j];
            }
            if let Ok(ft) = qe2_system(m, a, trial, order) {
                let nt = ft.iter().map(|x| x * x).sum::<f64>().sqrt();
                if nt < norm || lambda < 1e-6 {
                    v = trial;
                    f = ft;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-10 {
                return Err(Error::RootFinding("Newton line search failed".into()));
            }
        }
    }
    let norm = f.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm < 1e-10 {
        Ok(v)
    } else {
        Err(Error::RootFinding(format!(
            "Newton stalled at residual {norm:e}"
        )))
    }
}

/// Start built from `b` alone: `c = √(1+b²)` and `d`, `μ` from the facet
/// equations, which is how the Lü–Page–Pope family is parametrised.
fn qe2_seed(a: f64, b: f64) -> [f64; 4] {
    let c = (1.0 + b * b).sqrt();
    let d = 1.0 / (2.0 * (2.0 * b - c));
    let x1 = b * (a - 2.0) + c;
    let d1 = d * x1 + 1.0;
    [b, c, d, d1 * d1 / (x1 * x1)]
}

/// Solves the four quasi-Einstein constraints for `(b, c, d, μ)`.
pub fn qe2_parameters(m: f64, a: f64, order: usize) -> Result<Qe2Params> {
    if !(m > 1.0) {
        return Err(Error::ParameterDomain(format!("m = {m} must exceed 1")));
    }
    if !(a > 1.0) {
        return Err(Error::ParameterDomain(format!("a = {a} must exceed 1")));
    }
    let mut starts = vec![[-0.0744, 1.0048, -0.4636, 0.2827]];
    for i in 1..=40 {
        let b = -0.01 * i as f64;
        starts.push(qe2_seed(a, b));
        starts.push(qe2_seed(a, -b));
    }
    let mut last = None;
    for s in starts {
        match newton4(m, a, s, order) {
            Ok([b, c, d, mu]) if c > 0.0 => {
                return Ok(Qe2Params { a, b, c, d, mu, m });
            }
            Ok(_) => {}
            Err(e) => last = Some(e),
        }
    }
    Err(last.unwrap_or_else(|| Error::RootFinding("no admissible QE solution".into())))
}

/// Koiso–Cao vector-field coefficient and integration constant.
pub const KC_C: f64 = 0.527620;
pub const KC_D: f64 = -6.91561;

/// Exact `F″(t)` of the Koiso–Cao soliton.
pub fn kc_reference_fpp(t: f64) -> Result<f64> {
    if !(t > -1.0 && t < 1.0) {
        return Err(Error::ParameterDomain(format!("t = {t} outside (-1, 1)")));
    }
    let c = KC_C;
    let d = KC_D;
    let den =
        c.powi(3) * d * (c * (2.0 + t)).exp() + c * c * t * (2.0 + t) + 2.0 * c * (1.0 + t) + 2.0;
    let first = 0.5 * c.powi(3) * (2.0 + t) / den;
    let second = 0.5 * (t * t - 2.0 * t - 5.0) / ((1.0 - t * t) * (t + 2.0));
    Ok(first + second)
}

fn central_derivative<F: Fn(f64) -> f64>(f: &F, order: usize, h: f64) -> f64 {
    match order {
        0 => f(0.0),
        1 => (f(h) - f(-h)) / (2.0 * h),
        2 => (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h),
        3 => (f(2.0 * h) - 2.0 * f(h) + 2.0 * f(-h) - f(-2.0 * h)) / (2.0 * h.powi(3)),
        4 => (f(2.0 * h) - 4.0 * f(h) + 6.0 * f(0.0) - 4.0 * f(-h) + f(-2.0 * h)) / h.powi(4),
        _ => panic!("derivative order {order} not supported"),
    }
}

/// First `k` Taylor coefficients `κ₂, κ₃, …` of the Koiso–Cao `F(t)`.
///
/// `κ_{j+2} = F″⁽ʲ⁾(0) / (j+2)!`, derivatives by Richardson-extrapolated
/// central differences with steps `1e−2` and `5e−3`.
pub fn kc_taylor(k: usize) -> Result<Vec<f64>> {
    if k > 5 {
        return Err(Error::ParameterDomain(format!(
            "at most 5 Taylor coefficients, got {k}"
        )));
    }
    let f = |t: f64| kc_reference_fpp(t).expect("inside (-1, 1)");
    Ok((0..k)
        .map(|j| {
            let d1 = central_derivative(&f, j, 1e-2);
            let d2 = central_derivative(&f, j, 5e-3);
            let d = if j == 0 { d1 } else { (4.0 * d2 - d1) / 3.0 };
            d / (1..=j + 2).product::<usize>() as f64
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polytope::{make_trapezium, AffineFunctional, PolytopeKind};

    #[test]
    fn soliton_coefficients_match_published_values() {
        let kc = soliton_coefficient(&make_trapezium(1.0).unwrap()).unwrap();
        assert!((kc - 0.527620).abs() < 1e-5, "{kc}");
        let wz = soliton_coefficient(&make_pentagon(2.0).unwrap()).unwrap();
        assert!((wz + 0.434748).abs() < 1e-5, "{wz}");
    }

    #[test]
    fn centrally_symmetric_polygon_has_no_soliton_field() {
        let square = Polytope::from_facets(
            PolytopeKind::Custom,
            0.0,
            vec![
                AffineFunctional::new([1.0, 0.0], 1.0).unwrap(),
                AffineFunctional::new([0.0, 1.0], 1.0).unwrap(),
                AffineFunctional::new([-1.0, 0.0], 1.0).unwrap(),
                AffineFunctional::new([0.0, -1.0], 1.0).unwrap(),
            ],
        )
        .unwrap();
        assert!(soliton_coefficient(&square).unwrap().abs() < 1e-12);
    }

    #[test]
    fn lpp_relations_hold() {
        let p = lpp_parameters(2.0).unwrap();
        assert!((p.c * p.c - p.b * p.b - 1.0).abs() < 1e-12);
        assert!((p.d - 1.0 / (2.0 * (2.0 * p.b - p.c))).abs() < 1e-12);
        assert!(lpp_constraint(p.b, 2.0, 80).abs() < 1e-10);
        assert!(lpp_parameters(1.0).is_err());
    }

    #[test]
    fn qe2_algebraic_constraints_vanish() {
        let q = qe2_parameters(2.0, 2.0, CONSTRAINT_ORDER).unwrap();
        for r in qe2_algebraic(2.0, [q.b, q.c, q.d, q.mu]) {
            assert!(r.abs() < 1e-10);
        }
    }

    #[test]
    fn kc_reference_is_smooth_at_zero() {
        let l = kc_reference_fpp(-1e-9).unwrap();
        let r = kc_reference_fpp(1e-9).unwrap();
        assert!((l - r).abs() < 1e-8);
        let k = kc_taylor(1).unwrap();
        assert!((k[0] - kc_reference_fpp(0.0).unwrap() / 2.0).abs() < 1e-15);
        assert!(kc_reference_fpp(1.0).is_err());
    }

    #[test]
    fn kc_taylor_matches_published_coefficients() {
        let table = [-0.0900384, 0.0159081, -4.25806e-3, 1.34121e-3];
        for (k, t) in kc_taylor(4).unwrap().iter().zip(table) {
            assert!((k - t).abs() < 1e-5, "{k} vs {t}");
        }
    }
}
