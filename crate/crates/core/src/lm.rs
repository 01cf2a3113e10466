//! Levenberg–Marquardt minimisation of `Σ rᵢ(c)²` with forward-difference
//! Jacobians, plus warm-started continuation over polynomial degree.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{embed_lower_degree, MonomialBasis};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LMConfig {
    /// Residual evaluations, Jacobian columns included.
    pub max_evals: usize,
    /// Bound on the change of the residual norm `‖r‖` in an accepted step.
    pub tol_residual_change: f64,
    pub tol_step_norm: f64,
    pub damping_init: f64,
    pub damping_up: f64,
    pub damping_down: f64,
    pub fd_step: f64,
}

impl Default for LMConfig {
    fn default() -> Self {
        Self {
            max_evals: 4000,
            tol_residual_change: 5e-12,
            tol_step_norm: 5e-12,
            damping_init: 1e-3,
            damping_up: 10.0,
            damping_down: 0.1,
            fd_step: 1e-7,
        }
    }
}

impl LMConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.max_evals > 0
            && self.tol_residual_change > 0.0
            && self.tol_step_norm > 0.0
            && self.damping_init > 0.0
            && self.damping_up > 1.0
            && self.damping_down > 0.0
            && self.damping_down < 1.0
            && self.fd_step > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "invalid LM configuration {self:?}"
            )))
        }
    }
}

/// Largest damping before the search is declared stalled.
const DAMPING_CEILING: f64 = 1e32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    /// Evaluation budget exhausted.
    MaxEvaluations,
    /// `|Δ‖r‖|` of an accepted step fell below `tol_residual_change`.
    ResidualChange,
    /// `‖Δc‖` of the proposed step fell below `tol_step_norm`.
    StepNorm,
    /// Damping grew past any useful size without finding a descent step.
    Stalled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LMReport {
    pub params: Vec<f64>,
    /// Objective at the start and after every accepted step.
    pub history: Vec<f64>,
    pub evaluations: usize,
    pub iterations: usize,
    pub termination: TerminationReason,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl LMReport {
    pub fn final_objective(&self) -> f64 {
        *self
            .history
            .last()
            .expect("history starts with the initial value")
    }
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn finite(r: &[f64]) -> bool {
    r.iter().all(|v| v.is_finite())
}

/// Forward-difference Jacobian; column `j` uses step `fd_step·max(1, |x_j|)`.
/// A column whose forward point is infeasible falls back to a backward
/// difference.
pub fn jacobian_fd<F>(f: &F, x: &[f64], r0: &[f64], fd_step: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    if !(fd_step > 0.0) {
        return Err(Error::InvalidConfig(
            "finite-difference step must be positive".into(),
        ));
    }
    let cols: Vec<Vec<f64>> = (0..x.len())
        .into_par_iter()
        .map(|j| {
            let h = fd_step * x[j].abs().max(1.0);
            let mut xp = x.to_vec();
            xp[j] += h;
            let step = xp[j] - x[j];
            match f(&xp) {
                Ok(rp) if finite(&rp) => {
                    Ok(rp.iter().zip(r0).map(|(a, b)| (a - b) / step).collect())
                }
                _ => {
                    let mut xm = x.to_vec();
                    xm[j] -= h;
                    let step = x[j] - xm[j];
                    let rm = f(&xm)?;
                    if !finite(&rm) {
                        return Err(Error::NonFinite);
                    }
                    Ok(r0.iter().zip(&rm).map(|(a, b)| (a - b) / step).collect())
                }
            }
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_fn(r0.len(), x.len(), |i, j| cols[j][i]))
}

/// Minimises `Σ f(x)ᵢ²` from `x0`.
///
/// Infeasible trial points (any `Err` from `f`) are treated as rejected
/// steps. The start itself must be feasible.
pub fn lm_minimize<F>(f: F, x0: &[f64], cfg: &LMConfig) -> Result<LMReport>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    cfg.validate()?;
    let started = Instant::now();
    let mut x = x0.to_vec();
    let mut r = f(&x).map_err(|e| Error::InfeasibleStart(e.to_string()))?;
    if !finite(&r) {
        return Err(Error::InfeasibleStart("non-finite residual".into()));
    }
    let n = x.len();
    let mut cost = sum_sq(&r);
    let mut history = vec![cost];
    let mut evals = 1usize;
    let mut iterations = 0usize;
    let mut lambda = cfg.damping_init;

    let termination = 'outer: loop {
        if n == 0 {
            break TerminationReason::StepNorm;
        }
        if evals + n > cfg.max_evals {
            break TerminationReason::MaxEvaluations;
        }
        let jac = match jacobian_fd(&f, &x, &r, cfg.fd_step) {
            Ok(j) => j,
            Err(_) => break TerminationReason::Stalled,
        };
        evals += n;
        iterations += 1;
        let jt = jac.transpose();
        let a = &jt * &jac;
        let g = &jt * DVector::from_column_slice(&r);
        let max_diag = (0..n).map(|i| a[(i, i)]).fold(0.0, f64::max);
        let floor = (max_diag * 1e-15).max(f64::MIN_POSITIVE);

        loop {
            if evals >= cfg.max_evals {
                break 'outer TerminationReason::MaxEvaluations;
            }
            if lambda > DAMPING_CEILING {
                break 'outer TerminationReason::Stalled;
            }
            let mut damped = a.clone();
            for i in 0..n {
                damped[(i, i)] += lambda * a[(i, i)].max(floor);
            }
            let Some(chol) = damped.cholesky() else {
                lambda *= cfg.damping_up;
                continue;
            };
            let step = -chol.solve(&g);
            let step_norm = step.norm();
            if !step_norm.is_finite() {
                lambda *= cfg.damping_up;
                continue;
            }
            if step_norm < cfg.tol_step_norm {
                break 'outer TerminationReason::StepNorm;
            }
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            evals += 1;
            match f(&trial) {
                Ok(rt) if finite(&rt) && sum_sq(&rt) < cost => {
                    let new_cost = sum_sq(&rt);
                    let change = cost.sqrt() - new_cost.sqrt();
                    x = trial;
                    r = rt;
                    cost = new_cost;
                    history.push(cost);
                    lambda = (lambda * cfg.damping_down).max(1e-20);
                    if change < cfg.tol_residual_change {
                        break 'outer TerminationReason::ResidualChange;
                    }
                    break;
                }
                _ => lambda *= cfg.damping_up,
            }
        }
    };
    log::debug!("LM finished: {termination:?} after {evals} evaluations, objective {cost:e}");
    Ok(LMReport {
        params: x,
        history,
        evaluations: evals,
        iterations,
        termination,
        wall_time: started.elapsed(),
    })
}

/// Which auxiliary scalars are optimised alongside the potential.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FreeMask {
    pub class_param: bool,
    pub conformal: bool,
    pub soliton: bool,
    pub eps: bool,
}

/// Every quantity a search may vary, with the mask selecting the free ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterPack {
    /// Degree of the basis the coefficients refer to.
    pub degree: u32,
    pub coeffs: Vec<f64>,
    pub class_param: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub soliton: f64,
    pub eps1: Vec<f64>,
    pub eps2: Vec<f64>,
    pub mask: FreeMask,
}

impl ParameterPack {
    pub fn new(degree: u32, coeffs: Vec<f64>, class_param: f64) -> Self {
        Self {
            degree,
            coeffs,
            class_param,
            b: 0.0,
            c: 1.0,
            d: 0.0,
            soliton: 0.0,
            eps1: Vec::new(),
            eps2: Vec::new(),
            mask: FreeMask::default(),
        }
    }

    pub fn free_len(&self) -> usize {
        self.coeffs.len()
            + usize::from(self.mask.class_param)
            + 3 * usize::from(self.mask.conformal)
            + usize::from(self.mask.soliton)
            + if self.mask.eps {
                self.eps1.len() + self.eps2.len()
            } else {
                0
            }
    }

    /// Free entries in a fixed order: coefficients, a, (b, c, d), soliton,
    /// ε₁, ε₂.
    pub fn to_free_vec(&self) -> Vec<f64> {
        let mut v = self.coeffs.clone();
        if self.mask.class_param {
            v.push(self.class_param);
        }
        if self.mask.conformal {
            v.extend([self.b, self.c, self.d]);
        }
        if self.mask.soliton {
            v.push(self.soliton);
        }
        if self.mask.eps {
            v.extend(&self.eps1);
            v.extend(&self.eps2);
        }
        v
    }

    pub fn with_free_vec(&self, v: &[f64]) -> Result<Self> {
        if v.len() != self.free_len() {
            return Err(Error::InvalidConfig(format!(
                "free vector of length {} for a pack with {} free entries",
                v.len(),
                self.free_len()
            )));
        }
        let mut out = self.clone();
        let mut it = v.iter().copied();
        for c in out.coeffs.iter_mut() {
            *c = it.next().expect("length checked");
        }
        if out.mask.class_param {
            out.class_param = it.next().expect("length checked");
        }
        if out.mask.conformal {
            out.b = it.next().expect("length checked");
            out.c = it.next().expect("length checked");
            out.d = it.next().expect("length checked");
        }
        if out.mask.soliton {
            out.soliton = it.next().expect("length checked");
        }
        if out.mask.eps {
            for e in out.eps1.iter_mut().chain(out.eps2.iter_mut()) {
                *e = it.next().expect("length checked");
            }
        }
        Ok(out)
    }
}

/// A family of least-squares problems indexed by polynomial degree.
pub trait DegreeProblem: Sync {
    fn basis(&self, degree: u32) -> Result<MonomialBasis>;
    fn residuals(&self, pack: &ParameterPack) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone)]
pub struct DegreeOutcome {
    pub degree: u32,
    pub pack: ParameterPack,
    /// `None` when the solver could not start at this degree.
    pub report: Option<LMReport>,
    pub error: Option<String>,
}

/// Runs one LM search on the free entries of `start`.
pub fn minimize_pack<P: DegreeProblem>(
    problem: &P,
    start: &ParameterPack,
    cfg: &LMConfig,
) -> Result<(ParameterPack, LMReport)> {
    let f = |v: &[f64]| problem.residuals(&start.with_free_vec(v)?);
    let report = lm_minimize(f, &start.to_free_vec(), cfg)?;
    let pack = start.with_free_vec(&report.params)?;
    Ok((pack, report))
}

/// Solves at each degree in turn, warm-starting from the previous degree.
/// `seed` supplies the auxiliary scalars and, if non-empty, coefficients
/// at `seed.degree`; empty coefficients mean `F = 0`.
pub fn continuation<P: DegreeProblem>(
    problem: &P,
    degrees: &[u32],
    seed: &ParameterPack,
    cfg: &LMConfig,
    mut on_degree: impl FnMut(&DegreeOutcome),
) -> Result<Vec<DegreeOutcome>> {
    if degrees.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig(
            "degrees must be strictly ascending".into(),
        ));
    }
    let mut current = seed.clone();
    let mut out = Vec::with_capacity(degrees.len());
    for &degree in degrees {
        let to = problem.basis(degree)?;
        let coeffs = if current.coeffs.is_empty() {
            vec![0.0; to.len()]
        } else {
            let from = problem.basis(current.degree)?;
            embed_lower_degree(&current.coeffs, &from, &to)?
        };
        let start = ParameterPack {
            degree,
            coeffs,
            ..current.clone()
        };
        let outcome = match minimize_pack(problem, &start, cfg) {
            Ok((pack, report)) => DegreeOutcome {
                degree,
                pack,
                report: Some(report),
                error: None,
            },
            Err(e) => {
                log::warn!("degree {degree}: {e}");
                DegreeOutcome {
                    degree,
                    pack: start,
                    report: None,
                    error: Some(e.to_string()),
                }
            }
        };
        current = outcome.pack.clone();
        on_degree(&outcome);
        out.push(outcome);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_problem_solves_in_one_step() {
        // r(c) = A c − y
        let f = |c: &[f64]| -> Result<Vec<f64>> {
            Ok(vec![
                c[0] + 2.0 * c[1] - 3.0,
                -c[0] + c[1] - 0.5,
                3.0 * c[0] - c[1] + 1.0,
            ])
        };
        let rep = lm_minimize(f, &[0.0, 0.0], &LMConfig::default()).unwrap();
        // the least-squares solution of the 3x2 system
        let jt_j = [[11.0, -2.0], [-2.0, 6.0]];
        let jt_y = [3.0 - 0.5 - 3.0, 6.0 + 0.5 + 1.0];
        let det = jt_j[0][0] * jt_j[1][1] - jt_j[0][1] * jt_j[1][0];
        let sol = [
            (jt_j[1][1] * jt_y[0] - jt_j[0][1] * jt_y[1]) / det,
            (-jt_j[1][0] * jt_y[0] + jt_j[0][0] * jt_y[1]) / det,
        ];
        assert!((rep.params[0] - sol[0]).abs() < 1e-6);
        assert!((rep.params[1] - sol[1]).abs() < 1e-6);
    }

    #[test]
    fn rosenbrock() {
        let f =
            |c: &[f64]| -> Result<Vec<f64>> { Ok(vec![10.0 * (c[1] - c[0] * c[0]), 1.0 - c[0]]) };
        let rep = lm_minimize(f, &[-1.2, 1.0], &LMConfig::default()).unwrap();
        assert!(rep.evaluations <= 4000);
        assert!((rep.params[0] - 1.0).abs() < 1e-6, "{:?}", rep.params);
        assert!((rep.params[1] - 1.0).abs() < 1e-6);
        assert!(rep.final_objective() < 1e-12);
        assert!(rep.history.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn infeasible_start_is_an_error() {
        let f = |_: &[f64]| -> Result<Vec<f64>> { Err(Error::NonFinite) };
        assert!(matches!(
            lm_minimize(f, &[0.0], &LMConfig::default()),
            Err(Error::InfeasibleStart(_))
        ));
    }

    #[test]
    fn infeasible_steps_are_rejected_not_fatal() {
        // minimum at c = 2 but c > 1.5 is infeasible
        let f = |c: &[f64]| -> Result<Vec<f64>> {
            if c[0] > 1.5 {
                Err(Error::NonFinite)
            } else {
                Ok(vec![c[0] - 2.0])
            }
        };
        let rep = lm_minimize(f, &[0.0], &LMConfig::default()).unwrap();
        assert!(rep.params[0] <= 1.5 && rep.params[0] > 1.4);
        assert!(rep.history.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn evaluation_budget_is_respected() {
        let f =
            |c: &[f64]| -> Result<Vec<f64>> { Ok(vec![10.0 * (c[1] - c[0] * c[0]), 1.0 - c[0]]) };
        let cfg = LMConfig {
            max_evals: 10,
            ..Default::default()
        };
        let rep = lm_minimize(f, &[-1.2, 1.0], &cfg).unwrap();
        assert!(rep.evaluations <= 10);
        assert_eq!(rep.termination, TerminationReason::MaxEvaluations);
    }

    #[test]
    fn jacobian_of_affine_map_is_exact() {
        let f = |c: &[f64]| -> Result<Vec<f64>> { Ok(vec![2.0 * c[0] - c[1], 0.5 * c[1] + 3.0]) };
        let x = [0.3, -1.7];
        let r0 = f(&x).unwrap();
        let j = jacobian_fd(&f, &x, &r0, 1e-6).unwrap();
        let expect = [[2.0, -1.0], [0.0, 0.5]];
        for i in 0..2 {
            for k in 0..2 {
                assert!((j[(i, k)] - expect[i][k]).abs() < 1e-9);
            }
        }
        assert!(jacobian_fd(&f, &x, &r0, 0.0).is_err());
    }

    #[test]
    fn quadratic_jacobian_error_is_first_order() {
        // r = c², forward difference error = h
        let f = |c: &[f64]| -> Result<Vec<f64>> { Ok(vec![c[0] * c[0]]) };
        for h in [1e-3, 1e-4] {
            let j = jacobian_fd(&f, &[0.5], &[0.25], h).unwrap();
            assert!(((j[(0, 0)] - 1.0) - h).abs() < 1e-9);
        }
    }

    #[test]
    fn pack_round_trip() {
        let mut p = ParameterPack::new(3, vec![1.0, 2.0, 3.0, 4.0], 2.0);
        p.mask = FreeMask {
            class_param: true,
            conformal: true,
            soliton: false,
            eps: true,
        };
        p.eps1 = vec![0.1];
        p.eps2 = vec![0.2];
        let v = p.to_free_vec();
        assert_eq!(v.len(), p.free_len());
        assert_eq!(p.with_free_vec(&v).unwrap(), p);
        assert!(p.with_free_vec(&v[1..]).is_err());
    }
}
