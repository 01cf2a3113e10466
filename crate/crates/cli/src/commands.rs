//! The work behind each subcommand, kept free of argument parsing so the
//! integration tests can drive it directly.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::ValueEnum;
use serde::Serialize;
use serde_json::{json, Value};

use toric_core::basis::{project_z2_to_u2, Symmetry, ORDERING_VERSION};
use toric_core::lm::{continuation, DegreeOutcome, ParameterPack};
use toric_core::params::{
    lpp_constraint, lpp_parameters, qe2_algebraic, qe2_integral, qe2_parameters,
    soliton_coefficient,
};
use toric_core::problem::{Manifold, QeConstants, SearchProblem};
use toric_core::quadrature::scheme_for;
use toric_core::residual::{ConformalData, ResidualKind};

use crate::config::{Equation, ManifoldArg, RunConfig, SymmetryArg};
use crate::error::CliError;
use crate::files::{
    upsert_row, BasisDescriptor, CoefficientFile, ConformalBlock, EvalSettings, ManifoldDescriptor,
    MetricsBlock, Provenance, RunPaths, SolitonBlock, SolverBlock, TableRow, FORMAT_VERSION,
};

/// Equation constants and the starting pack for a configuration.
pub fn seed_pack(cfg: &RunConfig) -> Result<(ParameterPack, Option<QeConstants>), CliError> {
    let manifold: Manifold = cfg.manifold.into();
    let mut a = cfg
        .class_param
        .unwrap_or_else(|| manifold.canonical_class());
    let warm = cfg
        .warm_start
        .as_deref()
        .map(CoefficientFile::load)
        .transpose()?;
    if let Some(w) = &warm {
        if w.manifold.kind != cfg.manifold || w.basis.symmetry != cfg.symmetry {
            return Err(CliError::Config(format!(
                "warm start is a {:?}/{:?} file but the run is {:?}/{:?}",
                w.manifold.kind, w.basis.symmetry, cfg.manifold, cfg.symmetry
            )));
        }
        if (w.conformal.is_some()) != (cfg.equation == Equation::Qem) {
            return Err(CliError::Config(
                "warm start solves a different equation".into(),
            ));
        }
        if cfg.class_param.is_none() {
            a = w.manifold.a;
        }
    }

    let mut pack = ParameterPack::new(2, Vec::new(), a);
    let qe = match cfg.equation {
        Equation::Soliton => {
            pack.soliton = soliton_coefficient(&manifold.polytope(a)?)?;
            None
        }
        Equation::Qem => {
            let (b, c, d, mu) = match cfg.manifold {
                ManifoldArg::Cp2Blowup1 => {
                    let p = lpp_parameters(cfg.m)?;
                    (p.b, p.c, p.d, p.mu)
                }
                ManifoldArg::Cp2Blowup2 => {
                    let p = qe2_parameters(cfg.m, a, 2 * cfg.quadrature_order)?;
                    (p.b, p.c, p.d, p.mu)
                }
                ManifoldArg::Simplex => {
                    return Err(CliError::Config(
                        "no quasi-Einstein data are known on the simplex".into(),
                    ))
                }
            };
            (pack.b, pack.c, pack.d) = (b, c, d);
            Some(QeConstants {
                m: cfg.m,
                mu,
                eps_degree: cfg.eps_degree,
            })
        }
    };
    if let Some(w) = warm {
        let class = pack.class_param;
        let soliton = pack.soliton;
        pack = w.pack();
        pack.class_param = class;
        if cfg.equation == Equation::Soliton && w.soliton.is_none() {
            pack.soliton = soliton;
        }
    }
    if cfg.eps_degree > 0 && pack.eps1.is_empty() {
        let cd = ConformalData::new(pack.b, pack.c, pack.d, cfg.m, 0.0)?
            .with_eps_degree(cfg.eps_degree)?;
        pack.eps1 = vec![0.0; cd.eps1.len()];
        pack.eps2 = vec![0.0; cd.eps2.len()];
    }
    pack.mask.class_param = cfg.free_class;
    pack.mask.conformal = cfg.free_conformal;
    pack.mask.soliton = cfg.free_soliton;
    pack.mask.eps = cfg.eps_degree > 0;
    Ok((pack, qe))
}

pub fn build_problem(
    cfg: &RunConfig,
    seed: &ParameterPack,
    qe: Option<QeConstants>,
) -> Result<SearchProblem, CliError> {
    Ok(SearchProblem::new(
        cfg.manifold.into(),
        cfg.symmetry.into(),
        cfg.residual.into(),
        cfg.weight_mode.into(),
        cfg.quadrature_order,
        qe,
        seed,
    )?
    .with_delta(cfg.delta)?)
}

fn metrics_block(
    problem: &SearchProblem,
    pack: &ParameterPack,
    grid_n: usize,
) -> Result<MetricsBlock, CliError> {
    let (scalar, tensor) = problem.metrics(pack, grid_n)?;
    let (sk, tk) = if problem.qe.is_none() {
        (ResidualKind::T1, ResidualKind::T2)
    } else {
        (ResidualKind::T4, ResidualKind::T3)
    };
    Ok(MetricsBlock {
        scalar_kind: sk.to_string(),
        scalar,
        tensor_kind: tk.to_string(),
        tensor,
    })
}

fn eval_settings(cfg: &RunConfig) -> EvalSettings {
    EvalSettings {
        delta: cfg.delta,
        quadrature_order: cfg.quadrature_order,
        weight_mode: cfg.weight_mode,
        grid_n: cfg.grid_n,
    }
}

/// Builds the file describing one solved degree.
pub fn coefficient_file(
    cfg: &RunConfig,
    problem: &SearchProblem,
    outcome: &DegreeOutcome,
    timestamp: bool,
) -> Result<CoefficientFile, CliError> {
    let pack = &outcome.pack;
    let conformal = problem.qe.map(|q| ConformalBlock {
        b: pack.b,
        c: pack.c,
        d: pack.d,
        m: q.m,
        mu: q.mu,
        eps_degree: q.eps_degree,
        eps1: pack.eps1.clone(),
        eps2: pack.eps2.clone(),
    });
    let soliton = problem.qe.is_none().then_some(SolitonBlock {
        coeff: pack.soliton,
    });
    let timestamp = timestamp.then(|| {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs())
    });
    Ok(CoefficientFile {
        format_version: FORMAT_VERSION,
        manifold: ManifoldDescriptor {
            kind: cfg.manifold,
            a: pack.class_param,
        },
        basis: BasisDescriptor {
            degree: pack.degree,
            symmetry: cfg.symmetry,
            ordering_version: ORDERING_VERSION,
        },
        coeffs: pack.coeffs.clone(),
        soliton,
        conformal,
        evaluation: eval_settings(cfg),
        metrics: metrics_block(problem, pack, cfg.grid_n)?,
        solver: outcome.report.as_ref().map(SolverBlock::from),
        provenance: Provenance {
            config_hash: cfg.hash(),
            timestamp,
        },
    })
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SolveSummary {
    pub files: Vec<PathBuf>,
    pub rows: Vec<TableRow>,
    /// Degrees whose search could not run, with the reason.
    pub failures: Vec<(u32, String)>,
    /// Degrees taken from earlier output instead of being recomputed.
    pub resumed: Vec<u32>,
}

/// Completed degrees already on disk for this exact configuration, in
/// ascending order with no gaps.
fn completed_degrees(cfg: &RunConfig, paths: &RunPaths) -> Vec<(u32, CoefficientFile)> {
    let hash = cfg.hash();
    let mut done = Vec::new();
    for d in cfg.degree_min..=cfg.degree_max {
        match CoefficientFile::load(&paths.coefficients(d)) {
            Ok(f) if f.provenance.config_hash == hash => done.push((d, f)),
            _ => break,
        }
    }
    done
}

/// Runs the degree continuation, writing each degree's files as soon as it
/// finishes.
pub fn solve(
    cfg: &RunConfig,
    paths: &RunPaths,
    timestamp: bool,
    resume: bool,
) -> Result<SolveSummary, CliError> {
    cfg.validate()?;
    let (mut seed, qe) = seed_pack(cfg)?;
    let mut summary = SolveSummary::default();
    let mut first = cfg.degree_min;
    if resume {
        let done = completed_degrees(cfg, paths);
        if let Some((d, f)) = done.last() {
            let mask = seed.mask;
            seed = f.pack();
            seed.mask = mask;
            first = d + 1;
        }
        summary.resumed = done.iter().map(|(d, _)| *d).collect();
    }
    let problem = build_problem(cfg, &seed, qe)?;
    let degrees: Vec<u32> = (first..=cfg.degree_max).collect();
    if degrees.is_empty() {
        return Ok(summary);
    }

    let mut write_error: Option<CliError> = None;
    continuation(&problem, &degrees, &seed, &cfg.lm, |outcome| {
        if write_error.is_some() {
            return;
        }
        if let Some(e) = &outcome.error {
            log::warn!("degree {} failed: {e}", outcome.degree);
            summary.failures.push((outcome.degree, e.clone()));
            return;
        }
        let res = (|| -> Result<(), CliError> {
            let file = coefficient_file(cfg, &problem, outcome, timestamp)?;
            let json_path = paths.coefficients(outcome.degree);
            file.save(&json_path)?;
            crate::files::write_atomic(&paths.text(outcome.degree), file.to_text().as_bytes())?;
            let row = TableRow::new(&file);
            upsert_row(&paths.table(), row.clone())?;
            log::info!(
                "d={} N={} E={:.3e} Max={:.3e} E_t={:.3e} Max_t={:.3e} {}",
                row.d,
                row.n_d,
                row.e_scalar,
                row.max_scalar,
                row.e_tensor,
                row.max_tensor,
                row.termination
            );
            summary.files.push(json_path);
            summary.rows.push(row);
            Ok(())
        })();
        if let Err(e) = res {
            write_error = Some(e);
        }
    })?;
    if let Some(e) = write_error {
        return Err(e);
    }
    Ok(summary)
}

/// Problem matching a stored file, for re-evaluation.
pub fn problem_for_file(
    file: &CoefficientFile,
) -> Result<(SearchProblem, ParameterPack), CliError> {
    let pack = file.pack();
    let (kind, qe) = match &file.conformal {
        None => (ResidualKind::T1, None),
        Some(c) => (
            ResidualKind::T3,
            Some(QeConstants {
                m: c.m,
                mu: c.mu,
                eps_degree: c.eps_degree,
            }),
        ),
    };
    let s = file.evaluation;
    let problem = SearchProblem::new(
        file.manifold.kind.into(),
        file.basis.symmetry.into(),
        kind,
        s.weight_mode.into(),
        s.quadrature_order,
        qe,
        &pack,
    )?
    .with_delta(s.delta)?;
    Ok((problem, pack))
}

/// Recomputes the metrics of a stored file with its own settings.
pub fn eval_file(file: &CoefficientFile) -> Result<MetricsBlock, CliError> {
    let (problem, pack) = problem_for_file(file)?;
    metrics_block(&problem, &pack, file.evaluation.grid_n)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaylorReport {
    pub symmetry: SymmetryArg,
    /// Coefficients of `t², t³, …` with `t = x₁ + x₂`.
    pub taylor: Vec<f64>,
    /// Norm of the part of `F` that is not a function of `t`.
    pub projection_residual: f64,
}

pub fn taylor(file: &CoefficientFile) -> Result<TaylorReport, CliError> {
    let (taylor, projection_residual) = match Symmetry::from(file.basis.symmetry) {
        Symmetry::U2 => (file.coeffs.clone(), 0.0),
        Symmetry::Z2 => project_z2_to_u2(&file.coeffs, file.basis.degree)?,
    };
    Ok(TaylorReport {
        symmetry: file.basis.symmetry,
        taylor,
        projection_residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ParamSystem {
    Soliton,
    Lpp,
    Qe2,
}

/// Solves one of the closed parameter systems and reports the values with
/// the residuals of the equations they satisfy.
pub fn params(
    system: ParamSystem,
    m: f64,
    a: Option<f64>,
    manifold: ManifoldArg,
    order: usize,
) -> Result<Value, CliError> {
    match system {
        ParamSystem::Soliton => {
            let man: Manifold = manifold.into();
            let a = a.unwrap_or_else(|| man.canonical_class());
            let poly = man.polytope(a)?;
            let coeff = soliton_coefficient(&poly)?;
            let scheme = scheme_for(&poly, order)?;
            let moment: f64 = scheme
                .points
                .iter()
                .zip(&scheme.weights)
                .map(|(p, w)| {
                    let t = p[0] + p[1];
                    w * t * (-coeff * t).exp()
                })
                .sum();
            Ok(json!({
                "system": "soliton",
                "manifold": manifold,
                "a": a,
                "values": { "coeff": coeff },
                "residuals": { "moment": moment },
                "quadrature_order": order,
            }))
        }
        ParamSystem::Lpp => {
            let p = lpp_parameters(m)?;
            Ok(json!({
                "system": "lpp",
                "m": m,
                "values": { "b": p.b, "c": p.c, "d": p.d, "mu": p.mu },
                "residuals": {
                    "c2_minus_b2_minus_1": p.c * p.c - p.b * p.b - 1.0,
                    "d_relation": p.d - 1.0 / (2.0 * (2.0 * p.b - p.c)),
                    "integral": lpp_constraint(p.b, m, order),
                },
                "quadrature_order": order,
            }))
        }
        ParamSystem::Qe2 => {
            let a = a.unwrap_or(2.0);
            let p = qe2_parameters(m, a, order)?;
            let v = [p.b, p.c, p.d, p.mu];
            Ok(json!({
                "system": "qe2",
                "m": m,
                "a": a,
                "values": { "b": p.b, "c": p.c, "d": p.d, "mu": p.mu },
                "residuals": {
                    "algebraic": qe2_algebraic(a, v),
                    "integral": qe2_integral(m, a, v, order)?,
                },
                "quadrature_order": order,
            }))
        }
    }
}

/// Default output directory: the environment variable when set, else the
/// working directory.
pub fn default_out_dir() -> PathBuf {
    std::env::var_os(crate::files::OUT_DIR_VAR)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(".").to_path_buf())
}
