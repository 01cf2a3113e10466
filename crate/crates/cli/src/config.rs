//! Run configuration, presets and the hash that ties output files to the
//! configuration that produced them.

use std::path::PathBuf;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use toric_core::basis::Symmetry;
use toric_core::lm::LMConfig;
use toric_core::problem::Manifold;
use toric_core::residual::{ResidualKind, WeightMode, DEFAULT_DELTA};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ManifoldArg {
    Cp2Blowup1,
    Cp2Blowup2,
    Simplex,
}

impl From<ManifoldArg> for Manifold {
    fn from(m: ManifoldArg) -> Self {
        match m {
            ManifoldArg::Cp2Blowup1 => Manifold::Cp2Blowup1,
            ManifoldArg::Cp2Blowup2 => Manifold::Cp2Blowup2,
            ManifoldArg::Simplex => Manifold::Simplex,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Equation {
    Soliton,
    Qem,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ResidualArg {
    T1,
    T2,
    T3,
}

impl From<ResidualArg> for ResidualKind {
    fn from(r: ResidualArg) -> Self {
        match r {
            ResidualArg::T1 => ResidualKind::T1,
            ResidualArg::T2 => ResidualKind::T2,
            ResidualArg::T3 => ResidualKind::T3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SymmetryArg {
    Z2,
    U2,
}

impl From<SymmetryArg> for Symmetry {
    fn from(s: SymmetryArg) -> Self {
        match s {
            SymmetryArg::Z2 => Symmetry::Z2,
            SymmetryArg::U2 => Symmetry::U2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum WeightArg {
    Sqrt,
    Plain,
}

impl From<WeightArg> for WeightMode {
    fn from(w: WeightArg) -> Self {
        match w {
            WeightArg::Sqrt => WeightMode::SqrtWeight,
            WeightArg::Plain => WeightMode::PlainWeight,
        }
    }
}

/// Ready-made experiments, one per soliton or quasi-Einstein search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// Koiso–Cao soliton, scalar residual, ℤ₂ spaces.
    KcT1,
    /// Koiso–Cao soliton, tensor residual, U(2) spaces.
    KcT2,
    /// Wang–Zhu soliton, scalar residual.
    WzT1,
    /// Wang–Zhu soliton, tensor residual.
    WzT2,
    /// Lü–Page–Pope quasi-Einstein metric, U(2) spaces.
    LppT3,
    /// Quasi-Einstein search on the two-point blow-up with the class fixed.
    Qe2T3,
    /// The same search with the class and conformal data free, degree 15.
    Qe2Free,
}

/// Everything that determines a run. Two runs with equal configurations
/// produce identical files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub manifold: ManifoldArg,
    pub equation: Equation,
    pub residual: ResidualArg,
    pub symmetry: SymmetryArg,
    pub degree_min: u32,
    pub degree_max: u32,
    /// Class parameter; the manifold's canonical value when absent.
    pub class_param: Option<f64>,
    pub m: f64,
    pub free_class: bool,
    pub free_conformal: bool,
    pub free_soliton: bool,
    pub eps_degree: u32,
    pub delta: f64,
    pub quadrature_order: usize,
    pub weight_mode: WeightArg,
    pub grid_n: usize,
    pub lm: LMConfig,
    /// Coefficient file to start from instead of `F = 0`.
    pub warm_start: Option<PathBuf>,
}

impl RunConfig {
    pub fn preset(p: Preset) -> Self {
        let base = Self {
            manifold: ManifoldArg::Cp2Blowup1,
            equation: Equation::Soliton,
            residual: ResidualArg::T1,
            symmetry: SymmetryArg::Z2,
            degree_min: 2,
            degree_max: 10,
            class_param: None,
            m: 2.0,
            free_class: false,
            free_conformal: false,
            free_soliton: false,
            eps_degree: 0,
            delta: DEFAULT_DELTA,
            quadrature_order: 20,
            weight_mode: WeightArg::Sqrt,
            grid_n: 201,
            lm: LMConfig::default(),
            warm_start: None,
        };
        match p {
            Preset::KcT1 => base,
            Preset::KcT2 => Self {
                residual: ResidualArg::T2,
                symmetry: SymmetryArg::U2,
                ..base
            },
            Preset::WzT1 => Self {
                manifold: ManifoldArg::Cp2Blowup2,
                ..base
            },
            Preset::WzT2 => Self {
                manifold: ManifoldArg::Cp2Blowup2,
                residual: ResidualArg::T2,
                ..base
            },
            Preset::LppT3 => Self {
                equation: Equation::Qem,
                residual: ResidualArg::T3,
                symmetry: SymmetryArg::U2,
                ..base
            },
            Preset::Qe2T3 => Self {
                manifold: ManifoldArg::Cp2Blowup2,
                equation: Equation::Qem,
                residual: ResidualArg::T3,
                degree_max: 15,
                ..base
            },
            Preset::Qe2Free => Self {
                manifold: ManifoldArg::Cp2Blowup2,
                equation: Equation::Qem,
                residual: ResidualArg::T3,
                degree_min: 15,
                degree_max: 15,
                free_class: true,
                free_conformal: true,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.residual == ResidualArg::T3 && self.equation != Equation::Qem {
            return bad("residual t3 requires equation qem".into());
        }
        if self.residual != ResidualArg::T3 && self.equation == Equation::Qem {
            return bad("equation qem is solved with residual t3".into());
        }
        if self.symmetry == SymmetryArg::U2 && self.manifold == ManifoldArg::Cp2Blowup2 {
            return bad("u2 symmetry is only valid on cp2-blowup1 and simplex".into());
        }
        if self.degree_min < 2 || self.degree_max < self.degree_min {
            return bad(format!(
                "degrees {}..={} must satisfy 2 <= min <= max",
                self.degree_min, self.degree_max
            ));
        }
        if !(self.m > 1.0) {
            return bad(format!("m = {} must exceed 1", self.m));
        }
        if !(self.delta > 0.0) || self.quadrature_order == 0 || self.grid_n < 2 {
            return bad("delta, quadrature order and grid size must be positive".into());
        }
        if self.equation == Equation::Soliton && (self.free_conformal || self.eps_degree > 0) {
            return bad("conformal data only exists for equation qem".into());
        }
        if self.equation == Equation::Qem && self.free_soliton {
            return bad("the soliton coefficient only exists for equation soliton".into());
        }
        self.lm
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serialises");
        Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
