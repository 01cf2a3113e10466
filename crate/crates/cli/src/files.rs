//! Self-describing coefficient files, the per-run CSV table and the plain
//! text export. Every write goes to a temporary sibling first and is then
//! renamed into place, so readers never observe a partial file.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use toric_core::basis::ORDERING_VERSION;
use toric_core::lm::{LMReport, ParameterPack, TerminationReason};
use toric_core::residual::ErrorMetrics;

use crate::config::{ManifoldArg, SymmetryArg, WeightArg};
use crate::error::CliError;

pub const FORMAT_VERSION: u32 = 1;

/// Environment variable naming the default output directory.
pub const OUT_DIR_VAR: &str = "TORIC_PRESCRIBE_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManifoldDescriptor {
    pub kind: ManifoldArg,
    pub a: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisDescriptor {
    pub degree: u32,
    pub symmetry: SymmetryArg,
    pub ordering_version: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolitonBlock {
    pub coeff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformalBlock {
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub m: f64,
    pub mu: f64,
    pub eps_degree: u32,
    pub eps1: Vec<f64>,
    pub eps2: Vec<f64>,
}

/// Settings needed to recompute the stored metrics exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSettings {
    pub delta: f64,
    pub quadrature_order: usize,
    pub weight_mode: WeightArg,
    pub grid_n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsBlock {
    pub scalar_kind: String,
    pub scalar: ErrorMetrics,
    pub tensor_kind: String,
    pub tensor: ErrorMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverBlock {
    pub evaluations: usize,
    pub iterations: usize,
    pub termination: TerminationReason,
    /// Objective after each accepted step, starting value first.
    pub history: Vec<f64>,
}

impl From<&LMReport> for SolverBlock {
    fn from(r: &LMReport) -> Self {
        Self {
            evaluations: r.evaluations,
            iterations: r.iterations,
            termination: r.termination,
            history: r.history.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    /// Seconds since the Unix epoch; only recorded on request so that
    /// repeated runs stay byte-identical by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientFile {
    pub format_version: u32,
    pub manifold: ManifoldDescriptor,
    pub basis: BasisDescriptor,
    /// Coefficients of `F` in basis order.
    pub coeffs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub soliton: Option<SolitonBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conformal: Option<ConformalBlock>,
    pub evaluation: EvalSettings,
    pub metrics: MetricsBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverBlock>,
    pub provenance: Provenance,
}

impl CoefficientFile {
    /// Parameter pack described by the file, with every flag of the mask
    /// cleared.
    pub fn pack(&self) -> ParameterPack {
        let mut p = ParameterPack::new(self.basis.degree, self.coeffs.clone(), self.manifold.a);
        if let Some(s) = self.soliton {
            p.soliton = s.coeff;
        }
        if let Some(c) = &self.conformal {
            p.b = c.b;
            p.c = c.c;
            p.d = c.d;
            p.eps1.clone_from(&c.eps1);
            p.eps2.clone_from(&c.eps2);
        }
        p
    }

    pub fn to_json(&self) -> Result<String, CliError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let f: Self = serde_json::from_str(text)?;
        if f.format_version != FORMAT_VERSION {
            return Err(CliError::Config(format!(
                "unsupported format version {}",
                f.format_version
            )));
        }
        if f.basis.ordering_version != ORDERING_VERSION {
            return Err(CliError::Config(format!(
                "basis ordering version {} does not match this build ({ORDERING_VERSION})",
                f.basis.ordering_version
            )));
        }
        Ok(f)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        write_atomic(path, self.to_json()?.as_bytes())
    }

    /// One coefficient per line in basis order.
    pub fn to_text(&self) -> String {
        self.coeffs.iter().map(|c| format!("{c:e}\n")).collect()
    }
}

/// Writes `bytes` to a temporary file next to `path` and renames it over
/// `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty());
    if let Some(d) = dir {
        fs::create_dir_all(d)?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Config(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".{}.tmp", std::process::id()));
    let tmp = match dir {
        Some(d) => d.join(tmp_name),
        None => PathBuf::from(tmp_name),
    };
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// One row of the per-run table: degree, basis size, then `𝓔` and `Max` for
/// the scalar and tensor residuals, with root-mean-square columns appended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub d: u32,
    pub n_d: usize,
    pub e_scalar: f64,
    pub max_scalar: f64,
    pub e_tensor: f64,
    pub max_tensor: f64,
    pub rms_scalar: f64,
    pub rms_tensor: f64,
    pub evaluations: usize,
    pub termination: String,
}

impl TableRow {
    pub fn new(file: &CoefficientFile) -> Self {
        let m = &file.metrics;
        Self {
            d: file.basis.degree,
            n_d: file.coeffs.len(),
            e_scalar: m.scalar.normalized,
            max_scalar: m.scalar.max_abs,
            e_tensor: m.tensor.normalized,
            max_tensor: m.tensor.max_abs,
            rms_scalar: m.scalar.rms,
            rms_tensor: m.tensor.rms,
            evaluations: file.solver.as_ref().map_or(0, |s| s.evaluations),
            termination: file
                .solver
                .as_ref()
                .map_or_else(String::new, |s| format!("{:?}", s.termination)),
        }
    }
}

pub fn read_table(path: &Path) -> Result<Vec<TableRow>, CliError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut r = csv::Reader::from_path(path)?;
    let rows = r.deserialize().collect::<Result<Vec<TableRow>, _>>()?;
    Ok(rows)
}

/// Inserts or replaces the row for `row.d` and rewrites the table ordered by
/// degree.
pub fn upsert_row(path: &Path, row: TableRow) -> Result<(), CliError> {
    let mut rows = read_table(path)?;
    rows.retain(|r| r.d != row.d);
    rows.push(row);
    rows.sort_by_key(|r| r.d);
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
    write_atomic(path, &bytes)
}

/// File names used by a run named `name` in `dir`.
#[derive(Debug, Clone)]
pub struct RunPaths {
    pub dir: PathBuf,
    pub name: String,
}

impl RunPaths {
    pub fn coefficients(&self, d: u32) -> PathBuf {
        self.dir.join(format!("{}_d{d:02}.json", self.name))
    }

    pub fn text(&self, d: u32) -> PathBuf {
        self.dir.join(format!("{}_d{d:02}.txt", self.name))
    }

    pub fn table(&self) -> PathBuf {
        self.dir.join(format!("{}_table.csv", self.name))
    }
}
