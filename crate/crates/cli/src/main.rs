use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use toric_prescribe::commands::{self, ParamSystem};
use toric_prescribe::config::{
    Equation, ManifoldArg, Preset, ResidualArg, RunConfig, SymmetryArg, WeightArg,
};
use toric_prescribe::error::CliError;
use toric_prescribe::files::{CoefficientFile, RunPaths};
use toric_prescribe::quadcheck::quadcheck;

#[derive(Parser)]
#[command(name = "toric-prescribe", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the degree continuation and write one coefficient file per degree.
    Solve(SolveArgs),
    /// Recompute the metrics of a coefficient file.
    Eval {
        file: PathBuf,
        /// Exit with status 2 unless the recomputed metrics equal the stored ones.
        #[arg(long)]
        check: bool,
    },
    /// Express the potential of a file as a function of `x₁ + x₂`.
    Taylor { file: PathBuf },
    /// Solve a closed parameter system and print the values with residuals.
    Params {
        system: ParamSystem,
        #[arg(long, default_value_t = 2.0)]
        m: f64,
        /// Class parameter; the manifold's canonical value when absent.
        #[arg(long)]
        a: Option<f64>,
        #[arg(long, value_enum, default_value_t = ManifoldArg::Cp2Blowup1)]
        manifold: ManifoldArg,
        #[arg(long, default_value_t = 40)]
        order: usize,
    },
    /// Check quadrature, jets and curvature identities against independent values.
    Quadcheck {
        #[arg(long, hide = true)]
        mutate_ricci: bool,
    },
}

#[derive(Args)]
struct SolveArgs {
    /// Start from a preset; the flags below override its fields.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long, value_enum)]
    manifold: Option<ManifoldArg>,
    #[arg(long, value_enum)]
    equation: Option<Equation>,
    #[arg(long, value_enum)]
    residual: Option<ResidualArg>,
    #[arg(long, value_enum)]
    symmetry: Option<SymmetryArg>,
    #[arg(long)]
    degree_min: Option<u32>,
    #[arg(long)]
    degree_max: Option<u32>,
    #[arg(long)]
    class_param: Option<f64>,
    #[arg(long)]
    m: Option<f64>,
    #[arg(long)]
    free_class: bool,
    #[arg(long)]
    free_conformal: bool,
    #[arg(long)]
    free_soliton: bool,
    #[arg(long)]
    eps_degree: Option<u32>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    quadrature_order: Option<usize>,
    #[arg(long, value_enum)]
    weight_mode: Option<WeightArg>,
    #[arg(long)]
    grid_n: Option<usize>,
    #[arg(long)]
    max_evals: Option<usize>,
    #[arg(long)]
    warm_start: Option<PathBuf>,
    /// Output directory; defaults to $TORIC_PRESCRIBE_OUT or the working directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Prefix of the output files; defaults to the preset name.
    #[arg(long)]
    name: Option<String>,
    /// Record the wall-clock time in each file.
    #[arg(long)]
    timestamp: bool,
    /// Skip degrees already written by an identical configuration.
    #[arg(long)]
    resume: bool,
}

impl SolveArgs {
    fn config(&self) -> RunConfig {
        let mut c = RunConfig::preset(self.preset.unwrap_or(Preset::KcT1));
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f.clone() { c.$f = v; } )* };
        }
        set!(manifold, equation, residual, symmetry, degree_min, degree_max, m);
        set!(eps_degree, delta, quadrature_order, weight_mode, grid_n);
        if self.class_param.is_some() {
            c.class_param = self.class_param;
        }
        if self.warm_start.is_some() {
            c.warm_start.clone_from(&self.warm_start);
        }
        if let Some(n) = self.max_evals {
            c.lm.max_evals = n;
        }
        c.free_class |= self.free_class;
        c.free_conformal |= self.free_conformal;
        c.free_soliton |= self.free_soliton;
        c
    }

    fn name(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            self.preset
                .and_then(|p| clap::ValueEnum::to_possible_value(&p))
                .map_or_else(|| "run".to_string(), |v| v.get_name().to_string())
        })
    }
}

fn print_json(v: &impl serde::Serialize) -> Result<(), CliError> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Solve(args) => {
            let cfg = args.config();
            let paths = RunPaths {
                dir: args.out.clone().unwrap_or_else(commands::default_out_dir),
                name: args.name(),
            };
            let summary = commands::solve(&cfg, &paths, args.timestamp, args.resume)?;
            print_json(&summary)?;
            if summary.failures.is_empty() {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(2))
            }
        }
        Command::Eval { file, check } => {
            let f = CoefficientFile::load(&file)?;
            let metrics = commands::eval_file(&f)?;
            print_json(&metrics)?;
            if check && metrics != f.metrics {
                log::error!("recomputed metrics differ from the stored ones");
                return Ok(ExitCode::from(2));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Taylor { file } => {
            print_json(&commands::taylor(&CoefficientFile::load(&file)?)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Params {
            system,
            m,
            a,
            manifold,
            order,
        } => {
            print_json(&commands::params(system, m, a, manifold, order)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Quadcheck { mutate_ricci } => {
            let report = quadcheck(mutate_ricci)?;
            print_json(&report)?;
            Ok(if report.all_pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
