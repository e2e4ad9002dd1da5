//! Command-line flags, the optional TOML config file, and their merge into a
//! validated [`RunConfig`]. Flags override file values; both override the
//! built-in defaults.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use rte_core::analysis::{make_case, ManufacturedCase};
use rte_core::angular::PhaseFunction;
use rte_core::solver::{Method, SolverConfig};

use crate::CliError;

#[derive(Parser, Debug)]
#[command(name = "rte", version, about = "Discrete-ordinate DG solver for the 2D radiative transfer equation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve one case on the finest mesh and dump the field.
    Solve(Options),
    /// Error table and observed rates over nested meshes.
    Convergence(Options),
    /// The same study with DODSD and DODG side by side.
    Compare(Options),
    /// Scattering-quadrature diagnostics.
    QuadCheck(Options),
}

impl Command {
    pub fn options(&self) -> &Options {
        match self {
            Command::Solve(o) | Command::Convergence(o) | Command::Compare(o) | Command::QuadCheck(o) => o,
        }
    }

    pub fn kind(&self) -> CommandKind {
        match self {
            Command::Solve(_) => CommandKind::Solve,
            Command::Convergence(_) => CommandKind::Convergence,
            Command::Compare(_) => CommandKind::Compare,
            Command::QuadCheck(_) => CommandKind::QuadCheck,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CommandKind {
    Solve,
    Convergence,
    Compare,
    QuadCheck,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseArg {
    Hg,
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Dodsd,
    Dodg,
}

/// Flags shared by every subcommand. Unset flags fall back to the config
/// file, then to the defaults.
#[derive(Args, Debug, Default, Clone)]
pub struct Options {
    /// Benchmark case 1..4.
    #[arg(long)]
    pub case: Option<usize>,
    /// Number of mesh levels.
    #[arg(long)]
    pub levels: Option<usize>,
    /// Grid parameter of the structured initial mesh.
    #[arg(long)]
    pub n0: Option<usize>,
    /// Number of discrete directions.
    #[arg(long)]
    pub n_dirs: Option<usize>,
    /// Henyey-Greenstein asymmetry parameter.
    #[arg(long, allow_hyphen_values = true)]
    pub eta: Option<f64>,
    #[arg(long, value_enum)]
    pub phase: Option<PhaseArg>,
    #[arg(long)]
    pub sigma_t: Option<f64>,
    #[arg(long)]
    pub sigma_s: Option<f64>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    #[arg(long)]
    pub c_bar: Option<f64>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Initial mesh file replacing the structured mesh.
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    /// Sweep directions sequentially.
    #[arg(long)]
    pub deterministic: bool,
    /// Write the sweep layers of direction L on the finest mesh.
    #[arg(long, value_name = "L")]
    pub dump_schedule: Option<usize>,
    /// TOML file with any of the options above (snake_case keys).
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub case: Option<usize>,
    pub levels: Option<usize>,
    pub n0: Option<usize>,
    pub n_dirs: Option<usize>,
    pub eta: Option<f64>,
    pub phase: Option<PhaseArg>,
    pub sigma_t: Option<f64>,
    pub sigma_s: Option<f64>,
    pub method: Option<MethodArg>,
    pub c_bar: Option<f64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub out: Option<PathBuf>,
    pub mesh: Option<PathBuf>,
    pub deterministic: Option<bool>,
    pub dump_schedule: Option<usize>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string().trim_end().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

/// Fully resolved run description.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: CommandKind,
    pub case: ManufacturedCase,
    pub levels: usize,
    pub n0: usize,
    pub solver: SolverConfig,
    pub out: PathBuf,
    pub mesh: Option<PathBuf>,
    pub deterministic: bool,
    pub dump_schedule: Option<usize>,
}

pub const DEFAULT_OUT: &str = "rte-out";

fn in_range<T: PartialOrd + std::fmt::Display + Copy>(name: &str, v: T, lo: T, hi: T) -> Result<T, CliError> {
    if v >= lo && v <= hi {
        Ok(v)
    } else {
        Err(CliError::Config(format!("{name} = {v} is outside [{lo}, {hi}]")))
    }
}

impl RunConfig {
    pub fn resolve(command: CommandKind, flags: &Options) -> Result<Self, CliError> {
        let file = match &flags.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        Self::merge(command, flags, &file)
    }

    pub fn merge(command: CommandKind, flags: &Options, file: &FileConfig) -> Result<Self, CliError> {
        let case_id = in_range("case", flags.case.or(file.case).unwrap_or(1), 1, 4)?;
        let levels = in_range("levels", flags.levels.or(file.levels).unwrap_or(4), 1, 8)?;
        let n0 = in_range("n0", flags.n0.or(file.n0).unwrap_or(10), 1, 1000)?;
        let c_bar = flags.c_bar.or(file.c_bar).unwrap_or(1.0);
        if !(c_bar >= 0.0 && c_bar.is_finite()) {
            return Err(CliError::Config(format!("c_bar = {c_bar} must be finite and >= 0")));
        }
        let tol = flags.tol.or(file.tol).unwrap_or(1e-10);
        if !(tol > 0.0 && tol < 1.0) {
            return Err(CliError::Config(format!("tol = {tol} is outside (0, 1)")));
        }
        let max_iter = in_range("max_iter", flags.max_iter.or(file.max_iter).unwrap_or(1000), 1, 1_000_000)?;
        let method = match flags.method.or(file.method).unwrap_or(MethodArg::Dodsd) {
            MethodArg::Dodsd => Method::Dodsd,
            MethodArg::Dodg => Method::Dodg,
        };
        let deterministic = flags.deterministic || file.deterministic.unwrap_or(false);

        let custom = Custom {
            n_dirs: flags.n_dirs.or(file.n_dirs),
            eta: flags.eta.or(file.eta),
            phase: flags.phase.or(file.phase),
            sigma_t: flags.sigma_t.or(file.sigma_t),
            sigma_s: flags.sigma_s.or(file.sigma_s),
        };
        let case = custom.apply(make_case(case_id)?)?;

        Ok(Self {
            command,
            case,
            levels,
            n0,
            solver: SolverConfig { method, c_bar, tol, max_iter, parallel: !deterministic, ..SolverConfig::default() },
            out: flags.out.clone().or_else(|| file.out.clone()).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
            mesh: flags.mesh.clone().or_else(|| file.mesh.clone()),
            deterministic,
            dump_schedule: flags.dump_schedule.or(file.dump_schedule),
        })
    }
}

/// Overrides that turn a benchmark case into a custom one.
struct Custom {
    n_dirs: Option<usize>,
    eta: Option<f64>,
    phase: Option<PhaseArg>,
    sigma_t: Option<f64>,
    sigma_s: Option<f64>,
}

impl Custom {
    fn apply(&self, base: ManufacturedCase) -> Result<ManufacturedCase, CliError> {
        if self.n_dirs.is_none()
            && self.eta.is_none()
            && self.phase.is_none()
            && self.sigma_t.is_none()
            && self.sigma_s.is_none()
        {
            return Ok(base);
        }
        let base_eta = match base.phase {
            PhaseFunction::HenyeyGreenstein { eta, .. } => Some(eta),
            PhaseFunction::LinearAnisotropic => None,
        };
        let phase_kind = match (self.phase, self.eta, base_eta) {
            (Some(p), _, _) => p,
            (None, Some(_), _) | (None, None, Some(_)) => PhaseArg::Hg,
            (None, None, None) => PhaseArg::Linear,
        };
        let phase = match phase_kind {
            PhaseArg::Hg => {
                let eta = self.eta.or(base_eta).unwrap_or(0.0);
                if !(eta.abs() < 1.0) {
                    return Err(CliError::Config(format!("eta = {eta} must satisfy |eta| < 1")));
                }
                PhaseFunction::henyey_greenstein(eta, 2)?
            }
            PhaseArg::Linear => {
                if self.eta.is_some() {
                    return Err(CliError::Config("eta only applies to the hg phase function".into()));
                }
                PhaseFunction::LinearAnisotropic
            }
        };
        let n_dirs = in_range("n_dirs", self.n_dirs.unwrap_or(base.n_dirs), 2, 4096)?;
        let sigma_t = self.sigma_t.unwrap_or(base.sigma_t);
        let sigma_s = self.sigma_s.unwrap_or(base.sigma_s);
        Ok(ManufacturedCase::custom(base.solution, phase, sigma_t, sigma_s, n_dirs)?)
    }
}
