//! Command-line flags. Every subcommand's flags can also come from a JSON
//! config file (`--config`), keyed by the long flag name; flags given on the
//! command line win.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use plap_core::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "plap", version, about = "Dirichlet eigenvalues of the discrete p-Laplacian")]
pub struct Cli {
    /// JSON file with default values for the subcommand's flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a domain and print its metadata.
    Domain(DomainArgs),
    /// Solve the p-Poisson problem.
    Poisson(PoissonArgs),
    /// First eigenpair.
    Eigen1(Eigen1Args),
    /// Upper bound for the m-th eigenvalue from disjoint supports.
    Eigenm(EigenmArgs),
    /// First (and higher) eigenvalues over a grid of exponents.
    Sweep(SweepArgs),
    /// Run property suites.
    Verify(VerifyArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Domain(_) => "domain",
            Command::Poisson(_) => "poisson",
            Command::Eigen1(_) => "eigen1",
            Command::Eigenm(_) => "eigenm",
            Command::Sweep(_) => "sweep",
            Command::Verify(_) => "verify",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodArg {
    Descent,
    Inverse,
    Both,
}

/// Fills every `None` field of `self` from `other`.
pub trait Merge: Sized {
    fn merge(self, other: Self) -> Self;
}

macro_rules! mergeable {
    ($t:ty { $($f:ident),* } $(flags { $($b:ident),* })?) => {
        impl Merge for $t {
            fn merge(self, other: Self) -> Self {
                Self {
                    $($f: self.$f.or(other.$f),)*
                    $($($b: self.$b || other.$b,)*)?
                }
            }
        }
    };
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct DomainArgs {
    /// interval:N[:L], square:N, mask:PATH[:H] or crack:N:K
    #[arg(long)]
    pub domain: Option<String>,
    /// Write the metadata JSON here as well as to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
mergeable!(DomainArgs { domain, out });

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct PoissonArgs {
    #[arg(long)]
    pub domain: Option<String>,
    #[arg(long)]
    pub p: Option<f64>,
    /// constant[:C] (default constant:1) or file:PATH (a field file)
    #[arg(long)]
    pub rhs: Option<String>,
    /// Gradient-norm tolerance; default 1e-10 (1 + |J(0)|).
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Solution field file (little-endian f64 plus JSON sidecar).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Solution as CSV with node coordinates.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}
mergeable!(PoissonArgs { domain, p, rhs, tol, max_iter, out, csv, report });

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct Eigen1Args {
    #[arg(long)]
    pub domain: Option<String>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Independent random restarts for the simplicity check.
    #[arg(long)]
    pub restarts: Option<usize>,
    #[arg(long)]
    pub out_field: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}
mergeable!(Eigen1Args { domain, p, method, tol, max_iter, seed, restarts, out_field, csv, report });

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct EigenmArgs {
    #[arg(long)]
    pub domain: Option<String>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub m: Option<usize>,
    /// equal, optimize (1D only) or file:PATH (label grid, 0 = no piece)
    #[arg(long)]
    pub partition: Option<String>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}
mergeable!(EigenmArgs { domain, p, m, partition, tol, seed, report });

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct SweepArgs {
    #[arg(long)]
    pub domain: Option<String>,
    /// start:stop:step or a comma-separated list
    #[arg(long)]
    pub p_grid: Option<String>,
    #[arg(long)]
    pub m_max: Option<usize>,
    /// Start each exponent from the previous eigenfield (sequential sweep).
    #[arg(long)]
    pub warm_start: bool,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Relative slack of the monotonicity check printed after the sweep.
    #[arg(long)]
    pub slack: Option<f64>,
}
mergeable!(SweepArgs { domain, p_grid, m_max, out_dir, method, tol, seed, slack } flags { warm_start });

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct VerifyArgs {
    /// all, oracles, monotonicity, comparison, picone, convergence,
    /// clarkson, power-mean, gradient or chain
    #[arg(long)]
    pub suite: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Persist sweep eigenfields here (read back by the power-mean suite).
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub interval_nodes: Option<usize>,
    #[arg(long)]
    pub square_nodes: Option<usize>,
}
mergeable!(VerifyArgs { suite, seed, out_dir, report, interval_nodes, square_nodes });

pub fn load_config<T: for<'de> Deserialize<'de> + Default>(path: Option<&PathBuf>) -> Result<T> {
    let Some(path) = path else { return Ok(T::default()) };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("config {}: {e}", path.display())))
}

pub fn required<T: Clone>(v: &Option<T>, flag: &str) -> Result<T> {
    v.clone().ok_or_else(|| Error::InvalidInput(format!("--{flag} is required (flag or config)")))
}
