//! Flags, config files and their merge into one effective configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use bcspec_core::bc::{
    inverse_cayley, Branch, BoundaryUnitary, Family, FamilyParams, HermitianBC, FAMILY_NAMES,
};
use bcspec_core::linalg::Mat2;
use bcspec_core::Complex64;
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::Value;

use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "bcspec", version, about = "Self-adjoint boundary conditions on [0, 1]: spectra, kernels, path sums")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Options,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Eigenvalues and sampled eigenfunctions.
    Spectrum,
    /// Bound states of `e^{it} U` as `t` shrinks.
    Edge,
    /// Heat kernel by spectral sum, images, lattice or Monte Carlo.
    Kernel,
    /// Kernel cross-checks and the representability report.
    Compare,
    /// Classical trajectory with bounce audit.
    Classical,
    /// Distance to the classically representable set.
    Distance,
}

/// Every knob; unset flags fall back to the config file, then to defaults.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    /// Named boundary condition (dirichlet, neumann, periodic, pseudo_periodic,
    /// delta_circle, robin_m0, robin_m1).
    #[arg(long, global = true)]
    pub family: Option<String>,
    /// Raw matrix `r11,i11,r12,i12,r21,i21,r22,i22` (row-major).
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub matrix: Option<String>,
    /// Flux phase (`pseudo_periodic`).
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub eps: Option<f64>,
    /// Point-interaction strength (`delta_circle`).
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub a: Option<f64>,
    /// Reflectivity at x = 0 (Robin families).
    #[arg(long, global = true)]
    pub rho0: Option<f64>,
    /// Reflectivity at x = 1 (Robin families).
    #[arg(long, global = true)]
    pub rho1: Option<f64>,
    /// `plus`/`minus`: read `--matrix` as a Hermitian A on that Cayley branch.
    /// `m0`/`m1`: the Robin family built from `--rho0 --rho1`.
    #[arg(long, global = true)]
    pub branch: Option<String>,
    /// Euclidean time.
    #[arg(long, global = true)]
    pub tau: Option<f64>,
    /// Kernel grid points on [0, 1].
    #[arg(long = "grid-n", global = true)]
    pub grid_n: Option<usize>,
    /// Eigenmodes in the spectral kernel (default: enough for the time).
    #[arg(long, global = true)]
    pub modes: Option<usize>,
    /// Monte Carlo paths.
    #[arg(long, global = true)]
    pub paths: Option<usize>,
    /// Monte Carlo time steps per path.
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    /// Lattice sites.
    #[arg(long, global = true)]
    pub sites: Option<usize>,
    /// Random seed; required for Monte Carlo.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory; without it the primary artifact goes to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// TOML file with the same keys as the flags (underscored).
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Number of levels (`spectrum`).
    #[arg(long, global = true)]
    pub levels: Option<usize>,
    /// Comma-separated twist angles (`edge`).
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub t: Option<String>,
    /// Largest decay rate searched for bound states (`edge`).
    #[arg(long = "kappa-max", global = true)]
    pub kappa_max: Option<f64>,
    /// Kernel method: spectral, images, lattice, monte_carlo.
    #[arg(long, global = true)]
    pub method: Option<String>,
    /// Refinement factor of the representability search grids.
    #[arg(long = "budget-scale", global = true)]
    pub budget_scale: Option<usize>,
    /// interval, disk or rectangle (`classical`).
    #[arg(long, global = true)]
    pub domain: Option<String>,
    /// Length, radius, or `width,height`.
    #[arg(long, global = true)]
    pub size: Option<String>,
    /// identity, swap or rotation.
    #[arg(long, global = true)]
    pub alpha: Option<String>,
    /// Rotation angle for `--alpha rotation`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub turn: Option<f64>,
    /// Reflectivity: one value, two endpoints or four sides; `inf` absorbs.
    #[arg(long, global = true)]
    pub rho: Option<String>,
    /// Initial position `x` or `x,y`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub x0: Option<String>,
    /// Initial velocity `v` or `vx,vy`.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub v0: Option<String>,
    /// Final time (`classical`).
    #[arg(long = "t-final", global = true)]
    pub t_final: Option<f64>,
    /// Bounce cap (`classical`).
    #[arg(long = "max-bounces", global = true)]
    pub max_bounces: Option<usize>,
}

macro_rules! merge_fields {
    ($flags:expr, $file:expr, $($f:ident),*) => {
        Options { $($f: $flags.$f.clone().or($file.$f.clone()),)* config: $flags.config.clone() }
    };
}

impl Options {
    /// Flags win over the config file.
    pub fn merged(flags: &Options) -> Result<Options, CliError> {
        let file = match &flags.config {
            Some(path) => load_file(path)?,
            None => Options::default(),
        };
        Ok(merge_fields!(
            flags, file, family, matrix, eps, a, rho0, rho1, branch, tau, grid_n, modes, paths, steps, sites, seed,
            out, levels, t, kappa_max, method, budget_scale, domain, size, alpha, turn, rho, x0, v0, t_final,
            max_bounces
        ))
    }
}

fn load_file(path: &Path) -> Result<Options, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| {
        let msg = e.to_string().lines().filter(|l| !l.trim().is_empty()).collect::<Vec<_>>().join(" ");
        CliError::Config(format!("config {}: {msg}", path.display()))
    })
}

/// Values actually used by a command, in key order, for headers and meta.
#[derive(Debug, Clone, Default)]
pub struct Effective(pub BTreeMap<String, Value>);

impl Effective {
    pub fn set(&mut self, key: &str, v: impl Into<Value>) {
        self.0.insert(key.to_string(), v.into());
    }

    pub fn num(&mut self, key: &str, v: f64) {
        self.0.insert(key.to_string(), crate::output::json_num(v));
    }

    pub fn to_json(&self) -> Value {
        Value::Object(self.0.iter().map(|(k, v)| (k.clone(), v.clone())).collect())
    }
}

pub fn parse_list(name: &str, s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|p| {
            p.trim().parse::<f64>().map_err(|_| CliError::Config(format!("--{name}: cannot parse '{}' as a number", p.trim())))
        })
        .collect()
}

pub fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Config(format!("--{name} must be positive and finite, got {v}")))
    }
}

/// The boundary condition selected by `--family` / `--matrix`.
#[derive(Debug, Clone)]
pub struct Selection {
    pub unitary: BoundaryUnitary,
    pub family: Option<Family>,
}

pub fn select_bc(o: &Options, eff: &mut Effective) -> Result<Selection, CliError> {
    let branch = o.branch.as_deref().map(str::to_ascii_lowercase);
    match (&o.family, &o.matrix) {
        (Some(_), Some(_)) => Err(CliError::Config("--family and --matrix are mutually exclusive".into())),
        (None, Some(m)) => {
            let v = parse_list("matrix", m)?;
            if v.len() != 8 {
                return Err(CliError::Config(format!("--matrix needs 8 reals, got {}", v.len())));
            }
            let c = |k: usize| Complex64::new(v[2 * k], v[2 * k + 1]);
            let mat = Mat2::new(c(0), c(1), c(2), c(3));
            eff.set("matrix", v.iter().map(|x| crate::output::json_num(*x)).collect::<Vec<_>>());
            let unitary = match branch.as_deref() {
                None => BoundaryUnitary::new(mat)?,
                Some(b @ ("plus" | "minus")) => {
                    eff.set("branch", b);
                    let branch = if b == "plus" { Branch::Plus } else { Branch::Minus };
                    if (mat - mat.adjoint()).max_abs() > 1e-12 * (1.0 + mat.max_abs()) {
                        return Err(CliError::Config("--matrix with --branch plus/minus must be Hermitian".into()));
                    }
                    inverse_cayley(&HermitianBC { matrix: mat, branch })
                }
                Some(other) => {
                    return Err(CliError::Config(format!("--branch {other} does not apply to --matrix (use plus or minus)")))
                }
            };
            Ok(Selection { unitary, family: None })
        }
        (family, None) => {
            let name = match (family.as_deref(), branch.as_deref()) {
                (Some(f), None) => f.to_string(),
                (None, Some("m0")) => "robin_m0".to_string(),
                (None, Some("m1")) => "robin_m1".to_string(),
                (Some(f), Some(b)) => {
                    return Err(CliError::Config(format!("--branch {b} conflicts with --family {f}")));
                }
                (None, Some(b)) => return Err(CliError::Config(format!("--branch {b} needs --matrix or must be m0/m1"))),
                (None, None) => return Err(CliError::Config("one of --family or --matrix is required".into())),
            };
            if !FAMILY_NAMES.contains(&name.as_str()) {
                return Err(CliError::Config(format!("unknown family '{name}' (expected one of {})", FAMILY_NAMES.join(", "))));
            }
            let p = FamilyParams {
                eps: o.eps.unwrap_or(0.0),
                a: o.a.unwrap_or(0.0),
                rho0: o.rho0.unwrap_or(1.0),
                rho1: o.rho1.unwrap_or(1.0),
            };
            let fam = Family::parse(&name, &p)?;
            eff.set("family", name.as_str());
            for (k, v) in fam.params() {
                eff.num(k, v);
            }
            Ok(Selection { unitary: fam.unitary()?, family: Some(fam) })
        }
    }
}
