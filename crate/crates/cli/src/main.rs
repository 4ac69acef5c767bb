//! Command-line surface for the mixed-state preparation toolkit.
//!
//! Exit codes: 0 success, 2 input error, 3 infeasible design, 4 geometry
//! violation.

mod commands;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{DesignInputs, SweepArgs};

#[derive(Debug)]
pub enum CliError {
    /// Unparseable or unphysical input (exit 2).
    Input(String),
    /// Valid input that no circuit can realize (exit 3).
    Infeasible(String),
    /// Geometry validation failed (exit 4).
    Geometry,
}

impl CliError {
    fn input(msg: String) -> Self {
        CliError::Input(msg)
    }

    fn input_err(e: mixprep::Error) -> Self {
        CliError::Input(e.to_string())
    }

    fn infeasible(e: mixprep::Error) -> Self {
        use mixprep::Error::*;
        match e {
            InfeasibleRaise
            | NoCoincidence
            | EqualizationDiverged { .. }
            | ThetaMismatch(_)
            | ZeroLeadingWeight => CliError::Infeasible(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Geometry => 4,
        }
    }
}

/// Shared output and tolerance options.
#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Write the primary result here (plus a .manifest.json sidecar) instead
    /// of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for stochastic commands.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Physicality tolerance for density-matrix inputs.
    #[arg(long, global = true, default_value_t = 1e-10)]
    tol: f64,
}

#[derive(Debug, Parser)]
#[command(
    name = "mixprep",
    version,
    about = "Design and simulate linear-optical circuits preparing two-photon polarization mixed states"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: GlobalOpts,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decompose a density matrix into equal-concurrence pure branches.
    Decompose {
        /// Density matrix JSON ({"re": 4x4, "im": 4x4}, basis HH, HV, VH, VV).
        input: PathBuf,
    },
    /// Design the optimal preparation circuit for a target state.
    Design {
        /// Density matrix JSON (required for --scheme general, optional for
        /// two-state).
        input: Option<PathBuf>,
        /// general (four paths) or two-state (two components with filters).
        #[arg(long, default_value = "general")]
        scheme: String,
        /// Weight of the alpha component (two-state scheme).
        #[arg(long)]
        p: Option<f64>,
        /// Schmidt angle of the first component; radians, or degrees with a
        /// "deg" suffix (two-state scheme).
        #[arg(long)]
        alpha: Option<String>,
        /// Schmidt angle of the second component (two-state scheme).
        #[arg(long)]
        beta: Option<String>,
    },
    /// Evolve a circuit spec and post-select coincidences.
    Simulate {
        /// Circuit spec JSON.
        spec: PathBuf,
        /// Geometry JSON to validate before simulating.
        #[arg(long)]
        geometry: Option<PathBuf>,
        /// Run the state algebra without geometry validation.
        #[arg(long)]
        skip_geometry: bool,
    },
    /// Emit success-probability curves as CSV.
    Sweep {
        /// eta1, A or beta.
        #[arg(long)]
        axis: String,
        #[arg(long, default_value_t = 0.8)]
        k1: f64,
        #[arg(long, default_value_t = 0.7)]
        k2: f64,
        /// Radians, or degrees with a "deg" suffix.
        #[arg(long, default_value = "0.7")]
        alpha: String,
        /// Comma-separated component ratios, one curve pair per value.
        #[arg(long, value_name = "LIST")]
        a_list: Option<String>,
        #[arg(long, default_value_t = 500)]
        grid_n: usize,
    },
    /// Simulate tomography counts and reconstruct the state.
    Tomo {
        /// Density matrix JSON.
        input: PathBuf,
        /// Shots per setting; 0 means exact frequencies.
        #[arg(long, default_value_t = 0)]
        shots: u64,
    },
    /// Check the decoherence-validity conditions of a geometry file.
    ValidateGeometry {
        /// Geometry JSON (SI units).
        input: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Decompose { input } => commands::cmd_decompose(&input, &cli.opts),
        Command::Design {
            input,
            scheme,
            p,
            alpha,
            beta,
        } => {
            let inputs = match scheme.as_str() {
                "general" => {
                    let input = input.ok_or_else(|| {
                        CliError::input("--scheme general needs a density matrix file".into())
                    })?;
                    DesignInputs::General { input }
                }
                "two-state" => match (input, alpha, beta, p) {
                    (None, Some(alpha), Some(beta), Some(p)) => DesignInputs::TwoStateAngles {
                        alpha: io::parse_angle(&alpha).map_err(CliError::input)?,
                        beta: io::parse_angle(&beta).map_err(CliError::input)?,
                        p,
                    },
                    (Some(input), None, None, None) => DesignInputs::TwoStateRho { input },
                    _ => {
                        return Err(CliError::input(
                            "--scheme two-state needs either --alpha, --beta and --p, or a rank <= 2 density matrix file".into(),
                        ))
                    }
                },
                other => {
                    return Err(CliError::input(format!(
                        "unknown scheme {other:?}; expected general or two-state"
                    )))
                }
            };
            commands::cmd_design(inputs, &cli.opts)
        }
        Command::Simulate {
            spec,
            geometry,
            skip_geometry,
        } => commands::cmd_simulate(&spec, geometry.as_deref(), skip_geometry, &cli.opts),
        Command::Sweep {
            axis,
            k1,
            k2,
            alpha,
            a_list,
            grid_n,
        } => {
            let a_list = match a_list {
                Some(raw) => Some(
                    raw.split(',')
                        .map(|s| {
                            s.trim()
                                .parse::<f64>()
                                .map_err(|e| CliError::input(format!("invalid A value {s:?}: {e}")))
                        })
                        .collect::<Result<Vec<f64>, _>>()?,
                ),
                None => None,
            };
            commands::cmd_sweep(
                SweepArgs {
                    axis,
                    k1,
                    k2,
                    alpha: io::parse_angle(&alpha).map_err(CliError::input)?,
                    a_list,
                    grid_n,
                },
                &cli.opts,
            )
        }
        Command::Tomo { input, shots } => {
            commands::cmd_tomo(&input, shots, cli.opts.seed, &cli.opts)
        }
        Command::ValidateGeometry { input } => commands::cmd_validate_geometry(&input, &cli.opts),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            match &err {
                CliError::Input(msg) => eprintln!("error: {msg}"),
                CliError::Infeasible(msg) => eprintln!("infeasible: {msg}"),
                CliError::Geometry => eprintln!("geometry validation failed"),
            }
            ExitCode::from(err.exit_code())
        }
    }
}
