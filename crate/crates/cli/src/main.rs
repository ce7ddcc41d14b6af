use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use snwave::experiment::{run_single, run_table_mesh, run_table_sigma, run_table_t, write_table_csv, RunConfig};
use snwave::Error;

const CSV_HELP: &str = "\
Output files (written to --out-dir when given; tables are also printed to stdout):

  iterations.csv   n,stop_qty,du_L2,dw_L2,J,J2,du_to_final,dw_to_final
                   one row per sweep n; stop_qty is the relative control change,
                   du_L2 = ||u^n - u^(n-1)||, dw_L2 = sum_i ||w_i^n - w_i^(n-1)||,
                   *_to_final are distances to the last iterate
  profile.csv      x,u_T          final state u(x,T) at the nodes
  summary.txt      the summary line printed by `run`
  table_T.csv, table_sigma.csv, table_mesh.csv
                   key,T_multiple,T,sigma,iterations,converged,stop_qty,du_L2,dw_L2,J2,
                   vertices,triangles,border_length
                   (columns that do not apply to a table are left empty)

All reals are written in full-precision scientific notation.

Exit status: 0 success, 1 I/O or failed verification, 2 usage error, 3 divergence.";

#[derive(Parser)]
#[command(name = "snwave", version, about = "Stackelberg-Nash boundary control of the wave equation on a moving domain", after_help = CSV_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One fixed-point run.
    Run(ConfigArgs),
    /// Sweep T = 1..10 T_c.
    #[command(name = "table-T")]
    TableT(ConfigArgs),
    /// Sweep sigma = 1e1..1e10 at the configured horizon.
    #[command(name = "table-sigma")]
    TableSigma(ConfigArgs),
    /// Space-time mesh statistics for T = 1..10 T_c.
    #[command(name = "table-mesh")]
    TableMesh(ConfigArgs),
    /// Quick oracle and invariant suite.
    Verify,
}

/// Flags mirror the keys of the config file. Precedence: flags > file > defaults.
#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// Flat `key = value` file.
    #[arg(long, allow_hyphen_values = true)]
    config: Option<PathBuf>,
    /// Boundary speed, alpha(t) = 1 + k t [default: 0.25]
    #[arg(long, allow_hyphen_values = true)]
    k: Option<String>,
    /// Horizon as a multiple of T_c(k) [default: 1]
    #[arg(long = "T-multiple", alias = "T_multiple", allow_hyphen_values = true)]
    t_multiple: Option<String>,
    /// Absolute horizon, overrides --T-multiple (needed for k = 0)
    #[arg(long = "T", allow_hyphen_values = true)]
    horizon: Option<String>,
    /// Spatial cells per time level [default: 100]
    #[arg(long = "N", allow_hyphen_values = true)]
    n: Option<String>,
    /// Time steps [default: 100]
    #[arg(long = "M", allow_hyphen_values = true)]
    m: Option<String>,
    /// Follower penalty [default: 1e2]
    #[arg(long, allow_hyphen_values = true)]
    sigma: Option<String>,
    /// Stopping tolerance [default: 1e-5]
    #[arg(long, allow_hyphen_values = true)]
    epsilon: Option<String>,
    /// Sweep cap [default: 100]
    #[arg(long = "max-iter", alias = "max_iter", allow_hyphen_values = true)]
    max_iter: Option<String>,
    /// Constant tracking target [default: 10]
    #[arg(long, allow_hyphen_values = true)]
    u2: Option<String>,
    /// disjoint-halves | additive-overlap
    #[arg(long, allow_hyphen_values = true)]
    segments: Option<String>,
    /// zero | sine:A,B
    #[arg(long = "phi-terminal", alias = "phi_terminal", allow_hyphen_values = true)]
    phi_terminal: Option<String>,
    /// one-sided | variational
    #[arg(long, allow_hyphen_values = true)]
    flux: Option<String>,
    /// printed | consistent
    #[arg(long, allow_hyphen_values = true)]
    adjoint: Option<String>,
    /// Directions for the optimality check in `run`; 0 disables it [default: 5]
    #[arg(long = "nash-directions", alias = "nash_directions", allow_hyphen_values = true)]
    nash_directions: Option<String>,
    /// Seed for the optimality check directions
    #[arg(long, allow_hyphen_values = true)]
    seed: Option<String>,
    #[arg(long = "out-dir", alias = "out_dir", allow_hyphen_values = true)]
    out_dir: Option<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> snwave::Result<RunConfig> {
        let pairs = [
            ("k", &self.k),
            ("T_multiple", &self.t_multiple),
            ("T", &self.horizon),
            ("N", &self.n),
            ("M", &self.m),
            ("sigma", &self.sigma),
            ("epsilon", &self.epsilon),
            ("max_iter", &self.max_iter),
            ("u2", &self.u2),
            ("segments", &self.segments),
            ("phi_terminal", &self.phi_terminal),
            ("flux", &self.flux),
            ("adjoint", &self.adjoint),
            ("nash_directions", &self.nash_directions),
            ("seed", &self.seed),
            ("out_dir", &self.out_dir),
        ];
        let overrides: Vec<(String, String)> = pairs
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
            .collect();
        RunConfig::resolve(self.config.as_deref(), &overrides)
    }
}

fn exit_code(e: &Error) -> ExitCode {
    match e {
        Error::Usage { .. } | Error::Domain(_) => ExitCode::from(2),
        Error::Diverged { .. } => ExitCode::from(3),
        _ => ExitCode::from(1),
    }
}

fn run(command: Command) -> snwave::Result<ExitCode> {
    let stdout = io::stdout();
    match command {
        Command::Run(args) => {
            let cfg = args.resolve()?;
            let out = run_single(&cfg)?;
            writeln!(stdout.lock(), "{}", out.summary)?;
        }
        Command::TableT(args) => write_table_csv(&run_table_t(&args.resolve()?)?, stdout.lock())?,
        Command::TableSigma(args) => write_table_csv(&run_table_sigma(&args.resolve()?)?, stdout.lock())?,
        Command::TableMesh(args) => write_table_csv(&run_table_mesh(&args.resolve()?)?, stdout.lock())?,
        Command::Verify => {
            let checks = snwave::verify::run_all()?;
            let mut out = stdout.lock();
            for c in &checks {
                writeln!(
                    out,
                    "{} {}: {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                )?;
            }
            if checks.iter().any(|c| !c.passed) {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
