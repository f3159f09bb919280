use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fvheat_cli::{commands, load_scenario, verify, CliError, Overrides, EXIT_CONFIG, EXIT_FAILED, EXIT_OK};

#[derive(Parser)]
#[command(name = "fvheat", version, about = "Influence-functional path sums and heat generating functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Export kernel tables and discretized influence coefficients as CSV.
    Kernels(Args),
    /// Reduced density at t_f from the path sum and the exact oracle.
    Evolve(Args),
    /// Heat generating function for each configured nu.
    Heatgf(Args),
    /// Run the invariant suite; exit 1 if any check fails.
    Verify(Args),
}

#[derive(clap::Args)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Maximum number of path pairs; 0 runs the oracle only.
    #[arg(long)]
    budget: Option<u64>,
    /// Cumulant truncation order.
    #[arg(long, value_parser = clap::value_parser!(u8).range(2..=4))]
    order: Option<u8>,
}

fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("FVHEAT_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| format!("FVHEAT_THREADS must be a positive integer, got {v:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = init_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_CONFIG as u8);
    }
    let (cmd, args) = match &cli.command {
        Command::Kernels(a) => ("kernels", a),
        Command::Evolve(a) => ("evolve", a),
        Command::Heatgf(a) => ("heatgf", a),
        Command::Verify(a) => ("verify", a),
    };
    let overrides = Overrides {
        out: args.out.clone(),
        budget: args.budget,
        order: args.order.map(usize::from),
    };
    let result = load_scenario(&args.config, &overrides).and_then(|scn| match cmd {
        "kernels" => commands::kernels(&scn),
        "evolve" => commands::evolve(&scn),
        "heatgf" => commands::heatgf(&scn),
        _ => {
            let suite = verify::verify(&scn)?;
            if suite.all_passed() {
                Ok(())
            } else {
                let failed: Vec<String> = suite
                    .failures()
                    .iter()
                    .map(|c| match c.residual {
                        Some(r) => format!("{} (residual {r:.3e})", c.name),
                        None => c.name.clone(),
                    })
                    .collect();
                Err(CliError::VerifyFailed(failed.join(", ")))
            }
        }
    });
    match result {
        Ok(()) => ExitCode::from(EXIT_OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            let code = e.exit_code();
            ExitCode::from(if code == 0 { EXIT_FAILED } else { code } as u8)
        }
    }
}
