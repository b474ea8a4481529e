mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use commands::{CodebookArgs, Context, DecomposeArgs, ExponentArgs, SimulateArgs, VerifyArgs};
use config::{merge, resolve_limits, ConfigFile, InputError};

/// Exit codes: 0 ok, 1 verification failure, 2 capacity, 3 packing, 4 invalid input.
#[derive(Parser)]
#[command(
    name = "cqcode",
    version,
    about = "Universal classical-quantum channel code experiments"
)]
struct Cli {
    /// TOML file with one table per command and an optional [limits] table.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Dump intermediate residues to stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
    /// Print rates and exponents in bits instead of nats.
    #[arg(long, global = true)]
    bits: bool,
    /// Largest operator dimension; overrides CQCODE_DIM_CAP and the config.
    #[arg(long, global = true)]
    dim_cap: Option<usize>,
    #[arg(long, global = true)]
    eig_tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Isotypic table of (C^d)^n with verification residues.
    Decompose(DecomposeArgs),
    /// Build and certify a constant-type codebook.
    Codebook(CodebookArgs),
    /// Exact error probabilities of the universal decoder over block lengths.
    Simulate(SimulateArgs),
    /// Universal and channel-aware exponent curves over a rate grid.
    Exponent(ExponentArgs),
    /// Run the invariant battery.
    Verify(VerifyCmd),
}

#[derive(Args)]
struct VerifyCmd {
    #[command(flatten)]
    args: VerifyArgs,
    #[arg(long, hide = true)]
    inject_fault: Option<String>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<cqcode::Error>() {
            return match e {
                cqcode::Error::Capacity { .. } => 2,
                cqcode::Error::Packing(_) => 3,
                cqcode::Error::Validation(_) | cqcode::Error::Domain(_) => 4,
                cqcode::Error::Numeric(_) | cqcode::Error::Consistency(_) => 1,
            };
        }
        if cause.is::<InputError>() {
            return 4;
        }
    }
    1
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    let file = ConfigFile::load(cli.config.as_deref())?;
    let ctx = Context {
        limits: resolve_limits(file.limits.as_ref(), cli.dim_cap, cli.eig_tol)?,
        verbose: cli.verbose,
        bits: cli.bits,
    };
    match cli.command {
        Command::Decompose(a) => commands::decompose(merge(file.decompose.as_ref(), &a, "decompose")?, &ctx),
        Command::Codebook(a) => commands::codebook(merge(file.codebook.as_ref(), &a, "codebook")?, &ctx),
        Command::Simulate(a) => commands::simulate(merge(file.simulate.as_ref(), &a, "simulate")?, &ctx),
        Command::Exponent(a) => commands::exponent(merge(file.exponent.as_ref(), &a, "exponent")?, &ctx),
        Command::Verify(v) => commands::verify(
            merge(file.verify.as_ref(), &v.args, "verify")?,
            v.inject_fault.as_deref(),
            &ctx,
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
