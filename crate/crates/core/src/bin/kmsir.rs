use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use km_spectral::runner::{parse_override, run, Command, OutputFormat, RunOptions};
use km_spectral::Error;

#[derive(Parser)]
#[command(name = "kmsir", version, about = "Diffusive Kermack-McKendrick solver and estimate lab")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// TOML configuration file; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, env = "KMSIR_OUT", default_value = "kmsir-out")]
    out: PathBuf,

    /// Overrides `experiment.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Write per-slice field samples (solve, oracle).
    #[arg(long, global = true)]
    fields: bool,

    /// Dotted config override such as `solver.n_t=100`; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Picard solve of the configured problem.
    Solve,
    /// Compare the Picard solution with the splitting and ODE references.
    Oracle,
    /// Run the estimate checks.
    Verify,
    /// Probe the contraction factor of the Duhamel map.
    Contraction,
    /// Probe Lipschitz dependence on the data.
    Lipschitz,
    /// Run a parameter sweep described by the `[sweep]` section.
    Sweep,
}

#[derive(ValueEnum, Clone, Copy)]
enum Format {
    Csv,
    Json,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match cli.command {
        Cmd::Solve => Command::Solve,
        Cmd::Oracle => Command::Oracle,
        Cmd::Verify => Command::Verify,
        Cmd::Contraction => Command::Contraction,
        Cmd::Lipschitz => Command::Lipschitz,
        Cmd::Sweep => Command::Sweep,
    };
    let start = Instant::now();
    let outcome = cli
        .set
        .iter()
        .map(|s| parse_override(s))
        .collect::<Result<Vec<_>, _>>()
        .and_then(|overrides| {
            let opts = RunOptions {
                out_dir: cli.out.clone(),
                seed: cli.seed,
                format: cli.format.map(|f| match f {
                    Format::Csv => OutputFormat::Csv,
                    Format::Json => OutputFormat::Json,
                }),
                fields: cli.fields,
                overrides,
            };
            run(command, cli.config.as_deref(), &opts)
        });
    let elapsed = start.elapsed().as_secs_f64();
    match outcome {
        Ok(record) => {
            let status = if record.pass { "pass" } else { "FAIL" };
            eprintln!(
                "kmsir {}: {status} ({} files in {}, {elapsed:.2} s)",
                record.command,
                record.outputs.len() + 1,
                cli.out.display()
            );
            if record.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            match &e {
                Error::Config { key, message } => eprintln!("kmsir: config error at `{key}`: {message}"),
                other => eprintln!("kmsir: {other}"),
            }
            eprintln!("kmsir: failed after {elapsed:.2} s");
            ExitCode::from(2)
        }
    }
}
