//! Batch front end: validate problem specs, dispatch the solvers, emit
//! machine-readable reports and plot-ready curves.

mod run;
mod spec;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use run::{run, write_outputs, OutputFormat};
use spec::{validate, SpecError};

#[derive(Parser)]
#[command(name = "ouq", version, about = "Optimal bounds and minimax decision games over finite measure families")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Check a problem spec against the schema and feasibility probes.
    Validate {
        #[arg(long)]
        spec: PathBuf,
    },
    /// Solve a problem spec and write report files.
    Run {
        #[arg(long)]
        spec: PathBuf,
        /// Output directory for report.json and CSV sidecars.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
        /// Overrides the spec's solver seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for solver-internal parallelism (0 = automatic).
        #[arg(long, default_value_t = 0)]
        threads: usize,
        /// Overrides the spec's restart count.
        #[arg(long)]
        restarts: Option<usize>,
        /// Overrides the spec's convergence tolerance.
        #[arg(long)]
        tol: Option<f64>,
        /// Overrides the spec's iteration cap.
        #[arg(long)]
        max_iters: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { spec } => {
            let text = match std::fs::read_to_string(&spec) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", spec.display());
                    return ExitCode::from(1);
                }
            };
            match validate(&text) {
                Ok(parsed) => {
                    println!(
                        "ok: kind = {}, {} constraint(s), {} candidate(s)",
                        parsed.kind.name(),
                        parsed.admissible.constraints().len(),
                        parsed.members.len()
                    );
                    ExitCode::SUCCESS
                }
                Err(SpecError::Parse(msg)) => {
                    eprintln!("parse error: {msg}");
                    ExitCode::from(1)
                }
                Err(SpecError::Schema(diags)) => {
                    for d in diags {
                        eprintln!("{d}");
                    }
                    ExitCode::from(1)
                }
            }
        }
        Command::Run {
            spec,
            out,
            format,
            seed,
            threads,
            restarts,
            tol,
            max_iters,
        } => {
            if threads > 0 {
                // Restart streams are seeded independently, so the thread
                // count never changes the numbers.
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(threads)
                    .build_global();
            }
            let text = match std::fs::read_to_string(&spec) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", spec.display());
                    return ExitCode::from(1);
                }
            };
            let mut parsed = match validate(&text) {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(1);
                }
            };
            if let Some(s) = seed {
                parsed.solver.seed = s;
            }
            if let Some(r) = restarts {
                parsed.solver.restarts = r.max(1);
            }
            if let Some(t) = tol {
                parsed.solver.tol = t;
            }
            if let Some(m) = max_iters {
                parsed.solver.max_iters = m;
            }
            let echo: toml::Value = match toml::from_str(&text) {
                Ok(v) => v,
                Err(e) => {
                    eprintln!("parse error: {e}");
                    return ExitCode::from(1);
                }
            };
            let started = Instant::now();
            let outcome = match run(&parsed, echo) {
                Ok(o) => o,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            };
            let elapsed = started.elapsed().as_secs_f64();
            let out_format = match format {
                Format::Json => OutputFormat::Json,
                Format::Csv => OutputFormat::Csv,
            };
            if let Err(e) = write_outputs(&outcome, &out, out_format) {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
            println!(
                "{}: {} in {elapsed:.2} s -> {}",
                outcome.report.kind,
                if outcome.report.converged {
                    "converged"
                } else {
                    "best found (no certificate)"
                },
                out.join("report.json").display()
            );
            if outcome.report.converged {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
    }
}
