use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use modeheat_cli::error::{EXIT_FAIL, EXIT_OK};
use modeheat_cli::output::{modeheat_version, RNG_NAME};
use modeheat_cli::{run_path, schema, RunOptions, Verdict};

#[derive(Parser)]
#[command(name = "modeheat", about = "Heat transfer through thermally driven mechanical modes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Print the config JSON schema.
    Schema,
    /// Print versions.
    Version,
}

fn code(n: i32) -> ExitCode {
    ExitCode::from(n as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return code(EXIT_OK);
        }
        Err(e) => {
            eprint!("code=2 {e}");
            return code(2);
        }
    };
    match cli.command {
        Command::Schema => {
            println!("{}", schema());
            code(EXIT_OK)
        }
        Command::Version => {
            println!("modeheat {}", modeheat_version());
            println!("modeheat-cli {}", env!("CARGO_PKG_VERSION"));
            println!("rng {RNG_NAME}");
            code(EXIT_OK)
        }
        Command::Run { config, seed, out, threads } => match run_path(&config, &RunOptions { seed, out, threads }) {
            Ok(report) => {
                for w in &report.outcome.warnings {
                    eprintln!("code=0 warning: {w}");
                }
                let verdict = report.outcome.verdict();
                println!("{verdict} {}", report.directory.display());
                for c in report.outcome.failed() {
                    println!("  FAIL {}: {}", c.name, c.detail);
                }
                if verdict == Verdict::Pass {
                    code(EXIT_OK)
                } else {
                    eprintln!("code={EXIT_FAIL} error: verdict FAIL");
                    code(EXIT_FAIL)
                }
            }
            Err(e) => {
                eprintln!("code={} error: {e}", e.exit_code());
                code(e.exit_code())
            }
        },
    }
}
