use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use tb::config::{validate_text, ConfigError, Diagnostic};
use tb::{execute, prepare, thread_count, RunError, RunOptions};

#[derive(Parser)]
#[command(name = "tb", version, about = "Beam propagation studies in power-law random media")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the study described by a config file
    Run {
        config: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check a config and print it with defaults filled in
    Validate { config: PathBuf },
    /// Print the Kolmogorov constants table
    Constants,
}

fn read(path: &PathBuf) -> Result<String, RunError> {
    std::fs::read_to_string(path).map_err(|e| {
        RunError::Config(ConfigError(vec![Diagnostic {
            line: None,
            field: path.display().to_string(),
            message: e.to_string(),
        }]))
    })
}

fn fail(e: RunError) -> ExitCode {
    eprintln!("{e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Run { config, threads, out, seed } => {
            let text = match read(&config) {
                Ok(t) => t,
                Err(e) => return fail(e),
            };
            let cfg = match prepare(&text, &RunOptions { threads, out, seed }) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            let m = match execute(&cfg, thread_count(threads)) {
                Ok(m) => m,
                Err(e) => return fail(e),
            };
            for g in &m.gates {
                println!("{} {}", if g.pass { "PASS" } else { "FAIL" }, g.describe());
            }
            for g in &m.reports {
                println!("INFO {} ({})", g.describe(), if g.pass { "holds" } else { "does not hold" });
            }
            println!("{}: {} in {:.1} s, output {}", m.study, if m.pass { "pass" } else { "FAIL" }, m.wall_time_s, cfg.output.unwrap_or_default());
            if m.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Cmd::Validate { config } => {
            let text = match read(&config) {
                Ok(t) => t,
                Err(e) => return fail(e),
            };
            match validate_text(&text) {
                Ok(v) => {
                    for n in &v.notes {
                        eprintln!("note: {n}");
                    }
                    print!("{}", v.config.to_toml());
                    ExitCode::SUCCESS
                }
                Err(e) => fail(RunError::Config(e)),
            }
        }
        Cmd::Constants => match tb::studies::kolmogorov_report() {
            Ok((_, table)) => {
                print!("{table}");
                ExitCode::SUCCESS
            }
            Err(e) => fail(RunError::Resource(e.to_string())),
        },
    }
}
