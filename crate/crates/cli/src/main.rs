use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ucover_cli::{cmd_export, cmd_fixture, cmd_plan, cmd_validate, exit_code, ValidateOptions, EXIT_FAILED, EXIT_OK};
use ucover_core::io::Overrides;

/// Chance-constrained coverage planning for a camera-carrying UAV.
#[derive(Parser)]
#[command(name = "ucover", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a built-in mission (paper-full, paper-small, single-waypoint, corridor).
    Fixture {
        name: String,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Solve a mission and write the plan.
    Plan {
        mission: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long)]
        delta_w: Option<f64>,
        #[arg(long)]
        delta_o: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        multistarts: Option<usize>,
        /// Planning horizon in steps.
        #[arg(short = 'T')]
        horizon: Option<usize>,
    },
    /// Monte-Carlo check of a plan against its chance constraints.
    Validate {
        mission: PathBuf,
        plan: PathBuf,
        #[arg(short = 'S', default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Sample without initial or process noise.
        #[arg(long)]
        zero_noise: bool,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Write plot data as CSV.
    Export {
        plan: PathBuf,
        /// trajectory, ellipsoids, fov, mesh or all.
        #[arg(long)]
        what: String,
        #[arg(short, long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    match cli.command {
        Command::Fixture { name, out } => {
            cmd_fixture(&name, &out)?;
            println!("wrote {}", out.display());
            Ok(EXIT_OK)
        }
        Command::Plan {
            mission,
            out,
            delta_w,
            delta_o,
            seed,
            multistarts,
            horizon,
        } => {
            let overrides = Overrides {
                delta_w,
                delta_o,
                horizon,
                seed,
                multistarts,
            };
            let o = cmd_plan(&mission, &out, &overrides)?;
            print!("{}", o.summary());
            if o.ok() {
                println!("wrote {}", out.display());
                Ok(EXIT_OK)
            } else {
                eprintln!("no feasible plan found; nothing written");
                Ok(EXIT_FAILED)
            }
        }
        Command::Validate {
            mission,
            plan,
            samples,
            seed,
            zero_noise,
            out,
        } => {
            let opts = ValidateOptions {
                samples,
                seed,
                zero_noise,
            };
            let o = cmd_validate(&mission, &plan, &opts, &out)?;
            print!("{}", o.summary);
            Ok(if o.ok() { EXIT_OK } else { EXIT_FAILED })
        }
        Command::Export { plan, what, out } => {
            for p in cmd_export(&plan, &what, &out)? {
                println!("wrote {}", p.display());
            }
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            // core errors already carry their source in the message
            let mut msg = e.to_string();
            for cause in e.chain().skip(1) {
                let c = cause.to_string();
                if !msg.contains(&c) {
                    msg = format!("{msg}: {c}");
                }
            }
            eprintln!("error: {msg}");
            ExitCode::from(exit_code(&e))
        }
    }
}
