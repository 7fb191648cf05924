use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use privnav::eval::table;
use privnav_cli::commands;
use privnav_cli::config::{Baseline, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "privnav", version = privnav_cli::VERSION, about = "Secret-shared multiview navigation pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Flat TOML file with run settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    parties: Option<usize>,
    #[arg(long, value_enum)]
    baseline: Option<Baseline>,
    /// Start from the small laptop profile instead of full size.
    #[arg(long)]
    desk_scale: bool,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write train and test episode records.
    GenData(Common),
    /// Train the network behind a baseline.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        all_baselines: bool,
    },
    /// Roll out a baseline on the test worlds.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        all_baselines: bool,
    },
    /// Time plaintext against secure forward passes of the action head.
    Bench(Common),
    /// Linear probe on camera features and on single shares of them.
    Attack(Common),
}

fn resolve(c: &Common) -> Result<RunConfig> {
    let o = Overrides {
        seed: c.seed,
        parties: c.parties,
        baseline: c.baseline,
        desk_scale: c.desk_scale,
        out_dir: c.out_dir.clone(),
    };
    Ok(RunConfig::load(c.config.as_deref(), &o)?)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(c) => {
            let cfg = resolve(&c)?;
            for p in commands::gen_data(&cfg)? {
                println!("wrote {}", p.display());
            }
        }
        Command::Train { common, all_baselines } => {
            let cfg = resolve(&common)?;
            if all_baselines {
                commands::train_all(&cfg)?;
            } else if let Some(p) = commands::train(&cfg, cfg.baseline)? {
                println!("wrote {}", p.display());
            }
        }
        Command::Eval { common, all_baselines } => {
            let cfg = resolve(&common)?;
            let outs = if all_baselines {
                commands::eval_all(&cfg)?
            } else {
                vec![commands::eval(&cfg, cfg.baseline)?]
            };
            let reports: Vec<_> = outs.iter().map(|o| o.report.clone()).collect();
            print!("{}", table(&reports));
        }
        Command::Bench(c) => {
            let cfg = resolve(&c)?;
            println!("{}", commands::bench(&cfg)?.to_line());
        }
        Command::Attack(c) => {
            let cfg = resolve(&c)?;
            println!("{}", commands::attack(&cfg)?.to_line());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(privnav_cli::exit_code(&e) as u8)
        }
    }
}
