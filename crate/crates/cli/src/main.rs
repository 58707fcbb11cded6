//! Command-line front end: runs scenario files and writes CSV tables.

mod commands;
mod config;
mod error;
mod output;
mod presets;
mod units;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Context;
use crate::config::ScenarioConfig;
use crate::error::CliError;
use crate::output::{Manifest, OutDir};

#[derive(Parser)]
#[command(name = "levirotor", version, about = "Charged nanorotors in Paul traps coupled to RLC circuits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the full equations of motion.
    Simulate(Common),
    /// Circuit damping rate against frequency, plus friction and diffusion tensors.
    Rates(Common),
    /// Pseudopotential minima, a line scan and stability parameters.
    Pseudopotential(Common),
    /// Analytic spectra of the linearized model for every stage.
    Psd(Common),
    /// Stochastic cooling runs of the linearized model.
    Cool(Common),
    /// List presets, or print one.
    Presets { name: Option<String> },
}

#[derive(Args)]
struct Common {
    /// Scenario file.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in scenario.
    #[arg(long)]
    preset: Option<String>,
    /// Overrides `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for ensembles; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Output directory.
    #[arg(long, env = "LEVIROTOR_OUT", default_value = "levirotor-out")]
    out: PathBuf,
    /// `section.key=value`, value in TOML syntax. Repeatable.
    #[arg(long = "override", short = 'o')]
    overrides: Vec<String>,
}

fn load(common: &Common) -> Result<(ScenarioConfig, String), CliError> {
    let (text, source) = match (&common.config, &common.preset) {
        (Some(path), _) => (fs::read_to_string(path)?, path.display().to_string()),
        (None, Some(name)) => {
            let p = presets::find(name).ok_or_else(|| CliError::Config(format!("unknown preset {name:?}")))?;
            (p.text.to_string(), format!("preset:{name}"))
        }
        (None, None) => return Err(CliError::Config("need --config or --preset".into())),
    };
    let mut overrides = common.overrides.clone();
    if let Some(seed) = common.seed {
        overrides.push(format!("run.seed={seed}"));
    }
    Ok((ScenarioConfig::from_text(&text, &overrides)?, source))
}

fn run(name: &str, common: &Common, f: fn(&mut Context) -> Result<u8, CliError>) -> Result<u8, CliError> {
    let (cfg, source) = load(common)?;
    let manifest = Manifest::new(name, &source, &cfg.hash(), cfg.run.seed);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.jobs)
        .build()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let out = OutDir::create(&common.out)?;
    let mut ctx = Context { cfg, manifest, out, pool };
    let code = f(&mut ctx)?;
    let Context { cfg, manifest, out, .. } = ctx;
    out.finish(&manifest, &cfg.normalized())?;
    Ok(code)
}

fn dispatch(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Simulate(c) => run("simulate", &c, commands::simulate),
        Command::Rates(c) => run("rates", &c, commands::rates),
        Command::Pseudopotential(c) => run("pseudopotential", &c, commands::pseudopotential),
        Command::Psd(c) => run("psd", &c, commands::psd),
        Command::Cool(c) => run("cool", &c, commands::cool),
        Command::Presets { name: None } => {
            for p in &presets::PRESETS {
                println!("{:<6} {}", p.name, p.summary);
            }
            Ok(0)
        }
        Command::Presets { name: Some(name) } => {
            let p = presets::find(&name).ok_or_else(|| CliError::Config(format!("unknown preset {name:?}")))?;
            print!("{}", p.text);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("levirotor: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
