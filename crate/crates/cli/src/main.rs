mod config;
mod error;
mod run;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use curved_chsh::scenario::build_geometry;

use crate::error::{exit, CliError};
use crate::run::Context;

#[derive(Parser)]
#[command(name = "curved-chsh", version, about = "CHSH measurement dynamics on curved spacetimes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and check a config and build its geometry; writes nothing.
    Validate {
        /// JSON config file.
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run one computation and write its reports.
    Run {
        #[arg(value_enum)]
        target: Target,
        /// JSON config file.
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Target {
    Geometry,
    Probabilities,
    Inverse,
    Sweep,
    Worldviews,
}

#[derive(Args)]
struct Overrides {
    /// Seed for Monte Carlo and random measures.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Quadrature nodes for dynamics and sweeps.
    #[arg(long)]
    nodes: Option<usize>,
    /// Worker threads; results do not depend on it.
    #[arg(long, env = "CURVED_CHSH_THREADS")]
    threads: Option<usize>,
}

fn load(path: &Path, o: Overrides) -> Result<Context, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
    let mut config = config::parse(&text)?;
    config.apply_overrides(o.seed, o.nodes, o.out);
    config.validate()?;
    if o.threads == Some(0) {
        return Err(CliError::schema("--threads", "must be at least 1"));
    }
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Context { config, base, threads: o.threads })
}

fn validate(ctx: &Context) -> Result<i32, CliError> {
    let c = &ctx.config;
    let blocks: Vec<&str> = [
        ("spacetime", c.spacetime.is_some()),
        ("scenario", c.scenario.is_some()),
        ("dynamics", c.dynamics.is_some()),
        ("inverse", c.inverse.is_some()),
        ("sweep", c.sweep.is_some()),
        ("worldviews", c.worldviews.is_some()),
    ]
    .into_iter()
    .filter_map(|(n, present)| present.then_some(n))
    .collect();
    let geometry = if c.spacetime.is_some() && c.scenario.is_some() {
        let (st, cfg) = ctx.geometry_inputs("validate")?;
        build_geometry(&st, cfg)?;
        Some("ok")
    } else {
        None
    };
    println!("{}", json!({ "valid": true, "blocks": blocks, "geometry": geometry }));
    Ok(exit::OK)
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Validate { config, overrides } => validate(&load(&config, overrides)?),
        Command::Run { target, config, overrides } => {
            let ctx = load(&config, overrides)?;
            ctx.write_resolved()?;
            match target {
                Target::Geometry => run::geometry(&ctx),
                Target::Probabilities => run::probabilities(&ctx),
                Target::Inverse => run::inverse(&ctx),
                Target::Sweep => run::sweep(&ctx),
                Target::Worldviews => run::worldviews(&ctx),
            }
        }
    }
}

fn main() -> ExitCode {
    let code = match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.code()
        }
    };
    ExitCode::from(code as u8)
}
