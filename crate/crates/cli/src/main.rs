use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use sms_access_core::pipeline::{self, demo, RunConfig, RunManifest, Stage};

/// Public-transport accessibility with shared-mobility feeder lines.
#[derive(Parser)]
#[command(name = "sms-access", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the hexagon grid and attach opportunities.
    Tessellate(StageArgs),
    /// Ingest observations and krige wait and in-vehicle surfaces.
    Estimate(StageArgs),
    /// Turn the surfaces into virtual lines merged into the base feed.
    Synthesize(StageArgs),
    /// Compute baseline and merged travel-time matrices.
    Route(StageArgs),
    /// Score accessibility for both matrices.
    Score(StageArgs),
    /// Compare scores and write the improvement layer.
    Compare(StageArgs),
    /// Run every stage.
    Run(StageArgs),
    /// Write the synthetic demo scenario, optionally running it.
    Demo {
        /// Directory to write the scenario into.
        dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Run the full pipeline on the scenario afterwards.
        #[arg(long)]
        run: bool,
        #[arg(long)]
        workers: Option<usize>,
    },
}

#[derive(Args)]
struct StageArgs {
    /// TOML run configuration.
    #[arg(long, short)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory; overrides the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Recompute stages even when their inputs are unchanged.
    #[arg(long)]
    force: bool,
    /// Time budget in seconds.
    #[arg(long)]
    tau: Option<f64>,
    /// Hexagon side in meters.
    #[arg(long)]
    hex_side: Option<f64>,
    /// Timeslot length in seconds.
    #[arg(long)]
    slot_length: Option<u32>,
    /// 1 for headway lines, 2 for on-demand trips at each departure sample.
    #[arg(long)]
    system_type: Option<u8>,
}

impl StageArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut c = RunConfig::load(&self.config)?;
        if let Some(v) = self.seed {
            c.rng_seed = v;
        }
        if let Some(v) = self.workers {
            c.workers = Some(v);
        }
        if let Some(v) = &self.out {
            c.paths.out = v.clone();
        }
        if let Some(v) = self.tau {
            c.tau = v;
        }
        if let Some(v) = self.hex_side {
            c.hex_side = v;
        }
        if let Some(v) = self.slot_length {
            c.slot_length = v;
        }
        if let Some(v) = self.system_type {
            c.system_type = v;
        }
        Ok(c)
    }
}

fn report(m: &RunManifest, out: &std::path::Path) {
    for s in &m.stages {
        println!("{:<11} {:<8} {:>8.2}s", s.stage, format!("{:?}", s.status).to_lowercase(), s.seconds);
    }
    let warnings = m.warnings().count();
    if warnings > 0 {
        println!("{warnings} warnings, see {}", out.join(pipeline::MANIFEST_FILE).display());
    }
    println!("outputs in {}", out.display());
}

fn run_stage(args: &StageArgs, stage: Stage) -> Result<()> {
    let cfg = args.config()?;
    let m = pipeline::run(&cfg, stage, args.force).with_context(|| format!("{stage} did not complete"))?;
    report(&m, &cfg.paths.out);
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SMS_ACCESS_LOG", "warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Tessellate(a) => run_stage(&a, Stage::Tessellate),
        Command::Estimate(a) => run_stage(&a, Stage::Estimate),
        Command::Synthesize(a) => run_stage(&a, Stage::Synthesize),
        Command::Route(a) => run_stage(&a, Stage::Route),
        Command::Score(a) => run_stage(&a, Stage::Score),
        Command::Compare(a) | Command::Run(a) => run_stage(&a, Stage::Compare),
        Command::Demo { dir, seed, run, workers } => {
            let mut s = demo::write_demo(&dir, seed)?;
            println!("scenario written to {}", s.config_path.display());
            if run {
                s.config.workers = workers;
                let m = pipeline::run(&s.config, Stage::Compare, false)?;
                report(&m, &s.config.paths.out);
            }
            Ok(())
        }
    }
}
