use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use nlufb::pipeline::{self, Manifest, PipelineConfig, Stage};
use nlufb::Error;

#[derive(Parser, Debug)]
#[command(name = "nlufb", version, about = "Curate NLU supervision from implicit user feedback in dialog logs")]
struct Cli {
    /// TOML pipeline config; built-in defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Target precision for threshold search.
    #[arg(long, global = true)]
    lambda: Option<f64>,
    /// Threshold search tolerance.
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate week-1 and week-2 traffic, or import the configured logs.
    Simulate,
    /// Label defects and rephrases.
    Annotate,
    /// Train the defect identification model.
    TrainDim,
    /// Calibrate the threshold and select target defects.
    SelectTargets,
    /// Build rephrase-derived training data and train the correction model.
    TrainDcm,
    /// Assemble the curated supervision dataset.
    Curate,
    /// Train the final re-ranker on curated data.
    TrainReranker,
    /// Shadow-evaluate the re-ranker on week-2 traffic.
    Evaluate,
    /// Run every stage in order.
    RunAll,
    /// Re-run from a stage onward, reusing verified upstream artifacts.
    Resume {
        /// First stage to re-run.
        #[arg(long, value_name = "STAGE")]
        from: Stage,
    },
}

impl Command {
    fn range(&self) -> (Stage, Stage) {
        let single = |s| (s, s);
        match self {
            Command::Simulate => single(Stage::Simulate),
            Command::Annotate => single(Stage::Annotate),
            Command::TrainDim => single(Stage::TrainDim),
            Command::SelectTargets => single(Stage::SelectTargets),
            Command::TrainDcm => single(Stage::TrainDcm),
            Command::Curate => single(Stage::Curate),
            Command::TrainReranker => single(Stage::TrainReranker),
            Command::Evaluate => single(Stage::Evaluate),
            Command::RunAll => (Stage::Simulate, Stage::Evaluate),
            Command::Resume { from } => (*from, Stage::Evaluate),
        }
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.paths.out_dir = out.clone();
    }
    if let Some(l) = cli.lambda {
        cfg.dim.lambda = l;
    }
    if let Some(e) = cli.epsilon {
        cfg.dim.epsilon = e;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn report(cfg: &PipelineConfig, to: Stage, manifest: &Manifest) -> anyhow::Result<()> {
    let record = manifest.stage(to).context("manifest lacks the last stage")?;
    if to == Stage::Evaluate {
        let table = std::fs::read_to_string(cfg.paths.out_dir.join(pipeline::EVAL_TABLE))?;
        print!("{table}");
    } else {
        println!("{}", serde_json::to_string_pretty(&record.summary)?);
    }
    println!("manifest: {}", cfg.paths.out_dir.join(pipeline::MANIFEST).display());
    Ok(())
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let cfg = load_config(cli)?;
    let (from, to) = cli.command.range();
    let manifest = pipeline::run_stages(&cfg, from, to)?;
    report(&cfg, to, &manifest)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Error>() {
                Some(Error::Config(_)) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
