use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::Parser;

use emojisem::config::RunConfig;
use emojisem::pipeline::{run_pipeline, RunOptions, Selection};

/// Cross-cultural emoji semantics pipeline.
#[derive(Parser, Debug)]
#[command(version, about)]
struct Cli {
    /// Stage to run: ingest, train, project, analyze, report or all
    stage: Option<Selection>,

    /// Run configuration (TOML)
    #[arg(long, short)]
    config: PathBuf,

    /// Stage to run; same as the positional argument
    #[arg(long = "stage", value_name = "NAME")]
    stage_flag: Option<Selection>,

    /// Single-worker seeded training with reproducible output
    #[arg(long)]
    deterministic: bool,

    /// Worker threads (default: all cores)
    #[arg(long, value_name = "N")]
    threads: Option<usize>,

    /// Output directory, overriding the config
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();

    let selection = match (cli.stage, cli.stage_flag) {
        (Some(a), Some(b)) if a != b => bail!("conflicting stages given positionally and with --stage"),
        (a, b) => a.or(b).unwrap_or(Selection::All),
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring thread pool")?;
    }
    let config = RunConfig::load(&cli.config).with_context(|| format!("loading {}", cli.config.display()))?;
    let opts = RunOptions {
        deterministic: cli.deterministic,
        threads: cli.threads.unwrap_or(0),
    };
    let manifest = run_pipeline(config, cli.out, opts, selection)?;
    for w in &manifest.warnings {
        eprintln!("warning: {w}");
    }
    for (id, c) in &manifest.counts {
        println!(
            "{id}: read {} malformed {} language {} country {} retweet {} tokenized {}",
            c.read, c.malformed, c.after_language, c.after_country, c.after_retweet, c.tokenized
        );
    }
    Ok(())
}
