use std::path::PathBuf;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use tmri_core::losses::{LossConfig, LossKind};
use tmri_harness::dataset::Split;
use tmri_harness::{dataset, evaluate, registration, report, search, ExperimentConfig, InputRepr};

#[derive(Parser)]
#[command(name = "tmri", version, about = "Tag-fading registration benchmark")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; defaults apply to missing fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the input representation.
    #[arg(long, global = true)]
    input_repr: Option<InputRepr>,
    /// Overrides the similarity loss (its parameters reset to defaults unless the config already uses it).
    #[arg(long, global = true)]
    loss: Option<LossKind>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset of simulated movies.
    Simulate {
        #[arg(long)]
        out: PathBuf,
    },
    /// Register frame 0 against every later frame of the selected movies.
    Register {
        #[arg(long)]
        dataset: PathBuf,
        /// train, val or test; all movies when omitted.
        #[arg(long)]
        split: Option<Split>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score estimated fields against ground truth.
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
        /// Fields directory from `register`; repeat for several methods.
        #[arg(long, required = true)]
        fields: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Random hyperparameter search on the validation split.
    Search {
        #[arg(long)]
        dataset: PathBuf,
        /// Trials; defaults to the config's search budget.
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the ranked table of an evaluation and optionally export MPS maps.
    Report {
        /// Directory written by `evaluate`.
        #[arg(long)]
        report: PathBuf,
        #[arg(long, requires = "fields")]
        dataset: Option<PathBuf>,
        #[arg(long, requires = "dataset")]
        fields: Option<PathBuf>,
        /// Pair to export as `movie:frame`; repeatable.
        #[arg(long, value_parser = parse_pair)]
        pair: Vec<(usize, usize)>,
        /// Directory for PGM exports; defaults to the report directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (m, f) = s.split_once(':').ok_or("expected movie:frame")?;
    Ok((m.parse().map_err(|e| format!("{e}"))?, f.parse().map_err(|e| format!("{e}"))?))
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(repr) = common.input_repr {
        cfg.input_repr = repr;
    }
    if let Some(kind) = common.loss {
        if cfg.reg.loss.kind != kind {
            cfg.reg.loss = LossConfig::of(kind);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(jobs) = cli.common.jobs {
        #[cfg(feature = "parallel")]
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| anyhow::anyhow!("configuring the worker pool: {e}"))?;
        #[cfg(not(feature = "parallel"))]
        let _ = jobs;
    }
    let cfg = load_config(&cli.common)?;
    match cli.command {
        Command::Simulate { out } => {
            let m = dataset::cmd_simulate(&cfg, &out)?;
            println!("wrote {} movies to {}", m.movies.len(), out.display());
        }
        Command::Register { dataset, split, out } => {
            let m = registration::cmd_register(&dataset, &cfg, split, &out)?;
            let pairs: usize = m.movies.iter().map(|r| r.frames.len()).sum();
            println!("registered {pairs} pairs of {} movies with {}", m.movies.len(), m.method_key());
        }
        Command::Evaluate { dataset, fields, out } => {
            let r = evaluate::cmd_evaluate(&dataset, &fields, &out)?;
            println!("wrote {} rows to {}", r.rows.len(), out.display());
        }
        Command::Search { dataset, budget, out } => {
            let budget = budget.unwrap_or(cfg.search_budget);
            let o = search::cmd_search(&dataset, &cfg, cfg.reg.loss.kind, budget, cfg.seed, &out)?;
            let best = &o.trials[o.best];
            println!("best trial {} of {budget}: dice {:.4}, epe {:.4}", best.index, best.score.dice, best.score.epe);
            println!("{}", serde_json::to_string_pretty(&best.reg)?);
        }
        Command::Report { report: dir, dataset, fields, pair, out } => {
            print!("{}", report::cmd_report(&dir)?);
            if let (Some(dataset), Some(fields)) = (dataset, fields) {
                let out = out.unwrap_or_else(|| dir.clone());
                for (m, f) in pair {
                    for p in report::export_mps_maps(&dataset, &fields, m, f, &out)? {
                        println!("wrote {}", p.display());
                    }
                }
            }
        }
    }
    Ok(())
}
