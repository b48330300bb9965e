//! The `fsrc` command line: stage-separated pipeline commands over a shared
//! output directory.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use fsrc_core::encoder::Optimizer;
use fsrc_core::evaluator::Aggregation;
use fsrc_core::splitter::PartName;

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod failure;
pub mod results;

pub use failure::{Failure, Result};

#[derive(Parser, Debug)]
#[command(name = "fsrc", version, about = "Few-shot relation classification benchmark toolkit")]
pub struct Cli {
    /// TOML experiment config; flags override its fields.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Master seed; every stage derives its own seed from it.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Worker threads (0 uses every core).
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<usize>,
    /// Output directory shared by all commands (default `fsrc-out`).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Fail on the first malformed corpus line instead of skipping it.
    #[arg(long, global = true)]
    pub strict: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a templated synthetic corpus.
    Synth(SynthArgs),
    /// Validate a corpus and cache it with a relation histogram.
    Ingest(IngestArgs),
    /// Split relations into train, dev and test by frequency.
    Split(SplitArgs),
    /// Select a diversity-controlled subset of the train relations.
    Subset(SubsetArgs),
    /// Sample a SAME/DIFFERENT pair dataset from one split part.
    Pairs(PairsArgs),
    /// Sample M-way K-shot episodes from one split part.
    Episodes(EpisodesArgs),
    /// Train the toy encoder on a pair dataset.
    Train(TrainArgs),
    /// Evaluate pairs or episodes, or run the relation-diversity grid.
    Eval(EvalArgs),
    /// Train on every dataset and evaluate on every other.
    Matrix,
    /// Merge result files into tables and figure series.
    Report(ReportArgs),
}

#[derive(Args, Debug, Default)]
pub struct SynthArgs {
    /// Output file name inside the output directory.
    #[arg(long, default_value = "synth.jsonl")]
    pub name: String,
}

#[derive(Args, Debug, Default)]
pub struct IngestArgs {
    /// Corpus JSONL file; defaults to the config's `corpus`.
    pub corpus: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
pub struct SplitArgs {
    #[arg(long)]
    pub train_min_count: Option<usize>,
    #[arg(long)]
    pub dev_relation_count: Option<usize>,
}

#[derive(Args, Debug, Default)]
pub struct SubsetArgs {
    #[arg(long, conflicts_with_all = ["top_n", "random_n", "relations", "manifest"])]
    pub min_count: Option<usize>,
    #[arg(long, conflicts_with_all = ["random_n", "relations", "manifest"])]
    pub top_n: Option<usize>,
    #[arg(long, conflicts_with_all = ["relations", "manifest"])]
    pub random_n: Option<usize>,
    /// Comma-separated relation labels.
    #[arg(long, value_delimiter = ',', conflicts_with = "manifest")]
    pub relations: Option<Vec<String>>,
    /// Reuse the relations of a subset manifest from an earlier run.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Keep at most this many instances, stratified by relation.
    #[arg(long)]
    pub cap: Option<usize>,
}

#[derive(Args, Debug, Default)]
pub struct PairsArgs {
    #[arg(long)]
    pub part: Option<PartName>,
    #[arg(long)]
    pub size: Option<usize>,
    /// Fraction of DIFFERENT pairs.
    #[arg(long)]
    pub neg: Option<f64>,
    /// Output is `pairs-<name>.jsonl`; defaults to the part name.
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Args, Debug, Default)]
pub struct EpisodesArgs {
    #[arg(long)]
    pub part: Option<PartName>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub q: Option<usize>,
    #[arg(long)]
    pub nota_rate: Option<f64>,
    #[arg(long)]
    pub count: Option<usize>,
    /// Output is `episodes-<name>.jsonl`; defaults to the part name.
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Args, Debug, Default)]
pub struct TrainArgs {
    /// Training pairs; defaults to `pairs-train.jsonl`.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    /// Dev pairs for the learning curve; defaults to `pairs-dev.jsonl` if present.
    #[arg(long)]
    pub dev: Option<PathBuf>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub optimizer: Option<Optimizer>,
}

#[derive(Args, Debug, Default)]
pub struct EvalArgs {
    /// Run the relation-diversity grid from the config's `[grid]` section.
    #[arg(long, conflicts_with_all = ["episodes", "pairs"])]
    pub grid: bool,
    /// Evaluate these episodes instead of pairs.
    #[arg(long)]
    pub episodes: Option<PathBuf>,
    /// Test pairs; defaults to `pairs-test.jsonl`.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    /// Dev pairs for threshold selection; defaults to `pairs-dev.jsonl`.
    #[arg(long)]
    pub dev: Option<PathBuf>,
    /// Toy encoder checkpoint; defaults to `encoder.ckpt`.
    #[arg(long)]
    pub encoder: Option<PathBuf>,
    /// Fixed pair decision threshold instead of one selected on dev pairs.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Fixed NOTA threshold for episodes instead of one selected on dev pairs.
    #[arg(long)]
    pub nota_threshold: Option<f64>,
    /// How support similarities of a class combine: mean or max.
    #[arg(long)]
    pub aggregation: Option<Aggregation>,
}

#[derive(Args, Debug, Default)]
pub struct ReportArgs {
    /// Result JSON files written by `train`, `eval` or `matrix`.
    pub files: Vec<PathBuf>,
    /// Merge results even when their corpus hashes differ.
    #[arg(long)]
    pub force: bool,
}

/// Runs one command to completion.
pub fn run(cli: Cli) -> Result<()> {
    let ctx = artifacts::Context::new(&cli)?;
    let workers = ctx.config.workers;
    fsrc_core::par::with_workers(workers, move || commands::dispatch(&ctx, cli.command))
}
