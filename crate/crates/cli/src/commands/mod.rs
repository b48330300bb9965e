//! One module per pipeline stage.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use fsrc_core::encoder::{BridgeEncoder, Encoder, EncoderHandle, ToyEncoder};
use fsrc_core::evaluator::select_threshold;
use fsrc_core::sampler::PairExample;

use fsrc_core::provenance::sha256_hex;

use crate::artifacts::{self, parse_jsonl, read_meta, read_text, Context, Meta};
use crate::config::{EncoderKindSpec, ExperimentConfig};
use crate::failure::{Failure, Result};
use crate::Command;

mod data;
mod eval;
mod grid;
mod matrix;
mod report;
mod train;

pub use report::SUMMARY_HEADER;

pub fn dispatch(ctx: &Context, command: Command) -> Result<()> {
    match command {
        Command::Synth(args) => data::synth(ctx, &args),
        Command::Ingest(_) => data::ingest(ctx),
        Command::Split(_) => data::split(ctx),
        Command::Subset(_) => data::subset(ctx),
        Command::Pairs(args) => data::pairs(ctx, &args),
        Command::Episodes(args) => data::episodes(ctx, &args),
        Command::Train(args) => train::run(ctx, &args),
        Command::Eval(args) if args.grid => grid::run(ctx),
        Command::Eval(args) => eval::run(ctx, &args),
        Command::Matrix => matrix::run(ctx),
        Command::Report(args) => report::run(ctx, &args),
    }
}

/// Folds command flags into the config so the config hash reflects them.
pub fn apply_overrides(config: &mut ExperimentConfig, command: &Command) {
    fn set<T: Clone>(slot: &mut T, value: &Option<T>) {
        if let Some(v) = value {
            *slot = v.clone();
        }
    }
    match command {
        Command::Ingest(a) => {
            if a.corpus.is_some() {
                config.corpus = a.corpus.clone();
            }
        }
        Command::Split(a) => {
            set(&mut config.split.train_min_count, &a.train_min_count);
            set(&mut config.split.dev_relation_count, &a.dev_relation_count);
        }
        Command::Subset(a) => {
            let s = &mut config.subset;
            let chosen = a.min_count.is_some()
                || a.top_n.is_some()
                || a.random_n.is_some()
                || a.relations.is_some()
                || a.manifest.is_some();
            if chosen {
                s.min_count = a.min_count;
                s.top_n = a.top_n;
                s.random_n = a.random_n;
                s.relations = a.relations.clone();
                s.manifest = a.manifest.clone();
            }
            if a.cap.is_some() {
                s.cap = a.cap;
            }
        }
        Command::Pairs(a) => {
            set(&mut config.pairs.part, &a.part);
            set(&mut config.pairs.size, &a.size);
            set(&mut config.pairs.negative_fraction, &a.neg);
        }
        Command::Episodes(a) => {
            let e = &mut config.episodes;
            set(&mut e.part, &a.part);
            set(&mut e.m, &a.m);
            set(&mut e.k, &a.k);
            set(&mut e.q, &a.q);
            set(&mut e.nota_rate, &a.nota_rate);
            set(&mut e.count, &a.count);
        }
        Command::Train(a) => {
            set(&mut config.train.epochs, &a.epochs);
            set(&mut config.train.optimizer, &a.optimizer);
        }
        Command::Eval(a) => {
            if a.threshold.is_some() {
                config.eval.threshold = a.threshold;
            }
            if a.nota_threshold.is_some() {
                config.eval.nota_threshold = a.nota_threshold;
            }
            set(&mut config.eval.aggregation, &a.aggregation);
        }
        Command::Synth(_) | Command::Matrix | Command::Report(_) => {}
    }
}

/// A file argument, or the default artifact in the output directory.
fn input_path(ctx: &Context, arg: &Option<PathBuf>, default: &str) -> PathBuf {
    arg.clone().unwrap_or_else(|| ctx.path(default))
}

/// Records from a JSONL artifact plus the provenance of the command that
/// wrote them.
struct Input<T> {
    records: Vec<T>,
    sha256: String,
    meta: Option<Meta>,
}

fn load_input<T: serde::de::DeserializeOwned>(path: &Path, stage: &'static str) -> Result<Input<T>> {
    let text = read_text(path, stage)?;
    Ok(Input { records: parse_jsonl(&text)?, sha256: sha256_hex(text.as_bytes()), meta: read_meta(path)? })
}

fn load_pairs(path: &Path) -> Result<Input<PairExample>> {
    load_input(path, "pairs")
}

impl<T> Input<T> {
    fn corpus_hash(&self) -> String {
        self.meta.as_ref().map_or_else(|| "unknown".to_owned(), |m| m.corpus_hash.clone())
    }

    /// The file's content hash and its producer's provenance under `prefix.`.
    fn provenance(&self, prefix: &str, out: &mut BTreeMap<String, String>) {
        out.insert(format!("{prefix}.sha256"), self.sha256.clone());
        if let Some(meta) = &self.meta {
            out.insert(format!("{prefix}.config_hash"), meta.config_hash.clone());
            for (k, v) in &meta.provenance {
                out.insert(format!("{prefix}.{k}"), v.clone());
            }
        }
    }
}

/// The configured encoder: the toy checkpoint at `checkpoint`, or a bridge
/// process. Returns the encoder and provenance entries identifying it.
fn open_encoder(ctx: &Context, checkpoint: &Path) -> Result<(EncoderHandle, BTreeMap<String, String>)> {
    let mut provenance = BTreeMap::new();
    let handle = match ctx.config.encoder.kind {
        EncoderKindSpec::Toy => {
            if !checkpoint.exists() {
                return Err(Failure::MissingArtifact { path: checkpoint.to_path_buf(), stage: "train" });
            }
            let encoder = ToyEncoder::load(checkpoint)?;
            provenance.insert("checkpoint_id".into(), encoder.checkpoint_id());
            EncoderHandle::Toy(encoder)
        }
        EncoderKindSpec::Bridged => {
            let bridge = match &ctx.config.encoder.command {
                Some(cmd) => BridgeEncoder::spawn(cmd)?,
                None => BridgeEncoder::from_env()?,
            };
            provenance.insert("model_name".into(), bridge.handshake().model_name.clone());
            EncoderHandle::Bridged(bridge)
        }
    };
    provenance.insert("encoder_kind".into(), format!("{:?}", handle.kind()).to_lowercase());
    provenance.insert("encoder_dim".into(), handle.dim().to_string());
    Ok((handle, provenance))
}

/// A fixed threshold from the config, or one selected on dev pairs.
fn resolve_threshold(
    ctx: &Context,
    encoder: &dyn Encoder,
    fixed: Option<f64>,
    dev: &Option<PathBuf>,
    provenance: &mut BTreeMap<String, String>,
) -> Result<f64> {
    if let Some(t) = fixed {
        provenance.insert("threshold_source".into(), "config".into());
        return Ok(t);
    }
    let path = input_path(ctx, dev, &artifacts::pairs_file("dev"));
    let dev_pairs = load_pairs(&path)?;
    dev_pairs.provenance("dev", provenance);
    provenance.insert("threshold_source".into(), "dev".into());
    Ok(select_threshold(encoder, &dev_pairs.records)?)
}
