//! Cross-dataset transfer: an encoder trained on each dataset, scored on the
//! episodes of every dataset.

use std::collections::{BTreeMap, BTreeSet};

use fsrc_core::corpus::{load_corpus, Corpus};
use fsrc_core::encoder::{train_toy, ToyEncoder};
use fsrc_core::evaluator::{cross_dataset_matrix, select_threshold, MatrixEntry};
use fsrc_core::par;
use fsrc_core::provenance::sha256_hex;
use fsrc_core::report::{matrix_long_tsv, matrix_wide_tsv};
use fsrc_core::sampler::{generate_episode_batch, generate_pairs, Episode};
use fsrc_core::splitter::{frequency_split, PartName};
use fsrc_core::synth::{self, SynthConfig};

use crate::artifacts::{self, write_json, write_with_meta, Context};
use crate::config::{DatasetSpec, EncoderKindSpec};
use crate::failure::{Failure, Result};
use crate::results::{MatrixDataset, MatrixDoc, ResultDoc};

pub const TABLE: &str = "matrix.tsv";
pub const TABLE_LONG: &str = "matrix-long.tsv";

struct Prepared {
    info: MatrixDataset,
    encoder: ToyEncoder,
    episodes: Vec<Episode>,
}

fn load(ctx: &Context, spec: &DatasetSpec) -> Result<Corpus> {
    match (&spec.corpus, spec.synth_seed) {
        (Some(path), _) => Ok(load_corpus(path, ctx.config.strict)?.corpus),
        (None, Some(seed)) => Ok(synth::generate(&SynthConfig { seed, ..ctx.config.synth.clone() })?),
        (None, None) => Err(Failure::Config(format!("dataset {:?} needs a corpus path or a synth_seed", spec.id))),
    }
}

fn prepare(ctx: &Context, spec: &DatasetSpec) -> Result<Prepared> {
    let m = &ctx.config.matrix;
    let corpus = load(ctx, spec)?;
    let corpus_hash = sha256_hex(corpus.to_jsonl_string().as_bytes());
    let split = frequency_split(&corpus, &ctx.config.split.to_core())?;
    let stage = |name: &str| ctx.seed(&format!("matrix/{}/{name}", spec.id));

    let mut pairs_spec = ctx.config.pairs.clone();
    pairs_spec.size = m.train_pairs;
    let train = generate_pairs(&split.train.corpus, &pairs_spec.to_core(stage("train-pairs")), &ctx.config.markers)?;
    pairs_spec.size = m.dev_pairs;
    let dev = generate_pairs(&split.dev.corpus, &pairs_spec.to_core(stage("dev-pairs")), &ctx.config.markers)?;
    let (encoder, _) = train_toy(
        &train,
        &ctx.config.train.to_core(stage("train")),
        &ctx.config.encoder.toy_params(stage("init")),
        &[],
    )?;
    let nota_threshold = match ctx.config.eval.nota_threshold {
        Some(t) => t,
        None => select_threshold(&encoder, &dev)?,
    };

    let mut episodes = Vec::new();
    for &k in &m.ks {
        let mut ep = ctx.config.episodes.clone();
        ep.k = k;
        let config = ep.to_core(stage(&format!("episodes/k{k}")));
        episodes.extend(generate_episode_batch(
            &split.part(PartName::Test).corpus,
            &config,
            m.episodes_per_k,
            &ctx.config.markers,
        )?);
    }
    log::info!("prepared dataset {} ({} instances)", spec.id, corpus.len());
    Ok(Prepared {
        info: MatrixDataset {
            id: spec.id.clone(),
            corpus_hash,
            checkpoint_id: encoder.checkpoint_id(),
            nota_threshold,
        },
        encoder,
        episodes,
    })
}

pub fn run(ctx: &Context) -> Result<()> {
    if ctx.config.encoder.kind != EncoderKindSpec::Toy {
        return Err(Failure::Config("the matrix trains toy encoders; set encoder.kind = \"toy\"".into()));
    }
    let specs = &ctx.config.matrix.datasets;
    if specs.is_empty() {
        return Err(Failure::Config("the matrix needs at least one [[matrix.datasets]] entry".into()));
    }
    let ids: BTreeSet<&str> = specs.iter().map(|d| d.id.as_str()).collect();
    if ids.len() != specs.len() || ids.contains("") {
        return Err(Failure::Config("matrix dataset ids must be unique and non-empty".into()));
    }

    let prepared = par::try_map(specs, |spec| prepare(ctx, spec))?;
    let entries: BTreeMap<String, MatrixEntry> = prepared
        .iter()
        .map(|p| (p.info.id.clone(), MatrixEntry { encoder: &p.encoder, nota_threshold: p.info.nota_threshold }))
        .collect();
    let suites: BTreeMap<String, Vec<Episode>> =
        prepared.iter().map(|p| (p.info.id.clone(), p.episodes.clone())).collect();
    let cells = cross_dataset_matrix(&entries, &suites, ctx.config.eval.aggregation)?;

    let mut datasets: Vec<MatrixDataset> = prepared.into_iter().map(|p| p.info).collect();
    datasets.sort_by(|a, b| a.id.cmp(&b.id));
    let listing: String = datasets.iter().map(|d| format!("{}:{}\n", d.id, d.corpus_hash)).collect();
    let corpus_hash = sha256_hex(listing.as_bytes());

    let wide = matrix_wide_tsv(&cells)?;
    print!("{wide}");
    let provenance = datasets.iter().map(|d| (format!("{}.corpus_hash", d.id), d.corpus_hash.clone())).collect();
    let meta = ctx.meta("matrix", &corpus_hash, provenance);
    write_with_meta(&ctx.path(TABLE), &wide, &meta)?;
    write_with_meta(&ctx.path(TABLE_LONG), &matrix_long_tsv(&cells), &meta)?;
    let doc = MatrixDoc { config_hash: ctx.config_hash.clone(), corpus_hash, datasets, cells };
    write_json(&ctx.path(artifacts::MATRIX), &ResultDoc::Matrix(doc))
}
