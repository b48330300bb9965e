//! Corpus preparation: synthesis, ingestion, splitting, subsetting and sampling.

use std::collections::BTreeMap;

use fsrc_core::corpus::{histogram, load_corpus, Corpus, RelationLabel};
use fsrc_core::provenance::sha256_hex;
use fsrc_core::sampler::{generate_episode_batch, generate_pairs};
use fsrc_core::splitter::{
    cap_examples, diversity_subset, explicit_subset, frequency_split, random_n_relations, top_n_relations, PartName,
    SubsetManifest, TrainSubset,
};
use fsrc_core::synth;
use serde::Serialize;

use crate::artifacts::{
    self, episodes_file, jsonl_string, pairs_file, read_text, write_json, write_with_meta, Context, SplitDoc, SubsetDoc,
};
use crate::failure::{Failure, Result};
use crate::{EpisodesArgs, PairsArgs, SynthArgs};

pub fn synth(ctx: &Context, args: &SynthArgs) -> Result<()> {
    let corpus = synth::generate(&ctx.config.synth)?;
    let text = corpus.to_jsonl_string();
    let path = ctx.path(&args.name);
    let provenance = BTreeMap::from([("synth_seed".to_owned(), ctx.config.synth.seed.to_string())]);
    write_with_meta(&path, &text, &ctx.meta("synth", &sha256_hex(text.as_bytes()), provenance))?;
    println!("instances {} relations {} -> {}", corpus.len(), corpus.relation_count(), path.display());
    Ok(())
}

#[derive(Serialize)]
struct IngestDoc<'a> {
    config_hash: &'a str,
    corpus_hash: &'a str,
    source_sha256: &'a str,
    instances: usize,
    relations: usize,
    skipped: usize,
    problems: Vec<Problem>,
    histogram: Vec<(&'a RelationLabel, usize)>,
}

#[derive(Serialize)]
struct Problem {
    line: usize,
    reason: String,
}

pub fn ingest(ctx: &Context) -> Result<()> {
    let source = ctx
        .config
        .corpus
        .clone()
        .ok_or_else(|| Failure::Config("no corpus given: pass a path or set `corpus` in the config".into()))?;
    let ingested = load_corpus(&source, ctx.config.strict)?;
    for (line, reason) in &ingested.problems {
        log::warn!("skipped line {line}: {reason}");
    }
    let source_sha256 = sha256_hex(&std::fs::read(&source).map_err(|e| Failure::io(&source, e))?);
    let text = ingested.corpus.to_jsonl_string();
    let corpus_hash = sha256_hex(text.as_bytes());
    let provenance = BTreeMap::from([("source_sha256".to_owned(), source_sha256.clone())]);
    write_with_meta(&ctx.path(artifacts::CORPUS), &text, &ctx.meta("ingest", &corpus_hash, provenance))?;
    let hist = histogram(&ingested.corpus);
    let doc = IngestDoc {
        config_hash: &ctx.config_hash,
        corpus_hash: &corpus_hash,
        source_sha256: &source_sha256,
        instances: ingested.corpus.len(),
        relations: ingested.corpus.relation_count(),
        skipped: ingested.skipped,
        problems: ingested
            .problems
            .iter()
            .map(|(line, reason)| Problem { line: *line, reason: reason.clone() })
            .collect(),
        histogram: hist.ranked(),
    };
    write_json(&ctx.path(artifacts::INGEST), &doc)?;
    println!("instances {} relations {} skipped {}", doc.instances, doc.relations, doc.skipped);
    Ok(())
}

pub fn split(ctx: &Context) -> Result<()> {
    let corpus = ctx.corpus()?;
    let split = frequency_split(&corpus.corpus, &ctx.config.split.to_core())?;
    let doc = SplitDoc { config_hash: ctx.config_hash.clone(), corpus_hash: corpus.hash, manifest: split.manifest() };
    write_json(&ctx.path(artifacts::SPLIT), &doc)?;
    for name in [PartName::Train, PartName::Dev, PartName::Test] {
        let part = split.part(name);
        println!("{name}: relations {} instances {}", part.relations.len(), part.corpus.len());
    }
    Ok(())
}

pub fn subset(ctx: &Context) -> Result<()> {
    let corpus = ctx.corpus()?;
    let split = ctx.split(&corpus)?;
    let spec = &ctx.config.subset;
    let chosen = [
        spec.min_count.is_some(),
        spec.top_n.is_some(),
        spec.random_n.is_some(),
        spec.relations.is_some(),
        spec.manifest.is_some(),
    ];
    if chosen.iter().filter(|&&c| c).count() != 1 {
        return Err(Failure::Config(
            "choose exactly one of min_count, top_n, random_n, relations or manifest for the subset".into(),
        ));
    }
    let mut subset = if let Some(path) = &spec.manifest {
        let text = read_text(path, "subset")?;
        let manifest = match serde_json::from_str::<SubsetDoc>(&text) {
            Ok(doc) => doc.manifest,
            Err(_) => serde_json::from_str::<SubsetManifest>(&text)?,
        };
        TrainSubset::from_manifest(&split.split, &manifest)?
    } else if let Some(m) = spec.min_count {
        diversity_subset(&split.split, m)
    } else if let Some(n) = spec.top_n {
        top_n_relations(&split.split, n)?
    } else if let Some(n) = spec.random_n {
        random_n_relations(&split.split, n, ctx.seed("subset/random"))?
    } else {
        let labels: Vec<RelationLabel> =
            spec.relations.iter().flatten().map(|r| RelationLabel::new(r.trim())).collect();
        explicit_subset(&split.split, &labels)?
    };
    if let Some(cap) = spec.cap {
        subset = cap_examples(&subset, cap, ctx.seed("subset/cap"))?;
    }
    let doc = SubsetDoc {
        config_hash: ctx.config_hash.clone(),
        corpus_hash: corpus.hash,
        split_hash: split.hash,
        manifest: subset.manifest(),
    };
    write_json(&ctx.path(artifacts::SUBSET), &doc)?;
    println!("relations {} instances {}", subset.relations.len(), subset.corpus.len());
    Ok(())
}

/// Runs `f` on the instances of `part` and returns the corpus hash. Train
/// uses the subset when one was selected.
fn part_corpus<F>(ctx: &Context, part: PartName, provenance: &mut BTreeMap<String, String>, f: F) -> Result<String>
where
    F: FnOnce(&Corpus) -> Result<()>,
{
    let corpus = ctx.corpus()?;
    let split = ctx.split(&corpus)?;
    provenance.insert("split_hash".into(), split.hash.clone());
    provenance.insert("part".into(), part.to_string());
    if part == PartName::Train {
        if let Some((subset, hash)) = ctx.subset(&split)? {
            log::info!("sampling train instances from {}", artifacts::SUBSET);
            provenance.insert("subset_hash".into(), hash);
            f(&subset.corpus)?;
            return Ok(corpus.hash);
        }
    }
    f(&split.split.part(part).corpus)?;
    Ok(corpus.hash)
}

pub fn pairs(ctx: &Context, args: &PairsArgs) -> Result<()> {
    let spec = &ctx.config.pairs;
    let name = args.name.clone().unwrap_or_else(|| spec.part.to_string());
    let seed = ctx.seed(&format!("pairs/{name}"));
    let mut provenance = BTreeMap::from([("seed".to_owned(), seed.to_string())]);
    let mut pairs = Vec::new();
    let corpus_hash = part_corpus(ctx, spec.part, &mut provenance, |part| {
        pairs = generate_pairs(part, &spec.to_core(seed), &ctx.config.markers)?;
        Ok(())
    })?;
    let path = ctx.path(&pairs_file(&name));
    write_with_meta(&path, &jsonl_string(&pairs)?, &ctx.meta("pairs", &corpus_hash, provenance))?;
    let different = pairs.iter().filter(|p| !p.is_same()).count();
    println!("pairs {} same {} different {} -> {}", pairs.len(), pairs.len() - different, different, path.display());
    Ok(())
}

pub fn episodes(ctx: &Context, args: &EpisodesArgs) -> Result<()> {
    let spec = &ctx.config.episodes;
    let name = args.name.clone().unwrap_or_else(|| spec.part.to_string());
    let seed = ctx.seed(&format!("episodes/{name}"));
    let mut provenance = BTreeMap::from([("seed".to_owned(), seed.to_string())]);
    let mut episodes = Vec::new();
    let corpus_hash = part_corpus(ctx, spec.part, &mut provenance, |part| {
        episodes = generate_episode_batch(part, &spec.to_core(seed), spec.count, &ctx.config.markers)?;
        Ok(())
    })?;
    let path = ctx.path(&episodes_file(&name));
    write_with_meta(&path, &jsonl_string(&episodes)?, &ctx.meta("episodes", &corpus_hash, provenance))?;
    println!(
        "episodes {} ({}-way {}-shot, {} queries each) -> {}",
        episodes.len(),
        spec.m,
        spec.k,
        spec.q,
        path.display()
    );
    Ok(())
}
