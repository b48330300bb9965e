//! The relation-diversity grid: one encoder per (relation level, data size),
//! scored on test pairs at every negative fraction.

use std::collections::{BTreeMap, BTreeSet};

use fsrc_core::corpus::{Corpus, RelationLabel};
use fsrc_core::encoder::train_toy;
use fsrc_core::evaluator::{evaluate_episodes, evaluate_pairs, select_threshold};
use fsrc_core::par;
use fsrc_core::report::{grid_long_tsv, grid_wide_tsv, GridRow};
use fsrc_core::sampler::{generate_episode_batch, generate_pairs, Episode, PairExample};
use fsrc_core::splitter::{diversity_subset, top_n_relations, PartName, TrainSubset};

use crate::artifacts::{self, write_json, write_with_meta, Context};
use crate::config::EncoderKindSpec;
use crate::failure::{Failure, Result};
use crate::results::{GridCurve, GridDoc, GridEpisodeRow, GridModel, ResultDoc};

pub const TABLE: &str = "grid.tsv";
pub const TABLE_LONG: &str = "grid-long.tsv";

struct Level {
    label: String,
    subset: TrainSubset,
}

/// Diversity levels in config order, skipping repeats and levels too small
/// to form DIFFERENT pairs.
fn levels(ctx: &Context, split: &fsrc_core::splitter::CorpusSplit) -> Result<Vec<Level>> {
    let g = &ctx.config.grid;
    let mut seen: BTreeSet<Vec<RelationLabel>> = BTreeSet::new();
    let mut out = Vec::new();
    let candidates = g
        .thresholds
        .iter()
        .map(|&m| Ok((format!("min_count={m}"), diversity_subset(split, m))))
        .chain(g.top_n.iter().map(|&n| Ok((format!("top_n={n}"), top_n_relations(split, n)?))));
    for candidate in candidates {
        let (label, subset) = candidate.map_err(Failure::Core)?;
        if subset.relations.len() < 2 {
            log::warn!("skipping grid level {label}: {} train relations", subset.relations.len());
            continue;
        }
        if !seen.insert(subset.relations.iter().cloned().collect()) {
            log::info!("skipping grid level {label}: same relations as an earlier level");
            continue;
        }
        out.push(Level { label, subset });
    }
    if out.is_empty() {
        return Err(Failure::Core(fsrc_core::Error::InsufficientRelations(
            "no grid level keeps two or more train relations".into(),
        )));
    }
    Ok(out)
}

fn pairs(ctx: &Context, part: &Corpus, size: usize, negative_fraction: f64, stage: &str) -> Result<Vec<PairExample>> {
    let mut spec = ctx.config.pairs.clone();
    spec.size = size;
    spec.negative_fraction = negative_fraction;
    Ok(generate_pairs(part, &spec.to_core(ctx.seed(stage)), &ctx.config.markers)?)
}

struct Cell {
    model: GridModel,
    rows: Vec<GridRow>,
    episodes: Vec<GridEpisodeRow>,
    curve: GridCurve,
}

pub fn run(ctx: &Context) -> Result<()> {
    if ctx.config.encoder.kind != EncoderKindSpec::Toy {
        return Err(Failure::Config("the grid trains toy encoders; set encoder.kind = \"toy\"".into()));
    }
    let corpus = ctx.corpus()?;
    let split = ctx.split(&corpus)?;
    let g = &ctx.config.grid;
    let levels = levels(ctx, &split.split)?;
    let dev_part = &split.split.part(PartName::Dev).corpus;
    let test_part = &split.split.part(PartName::Test).corpus;

    let curve_dev = pairs(ctx, dev_part, g.dev_size, g.train_negative_fraction, "grid/dev")?;
    let mut eval_sets = Vec::new();
    for &neg in &g.neg_fractions {
        let dev = pairs(ctx, dev_part, g.dev_size, neg, &format!("grid/dev/{neg}"))?;
        let test = pairs(ctx, test_part, g.test_size, neg, &format!("grid/test/{neg}"))?;
        eval_sets.push((neg, dev, test));
    }
    let mut suites: Vec<(usize, Vec<Episode>)> = Vec::new();
    for &k in &g.episode_ks {
        let mut spec = ctx.config.episodes.clone();
        spec.k = k;
        let config = spec.to_core(ctx.seed(&format!("grid/episodes/k{k}")));
        suites.push((k, generate_episode_batch(test_part, &config, g.episode_count, &ctx.config.markers)?));
    }

    let jobs: Vec<(&Level, usize)> =
        levels.iter().flat_map(|l| g.data_sizes.iter().map(move |&size| (l, size))).collect();
    let cells = par::try_map(&jobs, |&(level, size)| -> Result<Cell> {
        let rel_types = level.subset.relations.len();
        let stage = format!("grid/{}/{size}", level.label);
        let train = pairs(ctx, &level.subset.corpus, size, g.train_negative_fraction, &format!("{stage}/pairs"))?;
        let (encoder, curve) = train_toy(
            &train,
            &ctx.config.train.to_core(ctx.seed(&format!("{stage}/train"))),
            &ctx.config.encoder.toy_params(ctx.seed(&format!("{stage}/init"))),
            &curve_dev,
        )?;
        log::info!("trained grid model {} ({rel_types} relations, {size} pairs)", level.label);
        let mut rows = Vec::new();
        for (neg, dev, test) in &eval_sets {
            let report = evaluate_pairs(&encoder, test, select_threshold(&encoder, dev)?)?;
            rows.push(GridRow {
                rel_types,
                data_size: size,
                neg_fraction: *neg,
                f1: report.f1,
                precision: report.precision,
                recall: report.recall,
            });
        }
        let mut episodes = Vec::new();
        if !suites.is_empty() {
            let nota_threshold = match ctx.config.eval.nota_threshold {
                Some(t) => t,
                None => select_threshold(&encoder, &curve_dev)?,
            };
            for (k, suite) in &suites {
                let report = evaluate_episodes(&encoder, suite, nota_threshold, ctx.config.eval.aggregation)?;
                episodes.push(GridEpisodeRow { rel_types, data_size: size, k: *k, accuracy: report.query_accuracy });
            }
        }
        Ok(Cell {
            model: GridModel {
                rel_types,
                data_size: size,
                selection: level.label.clone(),
                checkpoint_id: encoder.checkpoint_id(),
            },
            rows,
            episodes,
            curve: GridCurve { rel_types, data_size: size, points: curve.points },
        })
    })?;

    let mut doc = GridDoc {
        config_hash: ctx.config_hash.clone(),
        corpus_hash: corpus.hash.clone(),
        split_hash: split.hash.clone(),
        eval_every: ctx.config.train.eval_every,
        models: Vec::new(),
        rows: Vec::new(),
        episodes: Vec::new(),
        curves: Vec::new(),
    };
    for cell in cells {
        doc.models.push(cell.model);
        doc.rows.extend(cell.rows);
        doc.episodes.extend(cell.episodes);
        doc.curves.push(cell.curve);
    }

    let wide = grid_wide_tsv(&doc.rows)?;
    print!("{wide}");
    let provenance = BTreeMap::from([("split_hash".to_owned(), split.hash.clone())]);
    let meta = ctx.meta("eval --grid", &corpus.hash, provenance);
    write_with_meta(&ctx.path(TABLE), &wide, &meta)?;
    write_with_meta(&ctx.path(TABLE_LONG), &grid_long_tsv(&doc.rows), &meta)?;
    write_json(&ctx.path(artifacts::GRID), &ResultDoc::Grid(doc))
}
