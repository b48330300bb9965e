use fsrc_core::evaluator::{evaluate_episodes, evaluate_pairs};
use fsrc_core::sampler::Episode;

use crate::artifacts::{self, write_json, Context};
use crate::failure::Result;
use crate::results::{EpisodeEvalDoc, PairEvalDoc, ResultDoc};
use crate::EvalArgs;

use super::{input_path, load_input, load_pairs, open_encoder, resolve_threshold};

pub fn run(ctx: &Context, args: &EvalArgs) -> Result<()> {
    let ckpt = input_path(ctx, &args.encoder, artifacts::CHECKPOINT);
    let (encoder, mut provenance) = open_encoder(ctx, &ckpt)?;
    provenance.insert("config_hash".into(), ctx.config_hash.clone());

    if let Some(path) = &args.episodes {
        let episodes = load_input::<Episode>(path, "episodes")?;
        episodes.provenance("episodes", &mut provenance);
        let threshold = resolve_threshold(ctx, &encoder, ctx.config.eval.nota_threshold, &args.dev, &mut provenance)?;
        let mut report = evaluate_episodes(&encoder, &episodes.records, threshold, ctx.config.eval.aggregation)?;
        report.provenance = provenance;
        println!(
            "episodes {} queries {} accuracy {:.6} nota_threshold {threshold}",
            report.episodes, report.queries, report.query_accuracy
        );
        let corpus_hash = episodes.corpus_hash();
        let doc = ResultDoc::EpisodeEval(EpisodeEvalDoc { config_hash: ctx.config_hash.clone(), corpus_hash, report });
        return write_json(&ctx.path(artifacts::EVAL_EPISODES), &doc);
    }

    let test_path = input_path(ctx, &args.pairs, &artifacts::pairs_file("test"));
    let test = load_pairs(&test_path)?;
    test.provenance("test", &mut provenance);
    let threshold = resolve_threshold(ctx, &encoder, ctx.config.eval.threshold, &args.dev, &mut provenance)?;
    let mut report = evaluate_pairs(&encoder, &test.records, threshold)?;
    report.provenance = provenance;
    println!(
        "pairs {} f1 {:.6} precision {:.6} recall {:.6} threshold {threshold}",
        report.counts.total(),
        report.f1,
        report.precision,
        report.recall
    );
    let doc = ResultDoc::PairEval(PairEvalDoc {
        config_hash: ctx.config_hash.clone(),
        corpus_hash: test.corpus_hash(),
        report,
    });
    write_json(&ctx.path(artifacts::EVAL_PAIRS), &doc)
}
