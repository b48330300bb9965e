//! Pair-level relation-specific classification and M-way K-shot episode
//! accuracy with NOTA.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::encoder::{cosine, Encoder};
use crate::error::{Error, Result};
use crate::par;
use crate::sampler::{Episode, PairExample};

mod episodes;
mod metrics;
mod threshold;

pub use episodes::{evaluate_episodes, predict_episode, Aggregation, ClassTally, EpisodeEvalReport};
pub use metrics::{ConfusionCounts, PairEvalReport};
pub use threshold::{candidate_thresholds, select_threshold_from_scores};

pub fn score_pair<E: Encoder + ?Sized>(encoder: &E, pair: &PairExample) -> Result<f64> {
    let a = encoder.embed(&pair.first_text)?;
    let b = encoder.embed(&pair.second_text)?;
    Ok(cosine(a.values(), b.values()))
}

/// Cosine score of every pair. Each distinct sentence is embedded once.
pub fn score_pairs<E: Encoder + ?Sized>(encoder: &E, pairs: &[PairExample]) -> Result<Vec<f64>> {
    fn intern<'a>(t: &'a str, slot: &mut HashMap<&'a str, usize>, unique: &mut Vec<&'a str>) -> usize {
        *slot.entry(t).or_insert_with(|| {
            unique.push(t);
            unique.len() - 1
        })
    }
    let mut slot = HashMap::new();
    let mut unique = Vec::new();
    let index: Vec<(usize, usize)> = pairs
        .iter()
        .map(|p| (intern(&p.first_text, &mut slot, &mut unique), intern(&p.second_text, &mut slot, &mut unique)))
        .collect();
    let vectors = encoder.embed_batch(&unique)?;
    Ok(par::map(&index, |&(a, b)| cosine(vectors[a].values(), vectors[b].values())))
}

/// The dev-F1-maximizing decision threshold (see [`select_threshold_from_scores`]).
pub fn select_threshold<E: Encoder + ?Sized>(encoder: &E, dev_pairs: &[PairExample]) -> Result<f64> {
    let scores = score_pairs(encoder, dev_pairs)?;
    select_threshold_from_scores(&labelled(&scores, dev_pairs))
}

fn labelled(scores: &[f64], pairs: &[PairExample]) -> Vec<(f64, bool)> {
    scores.iter().zip(pairs).map(|(&s, p)| (s, p.is_same())).collect()
}

/// Predicts SAME iff the score reaches `threshold`.
pub fn evaluate_pairs<E: Encoder + ?Sized>(
    encoder: &E,
    pairs: &[PairExample],
    threshold: f64,
) -> Result<PairEvalReport> {
    if pairs.is_empty() {
        return Err(Error::EmptyEvalSet);
    }
    let scores = score_pairs(encoder, pairs)?;
    Ok(evaluate_scores(&labelled(&scores, pairs), threshold))
}

pub fn evaluate_scores(scored: &[(f64, bool)], threshold: f64) -> PairEvalReport {
    let counts = ConfusionCounts::from_outcomes(scored.iter().map(|&(s, y)| (s >= threshold, y)));
    PairEvalReport::from_counts(counts, threshold)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: usize,
    pub dev_f1: f64,
    pub threshold: f64,
}

/// Dev F1 over training steps.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub points: Vec<CurvePoint>,
}

/// Dev F1 at a threshold re-selected on the same dev pairs.
pub fn curve_point<E: Encoder + ?Sized>(encoder: &E, step: usize, dev_pairs: &[PairExample]) -> Result<CurvePoint> {
    if dev_pairs.is_empty() {
        return Err(Error::EmptyEvalSet);
    }
    let scored = labelled(&score_pairs(encoder, dev_pairs)?, dev_pairs);
    let threshold = select_threshold_from_scores(&scored)?;
    Ok(CurvePoint { step, dev_f1: evaluate_scores(&scored, threshold).f1, threshold })
}

/// One point per `(step, encoder)` snapshot; steps must strictly increase.
pub fn learning_curve_eval<E: Encoder>(snapshots: &[(usize, E)], dev_pairs: &[PairExample]) -> Result<LearningCurve> {
    if snapshots.windows(2).any(|w| w[0].0 >= w[1].0) {
        return Err(Error::InvalidConfig("snapshots must have strictly increasing steps".into()));
    }
    let points = snapshots.iter().map(|(step, enc)| curve_point(enc, *step, dev_pairs)).collect::<Result<Vec<_>>>()?;
    Ok(LearningCurve { points })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossDatasetCell {
    pub train_id: String,
    pub test_id: String,
    pub k: usize,
    pub score: f64,
}

/// An encoder entered into the cross-dataset matrix with its NOTA threshold.
pub struct MatrixEntry<'a> {
    pub encoder: &'a dyn Encoder,
    pub nota_threshold: f64,
}

/// Episode accuracy of every (train, test) combination, one cell per shot
/// count found in the test suite.
pub fn cross_dataset_matrix(
    encoders: &BTreeMap<String, MatrixEntry<'_>>,
    test_suites: &BTreeMap<String, Vec<Episode>>,
    aggregation: Aggregation,
) -> Result<Vec<CrossDatasetCell>> {
    if encoders.is_empty() || test_suites.is_empty() {
        return Err(Error::EmptyEvalSet);
    }
    let mut cells = Vec::new();
    for (train_id, entry) in encoders {
        for (test_id, episodes) in test_suites {
            let mut by_k: BTreeMap<usize, Vec<&Episode>> = BTreeMap::new();
            for ep in episodes {
                by_k.entry(ep.k).or_default().push(ep);
            }
            for (k, eps) in by_k {
                let report = episodes::evaluate_episode_refs(entry.encoder, &eps, entry.nota_threshold, aggregation)?;
                cells.push(CrossDatasetCell {
                    train_id: train_id.clone(),
                    test_id: test_id.clone(),
                    k,
                    score: report.query_accuracy,
                });
            }
        }
    }
    Ok(cells)
}
