use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::RelationLabel;
use crate::encoder::{cosine, EmbeddingVector, Encoder};
use crate::error::{Error, Result};
use crate::par;
use crate::sampler::{Episode, Gold};

/// How the K support similarities of a class are combined.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Mean,
    Max,
}

impl std::str::FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Aggregation::Mean),
            "max" => Ok(Aggregation::Max),
            other => Err(Error::InvalidConfig(format!("unknown aggregation {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassTally {
    pub correct: u64,
    pub total: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeEvalReport {
    pub episodes: usize,
    pub queries: u64,
    pub correct: u64,
    /// Correct queries over all queries, NOTA queries included.
    pub query_accuracy: f64,
    pub nota_threshold: f64,
    /// Keyed by gold label; NOTA queries under `"NOTA"`.
    pub per_class: BTreeMap<String, ClassTally>,
    #[serde(default)]
    pub provenance: BTreeMap<String, String>,
}

fn embed_unique<E: Encoder + ?Sized>(encoder: &E, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
    let mut slot: HashMap<&str, usize> = HashMap::new();
    let mut unique: Vec<&str> = Vec::new();
    let index: Vec<usize> = texts
        .iter()
        .map(|t| {
            *slot.entry(t).or_insert_with(|| {
                unique.push(t);
                unique.len() - 1
            })
        })
        .collect();
    let vectors = encoder.embed_batch(&unique)?;
    Ok(index.into_iter().map(|i| vectors[i].clone()).collect())
}

/// Predictions for every query of one episode.
///
/// Each class scores the mean (or max) cosine similarity to its support
/// sentences; the best class wins if it reaches `nota_threshold`, otherwise
/// the query is NOTA. Equal scores go to the lowest relation label.
pub fn predict_episode<E: Encoder + ?Sized>(
    encoder: &E,
    episode: &Episode,
    nota_threshold: f64,
    aggregation: Aggregation,
) -> Result<Vec<Gold>> {
    let texts: Vec<&str> = episode
        .support
        .iter()
        .map(|s| s.text.as_str())
        .chain(episode.queries.iter().map(|q| q.text.as_str()))
        .collect();
    let vectors = embed_unique(encoder, &texts)?;
    let (support_vecs, query_vecs) = vectors.split_at(episode.support.len());

    let mut classes: BTreeMap<&RelationLabel, Vec<&EmbeddingVector>> = BTreeMap::new();
    for (item, v) in episode.support.iter().zip(support_vecs) {
        classes.entry(&item.relation).or_default().push(v);
    }

    Ok(query_vecs
        .iter()
        .map(|q| {
            let mut best: Option<(&RelationLabel, f64)> = None;
            for (label, supports) in &classes {
                let sims = supports.iter().map(|s| cosine(q.values(), s.values()));
                let score = match aggregation {
                    Aggregation::Mean => sims.sum::<f64>() / supports.len() as f64,
                    Aggregation::Max => sims.fold(f64::NEG_INFINITY, f64::max),
                };
                if best.is_none_or(|(_, b)| score > b) {
                    best = Some((label, score));
                }
            }
            match best {
                Some((label, score)) if score >= nota_threshold => Gold::Relation(label.clone()),
                _ => Gold::Nota,
            }
        })
        .collect())
}

pub fn evaluate_episodes<E: Encoder + ?Sized>(
    encoder: &E,
    episodes: &[Episode],
    nota_threshold: f64,
    aggregation: Aggregation,
) -> Result<EpisodeEvalReport> {
    let refs: Vec<&Episode> = episodes.iter().collect();
    evaluate_episode_refs(encoder, &refs, nota_threshold, aggregation)
}

pub(crate) fn evaluate_episode_refs<E: Encoder + ?Sized>(
    encoder: &E,
    episodes: &[&Episode],
    nota_threshold: f64,
    aggregation: Aggregation,
) -> Result<EpisodeEvalReport> {
    if episodes.is_empty() || episodes.iter().all(|e| e.queries.is_empty()) {
        return Err(Error::EmptyEvalSet);
    }
    let predictions = par::try_map(episodes, |ep| predict_episode(encoder, ep, nota_threshold, aggregation))?;
    let mut per_class: BTreeMap<String, ClassTally> = BTreeMap::new();
    let (mut queries, mut correct) = (0u64, 0u64);
    for (ep, preds) in episodes.iter().zip(predictions) {
        for (query, pred) in ep.queries.iter().zip(preds) {
            let tally = per_class.entry(query.gold.as_str().to_owned()).or_default();
            tally.total += 1;
            queries += 1;
            if pred == query.gold {
                tally.correct += 1;
                correct += 1;
            }
        }
    }
    Ok(EpisodeEvalReport {
        episodes: episodes.len(),
        queries,
        correct,
        query_accuracy: correct as f64 / queries as f64,
        nota_threshold,
        per_class,
        provenance: BTreeMap::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::{EncoderInfo, EncoderKind};
    use crate::sampler::{QueryItem, SupportItem};
    use proptest::prelude::*;

    /// Looks texts up in a fixed table.
    struct TableEncoder {
        dim: usize,
        table: HashMap<String, Vec<f64>>,
    }

    impl Encoder for TableEncoder {
        fn info(&self) -> EncoderInfo {
            EncoderInfo { kind: EncoderKind::Toy, dim: self.dim, metadata: Default::default() }
        }

        fn embed(&self, text: &str) -> Result<EmbeddingVector> {
            EmbeddingVector::new(self.table[text].clone())
        }
    }

    fn episode(support: &[(&str, &str)], queries: &[(&str, &str, &str)]) -> Episode {
        let relations: std::collections::BTreeSet<_> = support.iter().map(|s| s.1).collect();
        Episode {
            m: relations.len(),
            k: support.len() / relations.len(),
            support: support
                .iter()
                .map(|(t, r)| SupportItem { uid: format!("s-{t}"), text: t.to_string(), relation: (*r).into() })
                .collect(),
            queries: queries
                .iter()
                .map(|(t, gold, rel)| QueryItem {
                    uid: format!("q-{t}"),
                    text: t.to_string(),
                    gold: if *gold == "NOTA" { Gold::Nota } else { Gold::Relation((*gold).into()) },
                    relation: (*rel).into(),
                })
                .collect(),
        }
    }

    fn encoder(rows: &[(&str, &[f64])]) -> TableEncoder {
        TableEncoder { dim: rows[0].1.len(), table: rows.iter().map(|(t, v)| (t.to_string(), v.to_vec())).collect() }
    }

    #[test]
    fn identical_support_wins() {
        let enc = encoder(&[("a", &[1.0, 0.0, 0.0]), ("b", &[0.0, 1.0, 0.0]), ("c", &[0.0, 0.0, 1.0])]);
        let ep = episode(&[("a", "A"), ("b", "B")], &[("a", "A", "A"), ("c", "NOTA", "C")]);
        let preds = predict_episode(&enc, &ep, 0.0, Aggregation::Mean).unwrap();
        assert_eq!(preds[0], Gold::Relation("A".into()));
        // Orthogonal to everything: best score 0 still clears a zero threshold.
        assert_eq!(preds[1], Gold::Relation("A".into()));
        assert_eq!(predict_episode(&enc, &ep, 0.5, Aggregation::Mean).unwrap()[1], Gold::Nota);
    }

    #[test]
    fn threshold_above_one_predicts_nota_everywhere() {
        let enc = encoder(&[("a", &[1.0, 0.0]), ("b", &[0.0, 1.0]), ("c", &[1.0, 1.0])]);
        let ep = episode(
            &[("a", "A"), ("b", "B")],
            &[("a", "A", "A"), ("c", "NOTA", "C"), ("b", "B", "B"), ("c", "NOTA", "D")],
        );
        let report = evaluate_episodes(&enc, &[ep], 1.5, Aggregation::Mean).unwrap();
        assert_eq!(report.query_accuracy, 0.5);
        assert_eq!(report.per_class["NOTA"], ClassTally { correct: 2, total: 2 });
        assert_eq!(report.per_class["A"], ClassTally { correct: 0, total: 1 });
    }

    #[test]
    fn ties_go_to_lowest_label() {
        let enc = encoder(&[("x", &[1.0, 0.0]), ("y", &[1.0, 0.0]), ("q", &[1.0, 1.0])]);
        let ep = episode(&[("y", "Z"), ("x", "B")], &[("q", "B", "B")]);
        assert_eq!(predict_episode(&enc, &ep, 0.0, Aggregation::Mean).unwrap()[0], Gold::Relation("B".into()));
    }

    #[test]
    fn mean_versus_max() {
        let enc = encoder(&[
            ("a1", &[1.0, 0.0]),
            ("a2", &[-1.0, 0.0]),
            ("b1", &[0.6, 0.8]),
            ("b2", &[0.6, 0.8]),
            ("q", &[1.0, 0.0]),
        ]);
        let ep = episode(&[("a1", "A"), ("a2", "A"), ("b1", "B"), ("b2", "B")], &[("q", "A", "A")]);
        assert_eq!(predict_episode(&enc, &ep, -1.0, Aggregation::Mean).unwrap()[0], Gold::Relation("B".into()));
        assert_eq!(predict_episode(&enc, &ep, -1.0, Aggregation::Max).unwrap()[0], Gold::Relation("A".into()));
    }

    #[test]
    fn empty_eval_set() {
        let enc = encoder(&[("a", &[1.0])]);
        assert!(matches!(evaluate_episodes(&enc, &[], 0.0, Aggregation::Mean), Err(Error::EmptyEvalSet)));
    }

    /// Support vectors, query vectors, label draws and a threshold.
    type EpisodeDraw = (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<i32>, f64);

    fn arb_episode() -> impl Strategy<Value = EpisodeDraw> {
        (
            prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 6),
            prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 4),
            prop::collection::vec(-8i32..8, 10),
            -0.5f64..0.9,
        )
    }

    fn three_way(names: [&str; 3]) -> Episode {
        Episode {
            m: 3,
            k: 2,
            support: (0..6)
                .map(|i| SupportItem { uid: format!("s{i}"), text: format!("t{i}"), relation: names[i / 2].into() })
                .collect(),
            queries: (0..4)
                .map(|i| QueryItem {
                    uid: format!("q{i}"),
                    text: format!("t{}", i + 6),
                    gold: Gold::Nota,
                    relation: "X".into(),
                })
                .collect(),
        }
    }

    proptest! {
        #[test]
        fn invariant_under_positive_scaling((support, queries, exponents, tau) in arb_episode()) {
            let vectors: Vec<&Vec<f64>> = support.iter().chain(&queries).collect();
            let enc = TableEncoder {
                dim: 3,
                table: vectors.iter().enumerate().map(|(i, v)| (format!("t{i}"), v.to_vec())).collect(),
            };
            // Power-of-two factors keep every cosine bit-identical.
            let scaled = TableEncoder {
                dim: 3,
                table: vectors
                    .iter()
                    .enumerate()
                    .map(|(i, v)| (format!("t{i}"), v.iter().map(|x| x * 2f64.powi(exponents[i])).collect()))
                    .collect(),
            };
            let ep = three_way(["A", "B", "C"]);
            prop_assert_eq!(
                predict_episode(&enc, &ep, tau, Aggregation::Mean).unwrap(),
                predict_episode(&scaled, &ep, tau, Aggregation::Mean).unwrap()
            );
        }

        #[test]
        fn relabeling_permutes_predictions((support, queries, _e, tau) in arb_episode()) {
            let vectors: Vec<&Vec<f64>> = support.iter().chain(&queries).collect();
            let enc = TableEncoder {
                dim: 3,
                table: vectors.iter().enumerate().map(|(i, v)| (format!("t{i}"), v.to_vec())).collect(),
            };
            let base = predict_episode(&enc, &three_way(["A", "B", "C"]), tau, Aggregation::Mean).unwrap();
            let renamed = predict_episode(&enc, &three_way(["q", "m", "z"]), tau, Aggregation::Mean).unwrap();
            let rename = |g: &Gold| match g {
                Gold::Nota => Gold::Nota,
                Gold::Relation(r) => Gold::Relation(match r.as_str() { "A" => "q", "B" => "m", _ => "z" }.into()),
            };
            prop_assert_eq!(base.iter().map(rename).collect::<Vec<_>>(), renamed);
        }
    }
}
