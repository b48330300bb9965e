//! Frequency-based relation splits and diversity-controlled training subsets.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{histogram, Corpus, RelationHistogram, RelationLabel};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub train_min_count: usize,
    pub dev_relation_count: usize,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig { train_min_count: 40, dev_relation_count: 100, seed: 0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartName {
    Train,
    Dev,
    Test,
}

impl PartName {
    pub fn as_str(self) -> &'static str {
        match self {
            PartName::Train => "train",
            PartName::Dev => "dev",
            PartName::Test => "test",
        }
    }
}

impl std::fmt::Display for PartName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PartName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(PartName::Train),
            "dev" => Ok(PartName::Dev),
            "test" => Ok(PartName::Test),
            other => Err(Error::InvalidConfig(format!("unknown split part {other:?}"))),
        }
    }
}

/// One side of a split: a relation set and the instances carrying those relations.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitPart {
    pub relations: BTreeSet<RelationLabel>,
    pub corpus: Corpus,
}

impl SplitPart {
    fn of(corpus: &Corpus, relations: BTreeSet<RelationLabel>) -> Self {
        SplitPart { corpus: corpus.restrict(&relations), relations }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusSplit {
    pub config: SplitConfig,
    pub counts: RelationHistogram,
    pub train: SplitPart,
    pub dev: SplitPart,
    pub test: SplitPart,
}

impl CorpusSplit {
    pub fn part(&self, name: PartName) -> &SplitPart {
        match name {
            PartName::Train => &self.train,
            PartName::Dev => &self.dev,
            PartName::Test => &self.test,
        }
    }

    pub fn manifest(&self) -> SplitManifest {
        SplitManifest {
            config: self.config.clone(),
            train: self.train.relations.iter().cloned().collect(),
            dev: self.dev.relations.iter().cloned().collect(),
            test: self.test.relations.iter().cloned().collect(),
            counts: self.counts.counts.clone(),
        }
    }

    /// Rebuilds the split from a corpus and a previously written manifest.
    pub fn from_manifest(corpus: &Corpus, manifest: &SplitManifest) -> Result<Self> {
        let counts = histogram(corpus);
        if counts.counts != manifest.counts {
            return Err(Error::InvalidConfig("split manifest counts do not match the corpus".into()));
        }
        let set = |v: &[RelationLabel]| v.iter().cloned().collect::<BTreeSet<_>>();
        Ok(CorpusSplit {
            config: manifest.config.clone(),
            train: SplitPart::of(corpus, set(&manifest.train)),
            dev: SplitPart::of(corpus, set(&manifest.dev)),
            test: SplitPart::of(corpus, set(&manifest.test)),
            counts,
        })
    }
}

/// On-disk description of a split; instance data is re-derived from the corpus.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub config: SplitConfig,
    pub train: Vec<RelationLabel>,
    pub dev: Vec<RelationLabel>,
    pub test: Vec<RelationLabel>,
    pub counts: BTreeMap<RelationLabel, usize>,
}

/// Relations with at least `train_min_count` instances go to train. The rest,
/// ranked by count descending then label ascending, alternate dev/test until
/// dev is full; everything after that goes to test.
pub fn frequency_split(corpus: &Corpus, config: &SplitConfig) -> Result<CorpusSplit> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if config.train_min_count == 0 {
        return Err(Error::InvalidConfig("train_min_count must be at least 1".into()));
    }
    let counts = histogram(corpus);
    let mut train = BTreeSet::new();
    let mut dev = BTreeSet::new();
    let mut test = BTreeSet::new();
    let mut next_is_dev = true;
    for (label, count) in counts.ranked() {
        if count >= config.train_min_count {
            train.insert(label.clone());
        } else if next_is_dev && dev.len() < config.dev_relation_count {
            dev.insert(label.clone());
            next_is_dev = false;
        } else {
            test.insert(label.clone());
            next_is_dev = true;
        }
    }
    Ok(CorpusSplit {
        config: config.clone(),
        train: SplitPart::of(corpus, train),
        dev: SplitPart::of(corpus, dev),
        test: SplitPart::of(corpus, test),
        counts,
    })
}

/// How a training subset was selected.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Selection {
    Threshold { min_count: usize },
    TopN { n: usize },
    RandomN { n: usize, seed: u64 },
    Explicit { relations: Vec<RelationLabel> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetProvenance {
    pub selection: Selection,
    /// Example cap and its seed, if the subset was capped.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<CapProvenance>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CapProvenance {
    pub max_total: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainSubset {
    pub relations: BTreeSet<RelationLabel>,
    pub corpus: Corpus,
    pub provenance: SubsetProvenance,
}

impl TrainSubset {
    fn select(split: &CorpusSplit, relations: BTreeSet<RelationLabel>, selection: Selection) -> Self {
        TrainSubset {
            corpus: split.train.corpus.restrict(&relations),
            relations,
            provenance: SubsetProvenance { selection, cap: None },
        }
    }

    pub fn manifest(&self) -> SubsetManifest {
        SubsetManifest {
            relations: self.relations.iter().cloned().collect(),
            provenance: self.provenance.clone(),
            instance_count: self.corpus.len(),
        }
    }

    /// Re-derives a subset from its parent split and manifest.
    pub fn from_manifest(split: &CorpusSplit, manifest: &SubsetManifest) -> Result<Self> {
        let relations: BTreeSet<_> = manifest.relations.iter().cloned().collect();
        if let Some(stray) = relations.iter().find(|r| !split.train.relations.contains(*r)) {
            return Err(Error::InvalidConfig(format!("subset relation {stray} is not a train relation")));
        }
        let subset = TrainSubset::select(split, relations, manifest.provenance.selection.clone());
        match &manifest.provenance.cap {
            Some(cap) => cap_examples(&subset, cap.max_total, cap.seed),
            None => Ok(subset),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetManifest {
    pub relations: Vec<RelationLabel>,
    pub provenance: SubsetProvenance,
    pub instance_count: usize,
}

pub fn diversity_subset(split: &CorpusSplit, min_count: usize) -> TrainSubset {
    let relations = split.train.relations.iter().filter(|r| split.counts.count(r) >= min_count).cloned().collect();
    TrainSubset::select(split, relations, Selection::Threshold { min_count })
}

/// The `n` most frequent train relations, ties broken by label ascending.
pub fn top_n_relations(split: &CorpusSplit, n: usize) -> Result<TrainSubset> {
    let available = split.train.relations.len();
    if n == 0 || n > available {
        return Err(Error::NOutOfRange { requested: n, available });
    }
    let mut ranked: Vec<_> = split.train.relations.iter().map(|r| (split.counts.count(r), r)).collect();
    ranked.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    let relations = ranked.into_iter().take(n).map(|(_, r)| r.clone()).collect();
    Ok(TrainSubset::select(split, relations, Selection::TopN { n }))
}

/// `n` train relations drawn uniformly at random.
pub fn random_n_relations(split: &CorpusSplit, n: usize, seed: u64) -> Result<TrainSubset> {
    let available = split.train.relations.len();
    if n == 0 || n > available {
        return Err(Error::NOutOfRange { requested: n, available });
    }
    let labels: Vec<_> = split.train.relations.iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let relations = index::sample(&mut rng, available, n).into_iter().map(|i| labels[i].clone()).collect();
    Ok(TrainSubset::select(split, relations, Selection::RandomN { n, seed }))
}

pub fn explicit_subset(split: &CorpusSplit, relations: &[RelationLabel]) -> Result<TrainSubset> {
    let set: BTreeSet<_> = relations.iter().cloned().collect();
    if let Some(stray) = set.iter().find(|r| !split.train.relations.contains(*r)) {
        return Err(Error::InvalidConfig(format!("{stray} is not a train relation")));
    }
    Ok(TrainSubset::select(split, set.clone(), Selection::Explicit { relations: set.into_iter().collect() }))
}

/// Per-relation quotas summing to `max_total`, proportional to each count
/// with largest-remainder rounding (ties by label order). Every relation keeps
/// at least one instance; the top-up is taken from the largest quotas.
pub fn proportional_quotas(counts: &[(RelationLabel, usize)], max_total: usize) -> Result<Vec<usize>> {
    let total: usize = counts.iter().map(|c| c.1).sum();
    if max_total >= total {
        return Ok(counts.iter().map(|c| c.1).collect());
    }
    if max_total < counts.len() {
        return Err(Error::CapTooSmall { max_total, relations: counts.len() });
    }
    let (cap, total) = (max_total as u128, total as u128);
    let mut quotas: Vec<usize> = Vec::with_capacity(counts.len());
    let mut remainders: Vec<(u128, usize)> = Vec::with_capacity(counts.len());
    for (i, (_, c)) in counts.iter().enumerate() {
        let num = cap * *c as u128;
        quotas.push((num / total) as usize);
        remainders.push((num % total, i));
    }
    let left = max_total - quotas.iter().sum::<usize>();
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in remainders.iter().take(left) {
        quotas[i] += 1;
    }
    for i in 0..quotas.len() {
        if quotas[i] == 0 {
            let donor =
                (0..quotas.len()).max_by(|&a, &b| quotas[a].cmp(&quotas[b]).then(b.cmp(&a))).expect("non-empty");
            quotas[donor] -= 1;
            quotas[i] = 1;
        }
    }
    Ok(quotas)
}

/// Stratified sample of at most `max_total` instances, deterministic in `seed`.
pub fn cap_examples(subset: &TrainSubset, max_total: usize, seed: u64) -> Result<TrainSubset> {
    let counts: Vec<(RelationLabel, usize)> =
        subset.corpus.relation_index().iter().map(|(r, p)| (r.clone(), p.len())).collect();
    let quotas = proportional_quotas(&counts, max_total)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = vec![false; subset.corpus.len()];
    for ((label, count), quota) in counts.iter().zip(quotas) {
        let positions = &subset.corpus.relation_index()[label];
        if quota >= *count {
            positions.iter().for_each(|&p| keep[p] = true);
        } else {
            let mut chosen: Vec<usize> = index::sample(&mut rng, *count, quota).into_vec();
            chosen.shuffle(&mut rng);
            chosen.into_iter().for_each(|i| keep[positions[i]] = true);
        }
    }
    let mut pos = 0;
    let corpus = subset.corpus.filter(|_| {
        pos += 1;
        keep[pos - 1]
    });
    Ok(TrainSubset {
        relations: subset.relations.clone(),
        corpus,
        provenance: SubsetProvenance {
            selection: subset.provenance.selection.clone(),
            cap: Some(CapProvenance { max_total, seed }),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{EntitySpan, RelationInstance};
    use proptest::prelude::*;

    pub(crate) fn corpus_with_counts(counts: &[(&str, usize)]) -> Corpus {
        let mut insts = Vec::new();
        for (rel, n) in counts {
            for i in 0..*n {
                insts.push(RelationInstance {
                    uid: format!("{rel}-{i}"),
                    text: format!("h{i} relates to t{i}"),
                    head: EntitySpan::new(0, 2),
                    tail: EntitySpan::new(15, 17),
                    relation: (*rel).into(),
                });
            }
        }
        Corpus::from_instances(insts).unwrap()
    }

    fn labels(set: &BTreeSet<RelationLabel>) -> Vec<&str> {
        set.iter().map(|r| r.as_str()).collect()
    }

    #[test]
    fn split_follows_ranking_rule() {
        let corpus = corpus_with_counts(&[("A", 50), ("B", 41), ("C", 39), ("D", 10), ("E", 9), ("F", 2)]);
        let cfg = SplitConfig { train_min_count: 40, dev_relation_count: 1, seed: 0 };
        let split = frequency_split(&corpus, &cfg).unwrap();
        assert_eq!(labels(&split.train.relations), ["A", "B"]);
        assert_eq!(labels(&split.dev.relations), ["C"]);
        assert_eq!(labels(&split.test.relations), ["D", "E", "F"]);
        assert_eq!(split.train.corpus.len(), 91);
    }

    #[test]
    fn split_alternates_until_dev_full() {
        let corpus = corpus_with_counts(&[("A", 9), ("B", 8), ("C", 7), ("D", 6), ("E", 5), ("F", 4)]);
        let cfg = SplitConfig { train_min_count: 40, dev_relation_count: 2, seed: 0 };
        let split = frequency_split(&corpus, &cfg).unwrap();
        assert!(split.train.relations.is_empty());
        assert_eq!(labels(&split.dev.relations), ["A", "C"]);
        assert_eq!(labels(&split.test.relations), ["B", "D", "E", "F"]);
    }

    #[test]
    fn split_rejects_empty_corpus() {
        let err = frequency_split(&Corpus::default(), &SplitConfig::default()).unwrap_err();
        assert!(matches!(err, Error::EmptyCorpus));
    }

    #[test]
    fn manifest_round_trip() {
        let corpus = corpus_with_counts(&[("A", 50), ("B", 41), ("C", 39), ("D", 10)]);
        let split = frequency_split(&corpus, &SplitConfig { dev_relation_count: 1, ..Default::default() }).unwrap();
        let json = serde_json::to_string(&split.manifest()).unwrap();
        let back: SplitManifest = serde_json::from_str(&json).unwrap();
        assert_eq!(CorpusSplit::from_manifest(&corpus, &back).unwrap(), split);
    }

    #[test]
    fn diversity_subset_thresholds() {
        let corpus = corpus_with_counts(&[("r1", 6000), ("r2", 1200), ("r3", 45)]);
        let split = frequency_split(&corpus, &SplitConfig::default()).unwrap();
        assert_eq!(labels(&diversity_subset(&split, 1000).relations), ["r1", "r2"]);
        let full = diversity_subset(&split, 40);
        assert_eq!(full.relations, split.train.relations);
        assert_eq!(full.corpus, split.train.corpus);
    }

    #[test]
    fn top_n_breaks_ties_by_label() {
        let corpus = corpus_with_counts(&[("A", 5), ("B", 3), ("C", 3), ("D", 1)]);
        let split = frequency_split(&corpus, &SplitConfig { train_min_count: 1, ..Default::default() }).unwrap();
        assert_eq!(labels(&top_n_relations(&split, 2).unwrap().relations), ["A", "B"]);
        assert_eq!(top_n_relations(&split, 4).unwrap().relations, split.train.relations);
        assert!(matches!(top_n_relations(&split, 5), Err(Error::NOutOfRange { requested: 5, available: 4 })));
        assert!(matches!(top_n_relations(&split, 0), Err(Error::NOutOfRange { .. })));
    }

    #[test]
    fn random_n_is_seeded() {
        let corpus = corpus_with_counts(&[("A", 5), ("B", 3), ("C", 3), ("D", 1), ("E", 2)]);
        let split = frequency_split(&corpus, &SplitConfig { train_min_count: 1, ..Default::default() }).unwrap();
        let a = random_n_relations(&split, 3, 9).unwrap();
        let b = random_n_relations(&split, 3, 9).unwrap();
        assert_eq!(a.relations, b.relations);
        assert_eq!(a.relations.len(), 3);
    }

    #[test]
    fn cap_identity_and_proportions() {
        let corpus = corpus_with_counts(&[("A", 80), ("B", 20)]);
        let split = frequency_split(&corpus, &SplitConfig { train_min_count: 1, ..Default::default() }).unwrap();
        let subset = top_n_relations(&split, 2).unwrap();
        for seed in 0..5 {
            let capped = cap_examples(&subset, 10, seed).unwrap();
            let hist = histogram(&capped.corpus);
            assert_eq!(hist.count(&"A".into()), 8);
            assert_eq!(hist.count(&"B".into()), 2);
        }
        let unchanged = cap_examples(&subset, 100, 3).unwrap();
        assert_eq!(unchanged.corpus, subset.corpus);
        assert!(matches!(cap_examples(&subset, 1, 0), Err(Error::CapTooSmall { .. })));
    }

    #[test]
    fn cap_is_deterministic_in_seed() {
        let corpus = corpus_with_counts(&[("A", 80), ("B", 20), ("C", 7)]);
        let split = frequency_split(&corpus, &SplitConfig { train_min_count: 1, ..Default::default() }).unwrap();
        let subset = top_n_relations(&split, 3).unwrap();
        let uids = |s: &TrainSubset| s.corpus.instances().iter().map(|i| i.uid.clone()).collect::<Vec<_>>();
        assert_eq!(uids(&cap_examples(&subset, 20, 7).unwrap()), uids(&cap_examples(&subset, 20, 7).unwrap()));
    }

    fn arb_counts() -> impl Strategy<Value = Vec<(String, usize)>> {
        prop::collection::btree_map("[a-z]{1,3}", 1usize..80, 1..25).prop_map(|m| m.into_iter().collect())
    }

    proptest! {
        #[test]
        fn split_partitions_relations(counts in arb_counts(), min in 1usize..60, dev in 0usize..10) {
            let spec: Vec<(&str, usize)> = counts.iter().map(|(r, c)| (r.as_str(), *c)).collect();
            let corpus = corpus_with_counts(&spec);
            let split = frequency_split(&corpus, &SplitConfig { train_min_count: min, dev_relation_count: dev, seed: 0 }).unwrap();
            // Brute force: every relation lands in exactly one part.
            for (r, c) in &counts {
                let label = RelationLabel::new(r.clone());
                let hits = [&split.train, &split.dev, &split.test].iter().filter(|p| p.relations.contains(&label)).count();
                prop_assert_eq!(hits, 1);
                prop_assert_eq!(split.train.relations.contains(&label), *c >= min);
            }
            prop_assert!(split.dev.relations.len() <= dev);
            for part in [&split.train, &split.dev, &split.test] {
                prop_assert!(part.corpus.instances().iter().all(|i| part.relations.contains(&i.relation)));
            }
            let total = split.train.corpus.len() + split.dev.corpus.len() + split.test.corpus.len();
            prop_assert_eq!(total, corpus.len());
        }

        #[test]
        fn top_n_is_nested(counts in arb_counts(), a in 1usize..25, b in 1usize..25) {
            let spec: Vec<(&str, usize)> = counts.iter().map(|(r, c)| (r.as_str(), *c)).collect();
            let corpus = corpus_with_counts(&spec);
            let split = frequency_split(&corpus, &SplitConfig { train_min_count: 1, ..Default::default() }).unwrap();
            let n = split.train.relations.len();
            let (lo, hi) = (a.min(b).min(n), a.max(b).min(n));
            let small = top_n_relations(&split, lo).unwrap();
            let big = top_n_relations(&split, hi).unwrap();
            prop_assert!(small.relations.is_subset(&big.relations));
        }

        #[test]
        fn cap_keeps_every_relation(counts in arb_counts(), extra in 0usize..200, seed in any::<u64>()) {
            let spec: Vec<(&str, usize)> = counts.iter().map(|(r, c)| (r.as_str(), *c)).collect();
            let corpus = corpus_with_counts(&spec);
            let split = frequency_split(&corpus, &SplitConfig { train_min_count: 1, ..Default::default() }).unwrap();
            let subset = top_n_relations(&split, split.train.relations.len()).unwrap();
            let max_total = subset.relations.len() + extra;
            let capped = cap_examples(&subset, max_total, seed).unwrap();
            prop_assert_eq!(capped.corpus.len(), max_total.min(subset.corpus.len()));
            prop_assert_eq!(capped.corpus.relation_count(), subset.relations.len());
            prop_assert!(capped.corpus.instances().iter().all(|i| capped.relations.contains(&i.relation)));
        }
    }
}
