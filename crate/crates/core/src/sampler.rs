//! Siamese pair datasets and M-way K-shot episodes with NOTA queries.

use std::collections::HashSet;
use std::fmt;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::corpus::{Corpus, RelationLabel};
use crate::error::{Error, Result};
use crate::par;
use crate::renderer::{render, MarkerScheme};

/// Consecutive rejected draws tolerated before a pair is declared unreachable.
pub const MAX_ATTEMPTS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PairLabel {
    Same,
    Different,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairExample {
    pub first_uid: String,
    pub second_uid: String,
    pub first_text: String,
    pub second_text: String,
    pub label: PairLabel,
    pub first_relation: RelationLabel,
    pub second_relation: RelationLabel,
}

impl PairExample {
    pub fn is_same(&self) -> bool {
        self.label == PairLabel::Same
    }
}

/// How the relation of a positive pair is chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositiveWeighting {
    /// Relation drawn with weight C(count, 2): uniform over all positive pairs.
    #[default]
    PairCount,
    /// Relation drawn uniformly among relations with at least two instances.
    UniformRelation,
}

/// How a negative pair is drawn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeSampling {
    /// Uniform instance, then a uniform instance with a different relation.
    #[default]
    InstanceUniform,
    /// Two distinct relations uniformly, then a uniform instance of each.
    RelationUniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PairDatasetConfig {
    pub size: usize,
    pub negative_fraction: f64,
    pub seed: u64,
    pub positive_weighting: PositiveWeighting,
    pub negative_sampling: NegativeSampling,
    pub allow_duplicates: bool,
}

impl Default for PairDatasetConfig {
    fn default() -> Self {
        PairDatasetConfig {
            size: 1000,
            negative_fraction: 0.5,
            seed: 0,
            positive_weighting: PositiveWeighting::default(),
            negative_sampling: NegativeSampling::default(),
            allow_duplicates: false,
        }
    }
}

impl PairDatasetConfig {
    /// `round(size * negative_fraction)`, halves rounded away from zero.
    pub fn negative_count(&self) -> usize {
        (self.size as f64 * self.negative_fraction).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.size == 0 {
            return Err(Error::InvalidConfig("pair dataset size must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.negative_fraction) {
            return Err(Error::InvalidConfig(format!("negative_fraction {} outside [0, 1]", self.negative_fraction)));
        }
        Ok(())
    }
}

struct PartView<'a> {
    /// Corpus positions of each relation, ascending label order.
    groups: Vec<&'a [usize]>,
    /// Group index of each corpus position.
    group_of: Vec<usize>,
}

impl<'a> PartView<'a> {
    fn new(corpus: &'a Corpus) -> Self {
        let groups: Vec<&[usize]> = corpus.relation_index().values().map(|v| v.as_slice()).collect();
        let mut group_of = vec![0; corpus.len()];
        for (g, positions) in groups.iter().enumerate() {
            positions.iter().for_each(|&p| group_of[p] = g);
        }
        PartView { groups, group_of }
    }
}

pub fn generate_pairs(part: &Corpus, config: &PairDatasetConfig, scheme: &MarkerScheme) -> Result<Vec<PairExample>> {
    config.validate()?;
    let view = PartView::new(part);
    let n = part.len() as u128;
    let n_neg = config.negative_count();
    let n_pos = config.size - n_neg;

    if n_neg > 0 {
        if view.groups.len() < 2 {
            return Err(Error::InsufficientRelations(format!(
                "{n_neg} negative pairs need at least 2 relations, part has {}",
                view.groups.len()
            )));
        }
        let same: u128 = view.groups.iter().map(|g| (g.len() as u128).pow(2)).sum();
        let available = (n * n - same) / 2;
        if !config.allow_duplicates && n_neg as u128 > available {
            return Err(Error::UnsatisfiableConfig(format!(
                "{n_neg} distinct negative pairs requested, only {available} exist"
            )));
        }
    }
    let positive_groups: Vec<usize> = (0..view.groups.len()).filter(|&g| view.groups[g].len() >= 2).collect();
    if n_pos > 0 {
        if positive_groups.is_empty() {
            return Err(Error::InsufficientInstances(
                "positive pairs need a relation with at least 2 instances".into(),
            ));
        }
        let available: u128 = positive_groups
            .iter()
            .map(|&g| {
                let c = view.groups[g].len() as u128;
                c * (c - 1) / 2
            })
            .sum();
        if !config.allow_duplicates && n_pos as u128 > available {
            return Err(Error::UnsatisfiableConfig(format!(
                "{n_pos} distinct positive pairs requested, only {available} exist"
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut seen: HashSet<(usize, usize)> = HashSet::with_capacity(config.size);
    let mut picks: Vec<(usize, usize)> = Vec::with_capacity(config.size);
    let mut accept = |a: usize, b: usize, picks: &mut Vec<(usize, usize)>| -> bool {
        if config.allow_duplicates || seen.insert((a.min(b), a.max(b))) {
            picks.push((a, b));
            true
        } else {
            false
        }
    };

    if n_pos > 0 {
        let weights: Vec<u128> = positive_groups
            .iter()
            .map(|&g| match config.positive_weighting {
                PositiveWeighting::PairCount => {
                    let c = view.groups[g].len() as u128;
                    c * (c - 1) / 2
                }
                PositiveWeighting::UniformRelation => 1,
            })
            .collect();
        let relation_dist = WeightedIndex::new(weights.iter().map(|&w| w as f64))
            .map_err(|e| Error::UnsatisfiableConfig(e.to_string()))?;
        for _ in 0..n_pos {
            let mut attempts = 0;
            loop {
                let group = view.groups[positive_groups[relation_dist.sample(&mut rng)]];
                let two = index::sample(&mut rng, group.len(), 2);
                if accept(group[two.index(0)], group[two.index(1)], &mut picks) {
                    break;
                }
                attempts += 1;
                if attempts >= MAX_ATTEMPTS {
                    return Err(Error::UnsatisfiableConfig(format!(
                        "no new positive pair after {MAX_ATTEMPTS} attempts"
                    )));
                }
            }
        }
    }

    for _ in 0..n_neg {
        let mut attempts = 0;
        loop {
            let (a, b) = match config.negative_sampling {
                NegativeSampling::InstanceUniform => (rng.random_range(0..part.len()), rng.random_range(0..part.len())),
                NegativeSampling::RelationUniform => {
                    let two = index::sample(&mut rng, view.groups.len(), 2);
                    let (g1, g2) = (view.groups[two.index(0)], view.groups[two.index(1)]);
                    (g1[rng.random_range(0..g1.len())], g2[rng.random_range(0..g2.len())])
                }
            };
            if view.group_of[a] != view.group_of[b] && accept(a, b, &mut picks) {
                break;
            }
            attempts += 1;
            if attempts >= MAX_ATTEMPTS {
                return Err(Error::UnsatisfiableConfig(format!("no new negative pair after {MAX_ATTEMPTS} attempts")));
            }
        }
    }

    picks.shuffle(&mut rng);
    let instances = part.instances();
    picks
        .into_iter()
        .map(|(a, b)| {
            let (x, y) = (&instances[a], &instances[b]);
            Ok(PairExample {
                first_uid: x.uid.clone(),
                second_uid: y.uid.clone(),
                first_text: render(x, scheme)?,
                second_text: render(y, scheme)?,
                label: if x.relation == y.relation { PairLabel::Same } else { PairLabel::Different },
                first_relation: x.relation.clone(),
                second_relation: y.relation.clone(),
            })
        })
        .collect()
}

/// Gold answer of an episode query.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Gold {
    Relation(RelationLabel),
    Nota,
}

impl Gold {
    pub const NOTA: &'static str = "NOTA";

    pub fn as_str(&self) -> &str {
        match self {
            Gold::Relation(r) => r.as_str(),
            Gold::Nota => Self::NOTA,
        }
    }
}

impl fmt::Display for Gold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Gold {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Gold {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(if s == Gold::NOTA { Gold::Nota } else { Gold::Relation(RelationLabel::new(s)) })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportItem {
    pub uid: String,
    pub text: String,
    pub relation: RelationLabel,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryItem {
    pub uid: String,
    pub text: String,
    pub gold: Gold,
    /// The instance's own relation, also for NOTA queries.
    pub relation: RelationLabel,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Episode {
    pub m: usize,
    pub k: usize,
    pub support: Vec<SupportItem>,
    pub queries: Vec<QueryItem>,
}

impl Episode {
    /// Support relations in the order they were drawn.
    pub fn relations(&self) -> Vec<&RelationLabel> {
        self.support.iter().step_by(self.k.max(1)).map(|s| &s.relation).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EpisodeConfig {
    pub m: usize,
    pub k: usize,
    pub q: usize,
    pub nota_rate: f64,
    pub seed: u64,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig { m: 5, k: 1, q: 5, nota_rate: 0.5, seed: 0 }
    }
}

impl EpisodeConfig {
    pub fn nota_count(&self) -> usize {
        (self.q as f64 * self.nota_rate).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.k == 0 || self.q == 0 {
            return Err(Error::InvalidConfig("m, k and q must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.nota_rate) {
            return Err(Error::InvalidConfig(format!("nota_rate {} outside [0, 1]", self.nota_rate)));
        }
        Ok(())
    }
}

pub fn generate_episode(part: &Corpus, config: &EpisodeConfig, scheme: &MarkerScheme) -> Result<Episode> {
    config.validate()?;
    let EpisodeConfig { m, k, q, .. } = *config;
    let n_nota = config.nota_count();
    let n_known = q - n_nota;

    let groups: Vec<(&RelationLabel, &Vec<usize>)> = part.relation_index().iter().collect();
    if groups.len() < m {
        return Err(Error::InsufficientRelations(format!(
            "{m}-way episodes need {m} relations, part has {}",
            groups.len()
        )));
    }
    let needed = if n_known > 0 { k + 1 } else { k };
    let eligible: Vec<usize> = (0..groups.len()).filter(|&g| groups[g].1.len() >= needed).collect();
    if eligible.len() < m {
        return Err(Error::InsufficientInstances(format!(
            "only {} relations have the {needed} instances a {k}-shot episode needs",
            eligible.len()
        )));
    }
    if n_nota > 0 && groups.len() == m {
        return Err(Error::NoNotaSource(m));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let chosen: Vec<usize> = index::sample(&mut rng, eligible.len(), m).into_iter().map(|i| eligible[i]).collect();
    let mut in_episode = vec![false; groups.len()];
    chosen.iter().for_each(|&g| in_episode[g] = true);

    let instances = part.instances();
    let mut support = Vec::with_capacity(m * k);
    let mut remaining = Vec::new();
    for &g in &chosen {
        let positions = groups[g].1;
        let picked = index::sample(&mut rng, positions.len(), k);
        let mut used = vec![false; positions.len()];
        for i in picked {
            used[i] = true;
            let inst = &instances[positions[i]];
            support.push(SupportItem {
                uid: inst.uid.clone(),
                text: render(inst, scheme)?,
                relation: inst.relation.clone(),
            });
        }
        remaining.extend(positions.iter().zip(used).filter(|(_, u)| !u).map(|(&p, _)| p));
    }
    remaining.sort_unstable();

    if remaining.len() < n_known {
        return Err(Error::InsufficientInstances(format!(
            "{n_known} in-episode queries requested, {} non-support instances available",
            remaining.len()
        )));
    }
    let nota_pool: Vec<usize> = if n_nota > 0 {
        (0..groups.len()).filter(|&g| !in_episode[g]).flat_map(|g| groups[g].1.iter().copied()).collect()
    } else {
        Vec::new()
    };
    if nota_pool.len() < n_nota {
        return Err(Error::InsufficientInstances(format!(
            "{n_nota} NOTA queries requested, {} outside instances available",
            nota_pool.len()
        )));
    }

    let mut query_positions: Vec<(usize, bool)> =
        index::sample(&mut rng, remaining.len(), n_known).into_iter().map(|i| (remaining[i], false)).collect();
    query_positions.extend(index::sample(&mut rng, nota_pool.len(), n_nota).into_iter().map(|i| (nota_pool[i], true)));
    query_positions.shuffle(&mut rng);

    let queries = query_positions
        .into_iter()
        .map(|(p, nota)| {
            let inst = &instances[p];
            Ok(QueryItem {
                uid: inst.uid.clone(),
                text: render(inst, scheme)?,
                gold: if nota { Gold::Nota } else { Gold::Relation(inst.relation.clone()) },
                relation: inst.relation.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Episode { m, k, support, queries })
}

/// `count` episodes; episode `i` uses seed `config.seed + i`.
pub fn generate_episode_batch(
    part: &Corpus,
    config: &EpisodeConfig,
    count: usize,
    scheme: &MarkerScheme,
) -> Result<Vec<Episode>> {
    par::map_range(count, |i| {
        let cfg = EpisodeConfig { seed: config.seed.wrapping_add(i as u64), ..config.clone() };
        generate_episode(part, &cfg, scheme)
    })
    .into_iter()
    .collect()
}

/// Checks the structural episode invariants; returns a description of the first violation.
pub fn check_episode(episode: &Episode) -> std::result::Result<(), String> {
    use std::collections::BTreeMap;
    if episode.support.len() != episode.m * episode.k {
        return Err(format!("support has {} items, expected {}", episode.support.len(), episode.m * episode.k));
    }
    let mut per_relation: BTreeMap<&RelationLabel, usize> = BTreeMap::new();
    for s in &episode.support {
        *per_relation.entry(&s.relation).or_default() += 1;
    }
    if per_relation.len() != episode.m || per_relation.values().any(|&c| c != episode.k) {
        return Err(format!("support relation counts {per_relation:?}"));
    }
    let support_uids: HashSet<&str> = episode.support.iter().map(|s| s.uid.as_str()).collect();
    for query in &episode.queries {
        if support_uids.contains(query.uid.as_str()) {
            return Err(format!("query {} also in support", query.uid));
        }
        let known = per_relation.contains_key(&query.relation);
        match &query.gold {
            Gold::Nota if known => {
                return Err(format!("query {} marked NOTA but its relation is in support", query.uid))
            }
            Gold::Relation(r) if !known || r != &query.relation => {
                return Err(format!("query {} gold {r} inconsistent", query.uid))
            }
            _ => {}
        }
    }
    Ok(())
}
