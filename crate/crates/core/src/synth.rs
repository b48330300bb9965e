//! Templated synthetic corpora with planted relation counts.
//!
//! Relation `r` is expressed by trigger words `stem_a + stem_b + inflection`,
//! where the stem pair `(a, b)` is unique to `r`. Trigger vocabularies are
//! therefore disjoint across relations while stems recur, so held-out
//! relations are novel compositions of pieces seen elsewhere.

use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, EntitySpan, RelationInstance, RelationLabel};
use crate::error::{Error, Result};

const STEM_SYLLABLES: &[&str] =
    &["ka", "lo", "mi", "nu", "pe", "ra", "si", "to", "vu", "ze", "bo", "di", "fa", "gu", "he", "jo"];
const INFLECTIONS: &[&str] = &["", "s", "ed", "ing", "er", "ian"];
const ENTITY_SYLLABLES: &[&str] = &["Ar", "Bel", "Cor", "Dun", "Eph", "Fyr", "Gwen", "Hal", "Isk", "Jor", "Kel", "Lom"];
const FILLER_WORDS: &[&str] =
    &["the", "of", "in", "a", "was", "and", "by", "with", "for", "at", "from", "as", "on", "its", "that", "which"];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    /// Instance count of each relation; relation `i` is labelled `rel{i:03}`.
    pub relation_counts: Vec<usize>,
    /// Size of the shared stem inventory trigger words are composed from.
    pub stems: usize,
    pub entity_pool: usize,
    /// Syllables in each of the two entity-name tokens.
    pub entity_syllables: usize,
    /// Upper bound on filler words inserted into a sentence.
    pub max_filler: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            relation_counts: bundled_counts(),
            stems: 20,
            entity_pool: 400,
            entity_syllables: 2,
            max_filler: 4,
            seed: 0,
        }
    }
}

/// 40 relations with 60..=138 instances and 15 with 10..=38.
pub fn bundled_counts() -> Vec<usize> {
    let frequent = (0..40).map(|i| 138 - 2 * i);
    let rare = (0..15).map(|i| 38 - 2 * i);
    frequent.chain(rare).collect()
}

pub fn relation_name(index: usize) -> RelationLabel {
    RelationLabel::new(format!("rel{index:03}"))
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.relation_counts.is_empty() || self.relation_counts.contains(&0) {
            return Err(Error::InvalidConfig("every synthetic relation needs at least one instance".into()));
        }
        if self.entity_syllables == 0 || self.entity_pool < 2 {
            return Err(Error::InvalidConfig("entity vocabulary sizes must be positive".into()));
        }
        let names = (ENTITY_SYLLABLES.len() as f64).powi(2 * self.entity_syllables as i32);
        if self.entity_pool as f64 > names / 2.0 {
            return Err(Error::InvalidConfig("entity_pool too large for the entity syllable inventory".into()));
        }
        if self.stems < 2 || self.stems > STEM_SYLLABLES.len() * STEM_SYLLABLES.len() / 2 {
            return Err(Error::InvalidConfig("stems must lie between 2 and half the two-syllable inventory".into()));
        }
        if self.relation_counts.len() > self.stems * (self.stems - 1) {
            return Err(Error::InvalidConfig("more relations than ordered stem pairs".into()));
        }
        Ok(())
    }
}

fn word(rng: &mut ChaCha8Rng, syllables: &[&str], n: usize) -> String {
    (0..n).map(|_| *syllables.choose(rng).expect("non-empty")).collect()
}

/// The stem pair expressing each relation.
fn stem_pairs(config: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<(String, String)> {
    let mut stems = BTreeSet::new();
    while stems.len() < config.stems {
        stems.insert(word(rng, STEM_SYLLABLES, 2));
    }
    let stems: Vec<String> = stems.into_iter().collect();
    let mut pairs: Vec<(usize, usize)> =
        (0..stems.len()).flat_map(|a| (0..stems.len()).filter(move |&b| b != a).map(move |b| (a, b))).collect();
    pairs.shuffle(rng);
    pairs.into_iter().take(config.relation_counts.len()).map(|(a, b)| (stems[a].clone(), stems[b].clone())).collect()
}

pub fn generate(config: &SynthConfig) -> Result<Corpus> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let stems = stem_pairs(config, &mut rng);
    let mut names = BTreeSet::new();
    while names.len() < config.entity_pool {
        let first = word(&mut rng, ENTITY_SYLLABLES, config.entity_syllables);
        let last = word(&mut rng, ENTITY_SYLLABLES, config.entity_syllables);
        names.insert(format!("{first} {last}"));
    }
    let names: Vec<String> = names.into_iter().collect();

    let mut instances = Vec::with_capacity(config.relation_counts.iter().sum());
    for (r, &count) in config.relation_counts.iter().enumerate() {
        let (a, b) = &stems[r];
        for i in 0..count {
            let head = names.choose(&mut rng).expect("non-empty").clone();
            let tail = loop {
                let t = names.choose(&mut rng).expect("non-empty");
                if *t != head {
                    break t.clone();
                }
            };
            let trigger = format!("{a}{b}{}", INFLECTIONS.choose(&mut rng).expect("non-empty"));
            let mut middle: Vec<&str> = vec![&trigger];
            for _ in 0..rng.random_range(0..=config.max_filler) {
                middle.push(FILLER_WORDS.choose(&mut rng).expect("non-empty"));
            }
            middle.shuffle(&mut rng);
            let head_first = rng.random_bool(0.5);
            let (first, second) = if head_first { (&head, &tail) } else { (&tail, &head) };
            let mut text = String::new();
            let first_span = EntitySpan::new(0, first.chars().count());
            text.push_str(first);
            for w in &middle {
                text.push(' ');
                text.push_str(w);
            }
            text.push(' ');
            let second_start = text.chars().count();
            text.push_str(second);
            let second_span = EntitySpan::new(second_start, second_start + second.chars().count());
            text.push('.');
            let (head_span, tail_span) = if head_first { (first_span, second_span) } else { (second_span, first_span) };
            instances.push(RelationInstance {
                uid: format!("syn-{r:03}-{i:05}"),
                text,
                head: head_span,
                tail: tail_span,
                relation: relation_name(r),
            });
        }
    }
    instances.shuffle(&mut rng);
    Corpus::from_instances(instances)
}
