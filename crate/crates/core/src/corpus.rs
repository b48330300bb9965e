//! Relation corpora: ingestion, validation and indexing.
//!
//! The on-disk format is UTF-8 JSON Lines. Each line is one object with the
//! keys `uid`, `text`, `head`, `tail` and `relation`; `head` and `tail` are
//! `[start, end]` pairs of *character* offsets (Unicode scalar values, start
//! inclusive, end exclusive). Unknown keys are ignored and blank lines are
//! skipped.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

/// Half-open character range `[start, end)` within a sentence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
}

impl EntitySpan {
    pub fn new(start: usize, end: usize) -> Self {
        EntitySpan { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn overlaps(&self, other: &EntitySpan) -> bool {
        self.start < other.end && other.start < self.end
    }
}

impl From<[usize; 2]> for EntitySpan {
    fn from([start, end]: [usize; 2]) -> Self {
        EntitySpan { start, end }
    }
}

impl From<EntitySpan> for [usize; 2] {
    fn from(span: EntitySpan) -> Self {
        [span.start, span.end]
    }
}

/// Opaque relation identifier, compared byte for byte.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelationLabel(String);

impl RelationLabel {
    pub fn new(id: impl Into<String>) -> Self {
        RelationLabel(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for RelationLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for RelationLabel {
    fn from(s: &str) -> Self {
        RelationLabel(s.to_owned())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationInstance {
    pub uid: String,
    pub text: String,
    pub head: EntitySpan,
    pub tail: EntitySpan,
    pub relation: RelationLabel,
}

impl RelationInstance {
    /// Checks span bounds and head/tail overlap against the sentence length.
    pub fn validate(&self) -> std::result::Result<(), SpanProblem> {
        if self.uid.is_empty() {
            return Err(SpanProblem::Malformed("empty uid".into()));
        }
        if self.relation.as_str().is_empty() {
            return Err(SpanProblem::Malformed("empty relation label".into()));
        }
        let len = self.text.chars().count();
        for (name, span) in [("head", self.head), ("tail", self.tail)] {
            if span.start >= span.end || span.end > len {
                return Err(SpanProblem::OutOfBounds(format!(
                    "{name} span ({}, {}) invalid for sentence of {len} characters",
                    span.start, span.end
                )));
            }
        }
        if self.head.overlaps(&self.tail) {
            return Err(SpanProblem::Overlap);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SpanProblem {
    Malformed(String),
    OutOfBounds(String),
    Overlap,
}

/// An ordered, indexed collection of relation instances.
///
/// Immutable once built; iteration follows ingestion order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Corpus {
    instances: Vec<RelationInstance>,
    relation_index: BTreeMap<RelationLabel, Vec<usize>>,
}

impl Corpus {
    /// Builds a corpus from already-validated instances.
    ///
    /// Fails on a repeated uid.
    pub fn from_instances(instances: Vec<RelationInstance>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(instances.len());
        for (pos, inst) in instances.iter().enumerate() {
            if !seen.insert(inst.uid.as_str()) {
                return Err(Error::DuplicateUid { line: pos + 1, uid: inst.uid.clone() });
            }
        }
        Ok(Self::build(instances))
    }

    fn build(instances: Vec<RelationInstance>) -> Self {
        let mut relation_index: BTreeMap<RelationLabel, Vec<usize>> = BTreeMap::new();
        for (pos, inst) in instances.iter().enumerate() {
            relation_index.entry(inst.relation.clone()).or_default().push(pos);
        }
        Corpus { instances, relation_index }
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn instances(&self) -> &[RelationInstance] {
        &self.instances
    }

    pub fn relation_count(&self) -> usize {
        self.relation_index.len()
    }

    /// Relation labels in ascending order.
    pub fn relations(&self) -> impl Iterator<Item = &RelationLabel> {
        self.relation_index.keys()
    }

    pub fn relation_index(&self) -> &BTreeMap<RelationLabel, Vec<usize>> {
        &self.relation_index
    }

    /// Instances of one relation, in corpus order.
    pub fn instances_of<'a>(&'a self, relation: &RelationLabel) -> impl Iterator<Item = &'a RelationInstance> + 'a {
        self.relation_index.get(relation).into_iter().flatten().map(move |&i| &self.instances[i])
    }

    /// Sub-corpus of the instances whose relation is in `relations`, order preserved.
    pub fn restrict(&self, relations: &BTreeSet<RelationLabel>) -> Corpus {
        self.filter(|inst| relations.contains(&inst.relation))
    }

    pub fn filter(&self, mut keep: impl FnMut(&RelationInstance) -> bool) -> Corpus {
        Self::build(self.instances.iter().filter(|i| keep(i)).cloned().collect())
    }

    /// Writes the corpus in its canonical line format.
    pub fn write_jsonl(&self, mut out: impl Write) -> Result<()> {
        for inst in &self.instances {
            serde_json::to_writer(&mut out, inst)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }
}

/// Outcome of ingesting a corpus file.
#[derive(Clone, Debug)]
pub struct Ingested {
    pub corpus: Corpus,
    /// Invalid records dropped in lenient mode.
    pub skipped: usize,
    /// Line numbers and reasons of skipped records.
    pub problems: Vec<(usize, String)>,
}

pub fn load_corpus(path: impl AsRef<Path>, strict: bool) -> Result<Ingested> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    let text = fs::read_to_string(path)?;
    parse_corpus(&text, strict)
}

/// Parses corpus lines. Lines are decoded in parallel and validated in order.
pub fn parse_corpus(text: &str, strict: bool) -> Result<Ingested> {
    let lines: Vec<(usize, &str)> =
        text.lines().enumerate().map(|(i, l)| (i + 1, l)).filter(|(_, l)| !l.trim().is_empty()).collect();
    let parsed = par::map(&lines, |&(line, raw)| parse_line(line, raw));

    let mut instances = Vec::with_capacity(parsed.len());
    let mut seen: HashSet<String> = HashSet::with_capacity(parsed.len());
    let mut problems = Vec::new();
    for ((line, _), result) in lines.iter().zip(parsed) {
        let result = result.and_then(|inst| {
            if seen.contains(&inst.uid) {
                Err(Error::DuplicateUid { line: *line, uid: inst.uid })
            } else {
                Ok(inst)
            }
        });
        match result {
            Ok(inst) => {
                seen.insert(inst.uid.clone());
                instances.push(inst);
            }
            Err(e) if strict => return Err(e),
            Err(e) => problems.push((*line, e.to_string())),
        }
    }
    Ok(Ingested { corpus: Corpus::build(instances), skipped: problems.len(), problems })
}

fn parse_line(line: usize, raw: &str) -> Result<RelationInstance> {
    let inst: RelationInstance =
        serde_json::from_str(raw).map_err(|e| Error::MalformedRecord { line, reason: e.to_string() })?;
    match inst.validate() {
        Ok(()) => Ok(inst),
        Err(SpanProblem::Malformed(reason)) => Err(Error::MalformedRecord { line, reason }),
        Err(SpanProblem::OutOfBounds(reason)) => Err(Error::SpanOutOfBounds { line, reason }),
        Err(SpanProblem::Overlap) => Err(Error::MalformedRecord { line, reason: "head and tail spans overlap".into() }),
    }
}

/// Per-relation instance counts.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationHistogram {
    pub counts: BTreeMap<RelationLabel, usize>,
    pub total: usize,
}

impl RelationHistogram {
    pub fn count(&self, relation: &RelationLabel) -> usize {
        self.counts.get(relation).copied().unwrap_or(0)
    }

    /// Labels ordered by count descending, then label ascending.
    pub fn ranked(&self) -> Vec<(&RelationLabel, usize)> {
        let mut ranked: Vec<_> = self.counts.iter().map(|(r, &c)| (r, c)).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ranked
    }
}

pub fn histogram(corpus: &Corpus) -> RelationHistogram {
    let counts: BTreeMap<_, _> =
        corpus.relation_index.iter().map(|(r, positions)| (r.clone(), positions.len())).collect();
    RelationHistogram { total: corpus.len(), counts }
}

/// Labels with at least `k` instances. `k = 0` behaves like `k = 1`.
pub fn relations_with_at_least(hist: &RelationHistogram, k: usize) -> BTreeSet<RelationLabel> {
    hist.counts.iter().filter(|(_, &c)| c >= k.max(1)).map(|(r, _)| r.clone()).collect()
}
