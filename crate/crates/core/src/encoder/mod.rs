//! Sentence encoders under the siamese cosine-similarity contract.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::sampler::PairLabel;

pub mod bridge;
pub mod features;
pub mod toy;
pub mod train;

pub use bridge::BridgeEncoder;
pub use toy::{ToyEncoder, ToyEncoderParams};
pub use train::{train_toy, Optimizer, TrainConfig, Trainer};

/// A finite-valued embedding.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::DimensionMismatch(0, 1));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("embedding".into()));
        }
        Ok(EmbeddingVector(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        EmbeddingVector::new(self.0.iter().map(|v| v * factor).collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EncoderKind {
    Toy,
    Bridged,
}

/// Kind, dimension and free-form provenance of an encoder.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderInfo {
    pub kind: EncoderKind,
    pub dim: usize,
    pub metadata: BTreeMap<String, String>,
}

pub trait Encoder: Send + Sync {
    fn info(&self) -> EncoderInfo;

    fn dim(&self) -> usize {
        self.info().dim
    }

    /// Embeds a single rendered sentence.
    fn embed(&self, text: &str) -> Result<EmbeddingVector>;

    /// Embeds many sentences, preserving order.
    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        par::try_map(texts, |t| self.embed(t))
    }
}

/// The encoder implementations the pipeline can score with.
pub enum EncoderHandle {
    Toy(ToyEncoder),
    Bridged(BridgeEncoder),
}

impl EncoderHandle {
    pub fn kind(&self) -> EncoderKind {
        match self {
            EncoderHandle::Toy(_) => EncoderKind::Toy,
            EncoderHandle::Bridged(_) => EncoderKind::Bridged,
        }
    }

    fn inner(&self) -> &dyn Encoder {
        match self {
            EncoderHandle::Toy(e) => e,
            EncoderHandle::Bridged(e) => e,
        }
    }

    fn check_shape(&self, v: &EmbeddingVector) -> Result<()> {
        let dim = self.inner().dim();
        if v.dim() != dim {
            return Err(Error::DimensionMismatch(v.dim(), dim));
        }
        Ok(())
    }
}

impl Encoder for EncoderHandle {
    fn info(&self) -> EncoderInfo {
        self.inner().info()
    }

    fn dim(&self) -> usize {
        self.inner().dim()
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        let v = self.inner().embed(text)?;
        self.check_shape(&v)?;
        Ok(v)
    }

    fn embed_batch(&self, texts: &[&str]) -> Result<Vec<EmbeddingVector>> {
        let out = self.inner().embed_batch(texts)?;
        for v in &out {
            self.check_shape(v)?;
        }
        Ok(out)
    }
}

/// Cosine similarity; 0 when either vector is all zeros.
pub fn cosine_similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    Ok(cosine(a.values(), b.values()))
}

pub(crate) fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn euclidean_distance(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    Ok(a.values().iter().zip(b.values()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
}

/// `d²` for SAME pairs, `max(0, margin - d)²` for DIFFERENT, with `d` the
/// Euclidean distance.
pub fn contrastive_loss(a: &EmbeddingVector, b: &EmbeddingVector, label: PairLabel, margin: f64) -> Result<f64> {
    let d = euclidean_distance(a, b)?;
    Ok(loss_from_distance(d, label, margin))
}

pub(crate) fn loss_from_distance(d: f64, label: PairLabel, margin: f64) -> f64 {
    match label {
        PairLabel::Same => d * d,
        PairLabel::Different => (margin - d).max(0.0).powi(2),
    }
}
