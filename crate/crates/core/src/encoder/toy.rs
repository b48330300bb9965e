//! Linear projection of hashed lexical features.
//!
//! The projection is stored column-major as `scale * weights` so decoupled
//! weight decay costs one multiplication per step instead of a sweep over
//! the full matrix. Checkpoints hold the materialized row-major matrix.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::features::{featurize, SparseVec, FEATURIZER_VERSION};
use super::{loss_from_distance, EmbeddingVector, Encoder, EncoderInfo, EncoderKind};
use crate::error::{Error, Result};
use crate::sampler::PairLabel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToyEncoderParams {
    pub hash_dim: usize,
    pub proj_dim: usize,
    pub margin: f64,
    /// Seed of the random initial projection.
    pub seed: u64,
}

impl Default for ToyEncoderParams {
    fn default() -> Self {
        ToyEncoderParams { hash_dim: 1 << 16, proj_dim: 64, margin: 1.0, seed: 0 }
    }
}

impl ToyEncoderParams {
    pub fn validate(&self) -> Result<()> {
        if self.hash_dim == 0 || self.proj_dim == 0 || self.hash_dim > u32::MAX as usize {
            return Err(Error::InvalidConfig("hash_dim and proj_dim must be positive".into()));
        }
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return Err(Error::InvalidConfig(format!("margin {} must be positive", self.margin)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ToyEncoder {
    params: ToyEncoderParams,
    /// Column-major: column `j` occupies `weights[j * proj_dim..(j + 1) * proj_dim]`.
    weights: Vec<f64>,
    scale: f64,
}

/// Gradient of a loss with respect to the projection, restricted to the
/// touched feature columns.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ColumnGrad {
    pub columns: BTreeMap<u32, Vec<f64>>,
}

impl ColumnGrad {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.columns.get(&(col as u32)).map_or(0.0, |c| c[row])
    }

    fn add_outer(&mut self, row_coeffs: &[f64], features: &SparseVec, weight: f64) {
        for &(col, x) in &features.entries {
            let column = self.columns.entry(col).or_insert_with(|| vec![0.0; row_coeffs.len()]);
            for (g, &c) in column.iter_mut().zip(row_coeffs) {
                *g += weight * c * x;
            }
        }
    }
}

impl ToyEncoder {
    /// Random Gaussian projection with entries of variance `1 / proj_dim`.
    pub fn init(params: &ToyEncoderParams) -> Result<Self> {
        params.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let std = (params.proj_dim as f64).powf(-0.5);
        let weights = (0..params.hash_dim * params.proj_dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * std
            })
            .collect();
        Ok(ToyEncoder { params: params.clone(), weights, scale: 1.0 })
    }

    pub fn params(&self) -> &ToyEncoderParams {
        &self.params
    }

    pub fn proj_dim(&self) -> usize {
        self.params.proj_dim
    }

    pub fn hash_dim(&self) -> usize {
        self.params.hash_dim
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.scale * self.weights[col * self.params.proj_dim + row]
    }

    pub fn set_entry(&mut self, row: usize, col: usize, value: f64) {
        self.weights[col * self.params.proj_dim + row] = value / self.scale;
    }

    /// Row-major copy of the projection matrix.
    pub fn projection(&self) -> Vec<f64> {
        let (p, h) = (self.params.proj_dim, self.params.hash_dim);
        let mut out = vec![0.0; p * h];
        for col in 0..h {
            for row in 0..p {
                out[row * h + col] = self.scale * self.weights[col * p + row];
            }
        }
        out
    }

    pub fn featurize(&self, text: &str) -> SparseVec {
        featurize(text, self.params.hash_dim)
    }

    /// `W x` for a sparse feature vector.
    pub fn project(&self, features: &SparseVec) -> Vec<f64> {
        let p = self.params.proj_dim;
        let mut out = vec![0.0; p];
        for &(col, x) in &features.entries {
            let column = &self.weights[col as usize * p..(col as usize + 1) * p];
            for (o, &w) in out.iter_mut().zip(column) {
                *o += w * x;
            }
        }
        out.iter_mut().for_each(|o| *o *= self.scale);
        out
    }

    /// Contrastive loss of one pair and its gradient, given the feature
    /// difference `x1 - x2` (the loss depends on the pair only through it).
    pub fn pair_loss_grad(&self, diff: &SparseVec, label: PairLabel) -> (f64, ColumnGrad) {
        let delta = self.project(diff);
        let d = delta.iter().map(|v| v * v).sum::<f64>().sqrt();
        let loss = loss_from_distance(d, label, self.params.margin);
        let coeff = match label {
            PairLabel::Same => 2.0,
            PairLabel::Different if d > 0.0 && d < self.params.margin => -2.0 * (self.params.margin - d) / d,
            PairLabel::Different => 0.0,
        };
        let mut grad = ColumnGrad::default();
        if coeff != 0.0 {
            let row_coeffs: Vec<f64> = delta.iter().map(|v| coeff * v).collect();
            grad.add_outer(&row_coeffs, diff, 1.0);
        }
        (loss, grad)
    }

    /// Loss of a pair computed from the two projected sentences.
    pub fn pair_loss(&self, first: &SparseVec, second: &SparseVec, label: PairLabel) -> f64 {
        let (a, b) = (self.project(first), self.project(second));
        let d = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        loss_from_distance(d, label, self.params.margin)
    }

    pub(crate) fn scale(&self) -> f64 {
        self.scale
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    /// Multiplies the whole projection by `factor`.
    pub(crate) fn decay(&mut self, factor: f64) {
        self.scale *= factor;
        if self.scale < 1e-3 {
            self.fold_scale();
        }
    }

    /// Moves the pending scale into the weights, matching what a checkpoint stores.
    pub(crate) fn fold_scale(&mut self) {
        let s = self.scale;
        self.weights.iter_mut().for_each(|w| *w *= s);
        self.scale = 1.0;
    }

    pub fn write_checkpoint(&self, mut out: impl Write) -> Result<()> {
        let header = CheckpointHeader {
            format: CHECKPOINT_FORMAT.into(),
            hash_dim: self.params.hash_dim,
            proj_dim: self.params.proj_dim,
            margin: self.params.margin,
            seed: self.params.seed,
            featurizer: FEATURIZER_VERSION.into(),
        };
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        let mut buf = Vec::with_capacity(self.weights.len() * 8);
        for v in self.projection() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)?;
        Ok(())
    }

    pub fn read_checkpoint(mut input: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        let newline =
            bytes.iter().position(|&b| b == b'\n').ok_or_else(|| Error::InvalidCheckpoint("missing header".into()))?;
        let header: CheckpointHeader =
            serde_json::from_slice(&bytes[..newline]).map_err(|e| Error::InvalidCheckpoint(e.to_string()))?;
        if header.format != CHECKPOINT_FORMAT {
            return Err(Error::InvalidCheckpoint(format!("unknown format {:?}", header.format)));
        }
        if header.featurizer != FEATURIZER_VERSION {
            return Err(Error::InvalidCheckpoint(format!("featurizer {:?} not supported", header.featurizer)));
        }
        let params = ToyEncoderParams {
            hash_dim: header.hash_dim,
            proj_dim: header.proj_dim,
            margin: header.margin,
            seed: header.seed,
        };
        params.validate().map_err(|e| Error::InvalidCheckpoint(e.to_string()))?;
        let body = &bytes[newline + 1..];
        let (p, h) = (params.proj_dim, params.hash_dim);
        if body.len() != p * h * 8 {
            return Err(Error::InvalidCheckpoint(format!("expected {} matrix bytes, found {}", p * h * 8, body.len())));
        }
        let mut weights = vec![0.0; p * h];
        for (i, chunk) in body.chunks_exact(8).enumerate() {
            let v = f64::from_le_bytes(chunk.try_into().expect("chunk of 8"));
            if !v.is_finite() {
                return Err(Error::InvalidCheckpoint("non-finite projection entry".into()));
            }
            let (row, col) = (i / h, i % h);
            weights[col * p + row] = v;
        }
        Ok(ToyEncoder { params, weights, scale: 1.0 })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_checkpoint(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::FileNotFound(path.to_path_buf()));
        }
        Self::read_checkpoint(std::fs::File::open(path)?)
    }

    /// SHA-256 of the checkpoint bytes.
    pub fn checkpoint_id(&self) -> String {
        let mut buf = Vec::new();
        self.write_checkpoint(&mut buf).expect("in-memory write");
        hex::encode(Sha256::digest(&buf))
    }
}

const CHECKPOINT_FORMAT: &str = "fsrc-toy-encoder";

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    format: String,
    hash_dim: usize,
    proj_dim: usize,
    margin: f64,
    seed: u64,
    featurizer: String,
}

impl Encoder for ToyEncoder {
    fn info(&self) -> EncoderInfo {
        let mut metadata = BTreeMap::new();
        metadata.insert("hash_dim".into(), self.params.hash_dim.to_string());
        metadata.insert("margin".into(), self.params.margin.to_string());
        metadata.insert("seed".into(), self.params.seed.to_string());
        metadata.insert("featurizer".into(), FEATURIZER_VERSION.into());
        EncoderInfo { kind: EncoderKind::Toy, dim: self.params.proj_dim, metadata }
    }

    fn dim(&self) -> usize {
        self.params.proj_dim
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        if text.is_empty() {
            return Err(Error::EmptyText);
        }
        EmbeddingVector::new(self.project(&self.featurize(text)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn small(seed: u64) -> ToyEncoder {
        ToyEncoder::init(&ToyEncoderParams { hash_dim: 32, proj_dim: 4, margin: 1.0, seed }).unwrap()
    }

    #[test]
    fn embed_is_deterministic_and_shaped() {
        let enc = ToyEncoder::init(&ToyEncoderParams { seed: 1, ..Default::default() }).unwrap();
        let a = enc.embed("<s> Bill </s> founded <o> Microsoft </o>").unwrap();
        assert_eq!(a, enc.embed("<s> Bill </s> founded <o> Microsoft </o>").unwrap());
        assert_eq!(a.dim(), 64);
        assert_eq!(enc.embed("something else").unwrap().dim(), 64);
        assert!(matches!(enc.embed(""), Err(Error::EmptyText)));
    }

    #[test]
    fn featureless_text_embeds_to_zero() {
        let enc = small(3);
        let v = enc.embed("\u{1}\u{2}").unwrap();
        assert!(v.is_zero());
        assert_eq!(v.dim(), 4);
    }

    /// Central finite differences over every projection entry.
    fn finite_difference(enc: &ToyEncoder, x1: &SparseVec, x2: &SparseVec, label: PairLabel, h: f64) -> Vec<Vec<f64>> {
        let mut probe = enc.clone();
        (0..enc.proj_dim())
            .map(|row| {
                (0..enc.hash_dim())
                    .map(|col| {
                        let w = enc.entry(row, col);
                        probe.set_entry(row, col, w + h);
                        let up = probe.pair_loss(x1, x2, label);
                        probe.set_entry(row, col, w - h);
                        let down = probe.pair_loss(x1, x2, label);
                        probe.set_entry(row, col, w);
                        (up - down) / (2.0 * h)
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let words = ["alpha", "beta", "gamma", "delta", "eps", "zeta", "eta", "theta", "<s>", "</s>"];
        let mut checked = 0;
        for trial in 0..40 {
            let mut enc = small(trial);
            // Shrink so DIFFERENT pairs fall inside the margin half the time.
            if trial % 2 == 1 {
                for row in 0..4 {
                    for col in 0..32 {
                        let w = enc.entry(row, col);
                        enc.set_entry(row, col, w * 0.3);
                    }
                }
            }
            let sentence = |rng: &mut ChaCha8Rng| {
                (0..rng.random_range(2..6))
                    .map(|_| words[rng.random_range(0..words.len())])
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            let (s1, s2) = (sentence(&mut rng), sentence(&mut rng));
            let (x1, x2) = (enc.featurize(&s1), enc.featurize(&s2));
            let label = if trial % 3 == 0 { PairLabel::Same } else { PairLabel::Different };
            let (_, grad) = enc.pair_loss_grad(&x1.sub(&x2), label);
            let numeric = finite_difference(&enc, &x1, &x2, label, 1e-6);
            for (row, numeric_row) in numeric.iter().enumerate() {
                for (col, &n) in numeric_row.iter().enumerate() {
                    let a = grad.get(row, col);
                    let scale = a.abs().max(n.abs());
                    if scale > 1e-6 {
                        assert!((a - n).abs() / scale < 1e-4, "trial {trial} ({row},{col}): {a} vs {n}");
                        checked += 1;
                    } else {
                        assert!((a - n).abs() < 1e-8);
                    }
                }
            }
        }
        assert!(checked > 100);
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut enc = small(9);
        enc.decay(0.5);
        let mut buf = Vec::new();
        enc.write_checkpoint(&mut buf).unwrap();
        let back = ToyEncoder::read_checkpoint(&buf[..]).unwrap();
        assert_eq!(back.projection(), enc.projection());
        assert_eq!(back.params(), enc.params());
        assert_eq!(back.checkpoint_id(), enc.checkpoint_id());
        assert!(ToyEncoder::read_checkpoint(&buf[..buf.len() - 1]).is_err());
    }

    #[test]
    fn decay_preserves_entries_across_rescaling() {
        let mut enc = small(2);
        let before = enc.entry(1, 5);
        for _ in 0..20 {
            enc.decay(0.5);
        }
        let expected = before * 0.5f64.powi(20);
        assert!((enc.entry(1, 5) - expected).abs() <= expected.abs() * 1e-12);
    }
}
