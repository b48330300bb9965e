//! Declarative experiment configuration (TOML). Command-line flags override
//! individual fields.

use std::path::{Path, PathBuf};

use fsrc_core::encoder::{Optimizer, ToyEncoderParams, TrainConfig};
use fsrc_core::evaluator::Aggregation;
use fsrc_core::provenance::{hash_json, sha256_hex};
use fsrc_core::renderer::MarkerScheme;
use fsrc_core::sampler::{EpisodeConfig, NegativeSampling, PairDatasetConfig, PositiveWeighting};
use fsrc_core::splitter::{PartName, SplitConfig};
use fsrc_core::synth::SynthConfig;
use serde::{Deserialize, Serialize};

use crate::failure::{Failure, Result};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Input corpus for `ingest`.
    pub corpus: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub workers: usize,
    pub strict: bool,
    pub markers: MarkerScheme,
    pub synth: SynthConfig,
    pub split: SplitSpec,
    pub subset: SubsetSpec,
    pub pairs: PairsSpec,
    pub episodes: EpisodesSpec,
    pub encoder: EncoderSpec,
    pub train: TrainSpec,
    pub eval: EvalSpec,
    pub grid: GridSpec,
    pub matrix: MatrixSpec,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub train_min_count: usize,
    pub dev_relation_count: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        let d = SplitConfig::default();
        SplitSpec { train_min_count: d.train_min_count, dev_relation_count: d.dev_relation_count }
    }
}

impl SplitSpec {
    pub fn to_core(&self) -> SplitConfig {
        SplitConfig { train_min_count: self.train_min_count, dev_relation_count: self.dev_relation_count, seed: 0 }
    }
}

/// Which train relations a subset keeps, plus an optional example cap.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubsetSpec {
    pub min_count: Option<usize>,
    pub top_n: Option<usize>,
    pub random_n: Option<usize>,
    pub relations: Option<Vec<String>>,
    /// A subset manifest written by an earlier `subset` run.
    pub manifest: Option<PathBuf>,
    pub cap: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairsSpec {
    pub part: PartName,
    pub size: usize,
    pub negative_fraction: f64,
    pub positive_weighting: PositiveWeighting,
    pub negative_sampling: NegativeSampling,
    pub allow_duplicates: bool,
}

impl Default for PairsSpec {
    fn default() -> Self {
        let d = PairDatasetConfig::default();
        PairsSpec {
            part: PartName::Train,
            size: d.size,
            negative_fraction: d.negative_fraction,
            positive_weighting: d.positive_weighting,
            negative_sampling: d.negative_sampling,
            allow_duplicates: d.allow_duplicates,
        }
    }
}

impl PairsSpec {
    pub fn to_core(&self, seed: u64) -> PairDatasetConfig {
        PairDatasetConfig {
            size: self.size,
            negative_fraction: self.negative_fraction,
            seed,
            positive_weighting: self.positive_weighting,
            negative_sampling: self.negative_sampling,
            allow_duplicates: self.allow_duplicates,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodesSpec {
    pub part: PartName,
    pub m: usize,
    pub k: usize,
    pub q: usize,
    pub nota_rate: f64,
    pub count: usize,
}

impl Default for EpisodesSpec {
    fn default() -> Self {
        let d = EpisodeConfig::default();
        EpisodesSpec { part: PartName::Test, m: d.m, k: d.k, q: d.q, nota_rate: d.nota_rate, count: 100 }
    }
}

impl EpisodesSpec {
    pub fn to_core(&self, seed: u64) -> EpisodeConfig {
        EpisodeConfig { m: self.m, k: self.k, q: self.q, nota_rate: self.nota_rate, seed }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderKindSpec {
    #[default]
    Toy,
    Bridged,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderSpec {
    pub kind: EncoderKindSpec,
    pub hash_dim: usize,
    pub proj_dim: usize,
    pub margin: f64,
    /// Bridge command; falls back to `FSRC_BRIDGE_CMD`.
    pub command: Option<String>,
}

impl Default for EncoderSpec {
    fn default() -> Self {
        let d = ToyEncoderParams::default();
        EncoderSpec {
            kind: EncoderKindSpec::Toy,
            hash_dim: d.hash_dim,
            proj_dim: d.proj_dim,
            margin: d.margin,
            command: None,
        }
    }
}

impl EncoderSpec {
    pub fn toy_params(&self, seed: u64) -> ToyEncoderParams {
        ToyEncoderParams { hash_dim: self.hash_dim, proj_dim: self.proj_dim, margin: self.margin, seed }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSpec {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub eval_every: usize,
    pub optimizer: Optimizer,
}

impl Default for TrainSpec {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainSpec {
            batch_size: d.batch_size,
            epochs: d.epochs,
            learning_rate: d.learning_rate,
            weight_decay: d.weight_decay,
            eval_every: d.eval_every,
            optimizer: d.optimizer,
        }
    }
}

impl TrainSpec {
    pub fn to_core(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            weight_decay: self.weight_decay,
            eval_every: self.eval_every,
            seed,
            optimizer: self.optimizer,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSpec {
    /// Fixed pair threshold; selected on dev pairs when absent.
    pub threshold: Option<f64>,
    /// Fixed NOTA threshold; selected on dev pairs when absent.
    pub nota_threshold: Option<f64>,
    pub aggregation: Aggregation,
}

/// The relation-diversity grid: one trained encoder per (relation level, data
/// size), evaluated at every test negative fraction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    /// Diversity levels as minimum per-relation counts.
    pub thresholds: Vec<usize>,
    /// Diversity levels as top-N most frequent relations.
    pub top_n: Vec<usize>,
    /// Training pair counts.
    pub data_sizes: Vec<usize>,
    pub train_negative_fraction: f64,
    pub neg_fractions: Vec<f64>,
    pub dev_size: usize,
    pub test_size: usize,
    /// Shot counts for episode accuracy per level; empty skips episodes.
    pub episode_ks: Vec<usize>,
    pub episode_count: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            thresholds: vec![5000, 1000, 500, 100, 40],
            top_n: Vec::new(),
            data_sizes: vec![100_000],
            train_negative_fraction: 0.5,
            neg_fractions: vec![0.5, 0.9, 0.99],
            dev_size: 1000,
            test_size: 10_000,
            episode_ks: Vec::new(),
            episode_count: 100,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSpec {
    pub id: String,
    /// Corpus file; when absent the dataset is synthesized with `synth_seed`.
    pub corpus: Option<PathBuf>,
    pub synth_seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatrixSpec {
    pub datasets: Vec<DatasetSpec>,
    pub ks: Vec<usize>,
    pub episodes_per_k: usize,
    pub train_pairs: usize,
    pub dev_pairs: usize,
}

impl Default for MatrixSpec {
    fn default() -> Self {
        MatrixSpec { datasets: Vec::new(), ks: vec![1, 5], episodes_per_k: 100, train_pairs: 10_000, dev_pairs: 1000 }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
        toml::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
    }

    /// Checks referenced paths and every nested config.
    pub fn validate(&self) -> Result<()> {
        let paths = self
            .corpus
            .iter()
            .chain(&self.subset.manifest)
            .chain(self.matrix.datasets.iter().filter_map(|d| d.corpus.as_ref()));
        for path in paths {
            if !path.exists() {
                return Err(fsrc_core::Error::FileNotFound(path.clone()).into());
            }
        }
        self.synth.validate()?;
        self.pairs.to_core(0).validate()?;
        self.episodes.to_core(0).validate()?;
        self.train.to_core(0).validate()?;
        self.encoder.toy_params(0).validate()?;
        let g = &self.grid;
        let fractions = g.neg_fractions.iter().chain([&g.train_negative_fraction]);
        if fractions.clone().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Failure::Config("grid negative fractions must lie in [0, 1]".into()));
        }
        if g.data_sizes.contains(&0) || g.dev_size == 0 || g.test_size == 0 || g.episode_ks.contains(&0) {
            return Err(Failure::Config("grid sizes and shot counts must be positive".into()));
        }
        if self.matrix.ks.contains(&0) {
            return Err(Failure::Config("matrix shot counts must be positive".into()));
        }
        Ok(())
    }

    /// Hash of the settings that determine artifact content; paths and the
    /// worker count are excluded.
    pub fn hash(&self) -> Result<String> {
        let mut canonical = self.clone();
        canonical.corpus = None;
        canonical.out = None;
        canonical.workers = 0;
        canonical.subset.manifest = None;
        for d in &mut canonical.matrix.datasets {
            d.corpus = None;
        }
        Ok(hash_json(&canonical)?)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("fsrc-out"))
    }
}

/// Independent seed for a named stage, derived from the global seed.
pub fn derive_seed(seed: u64, stage: &str) -> u64 {
    let digest = sha256_hex(format!("{seed}/{stage}").as_bytes());
    u64::from_str_radix(&digest[..16], 16).expect("hex digest")
}
