//! The shared output directory: file naming, JSON and JSONL I/O, provenance
//! sidecars, and reloading of upstream stages.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use fsrc_core::corpus::{parse_corpus, Corpus};
use fsrc_core::provenance::{hash_json, sha256_hex};
use fsrc_core::splitter::{CorpusSplit, SplitManifest, SubsetManifest, TrainSubset};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::commands::apply_overrides;
use crate::config::{derive_seed, ExperimentConfig};
use crate::failure::{Failure, Result};
use crate::Cli;

pub const CORPUS: &str = "corpus.jsonl";
pub const INGEST: &str = "ingest.json";
pub const SPLIT: &str = "split.json";
pub const SUBSET: &str = "subset.json";
pub const CHECKPOINT: &str = "encoder.ckpt";
pub const TRAIN: &str = "train.json";
pub const EVAL_PAIRS: &str = "eval-pairs.json";
pub const EVAL_EPISODES: &str = "eval-episodes.json";
pub const GRID: &str = "grid.json";
pub const MATRIX: &str = "matrix.json";

pub fn pairs_file(name: &str) -> String {
    format!("pairs-{name}.jsonl")
}

pub fn episodes_file(name: &str) -> String {
    format!("episodes-{name}.jsonl")
}

/// Sidecar describing a data file that has no room for provenance itself.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub command: String,
    pub config_hash: String,
    pub corpus_hash: String,
    pub provenance: BTreeMap<String, String>,
}

pub fn meta_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    path.with_file_name(name)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitDoc {
    pub config_hash: String,
    pub corpus_hash: String,
    pub manifest: SplitManifest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetDoc {
    pub config_hash: String,
    pub corpus_hash: String,
    pub split_hash: String,
    pub manifest: SubsetManifest,
}

/// The cached corpus and the hash identifying it.
pub struct CachedCorpus {
    pub corpus: Corpus,
    pub hash: String,
}

pub struct LoadedSplit {
    pub split: CorpusSplit,
    pub hash: String,
}

/// Effective configuration and output location of one command.
pub struct Context {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub out: PathBuf,
}

impl Context {
    pub fn new(cli: &Cli) -> Result<Self> {
        let mut config = match &cli.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = cli.seed {
            config.seed = seed;
        }
        if let Some(workers) = cli.workers {
            config.workers = workers;
        }
        if let Some(out) = &cli.out {
            config.out = Some(out.clone());
        }
        config.strict |= cli.strict;
        apply_overrides(&mut config, &cli.command);
        Self::from_config(config)
    }

    pub fn from_config(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let out = config.out_dir();
        fs::create_dir_all(&out).map_err(|e| Failure::io(&out, e))?;
        Ok(Context { config_hash: config.hash()?, config, out })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn seed(&self, stage: &str) -> u64 {
        derive_seed(self.config.seed, stage)
    }

    pub fn meta(&self, command: &str, corpus_hash: &str, provenance: BTreeMap<String, String>) -> Meta {
        Meta {
            command: command.to_owned(),
            config_hash: self.config_hash.clone(),
            corpus_hash: corpus_hash.to_owned(),
            provenance,
        }
    }

    /// The corpus cached by `ingest`.
    pub fn corpus(&self) -> Result<CachedCorpus> {
        let path = self.path(CORPUS);
        let text = read_text(&path, "ingest")?;
        let corpus = parse_corpus(&text, true)?.corpus;
        Ok(CachedCorpus { hash: sha256_hex(text.as_bytes()), corpus })
    }

    /// The split written by `split`, re-derived from the cached corpus.
    pub fn split(&self, corpus: &CachedCorpus) -> Result<LoadedSplit> {
        let doc: SplitDoc = read_json(&self.path(SPLIT), "split")?;
        if doc.corpus_hash != corpus.hash {
            return Err(Failure::ProvenanceMismatch(format!(
                "{SPLIT} was computed on corpus {} but the cached corpus is {}",
                doc.corpus_hash, corpus.hash
            )));
        }
        let split = CorpusSplit::from_manifest(&corpus.corpus, &doc.manifest)?;
        Ok(LoadedSplit { hash: hash_json(&doc.manifest)?, split })
    }

    /// The subset written by `subset`, if any.
    pub fn subset(&self, split: &LoadedSplit) -> Result<Option<(TrainSubset, String)>> {
        let path = self.path(SUBSET);
        if !path.exists() {
            return Ok(None);
        }
        let doc: SubsetDoc = read_json(&path, "subset")?;
        if doc.split_hash != split.hash {
            return Err(Failure::ProvenanceMismatch(format!(
                "{SUBSET} was selected from split {} but the current split is {}",
                doc.split_hash, split.hash
            )));
        }
        let subset = TrainSubset::from_manifest(&split.split, &doc.manifest)?;
        Ok(Some((subset, hash_json(&doc.manifest)?)))
    }
}

pub fn read_text(path: &Path, stage: &'static str) -> Result<String> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Failure::MissingArtifact { path: path.to_path_buf(), stage },
        _ => Failure::io(path, e),
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path, stage: &'static str) -> Result<T> {
    Ok(serde_json::from_str(&read_text(path, stage)?)?)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path, stage: &'static str) -> Result<Vec<T>> {
    parse_jsonl(&read_text(path, stage)?)
}

pub fn parse_jsonl<T: DeserializeOwned>(text: &str) -> Result<Vec<T>> {
    text.lines().filter(|l| !l.trim().is_empty()).map(|l| serde_json::from_str(l).map_err(Failure::from)).collect()
}

pub fn read_meta(path: &Path) -> Result<Option<Meta>> {
    let meta = meta_path(path);
    if !meta.exists() {
        return Ok(None);
    }
    Ok(Some(read_json(&meta, "the producing command")?))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Failure::io(path, e))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn jsonl_string<T: Serialize>(records: &[T]) -> Result<String> {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r)?);
        out.push('\n');
    }
    Ok(out)
}

/// Writes a data file and its `.meta.json` sidecar.
pub fn write_with_meta(path: &Path, text: &str, meta: &Meta) -> Result<()> {
    write_text(path, text)?;
    write_json(&meta_path(path), meta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sidecar_sits_next_to_its_file() {
        assert_eq!(meta_path(Path::new("out/pairs-dev.jsonl")), PathBuf::from("out/pairs-dev.jsonl.meta.json"));
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.jsonl");
        write_text(&path, &jsonl_string(&[1u32, 2, 3]).unwrap()).unwrap();
        assert_eq!(read_jsonl::<u32>(&path, "x").unwrap(), vec![1, 2, 3]);
    }

    #[test]
    fn missing_artifact_names_the_stage() {
        let err = read_text(Path::new("/nonexistent/split.json"), "split").unwrap_err();
        assert_eq!(err.exit_code(), 15);
        assert!(err.to_string().contains("fsrc split"));
    }
}
