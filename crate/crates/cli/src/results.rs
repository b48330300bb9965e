//! Result documents written by `train`, `eval` and `matrix`, and read back by
//! `report`.

use std::collections::BTreeMap;

use fsrc_core::evaluator::{CrossDatasetCell, CurvePoint, EpisodeEvalReport, PairEvalReport};
use fsrc_core::report::GridRow;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResultDoc {
    Train(TrainDoc),
    PairEval(PairEvalDoc),
    EpisodeEval(EpisodeEvalDoc),
    Grid(GridDoc),
    Matrix(MatrixDoc),
}

impl ResultDoc {
    pub fn kind(&self) -> &'static str {
        match self {
            ResultDoc::Train(_) => "train",
            ResultDoc::PairEval(_) => "pair_eval",
            ResultDoc::EpisodeEval(_) => "episode_eval",
            ResultDoc::Grid(_) => "grid",
            ResultDoc::Matrix(_) => "matrix",
        }
    }

    pub fn config_hash(&self) -> &str {
        match self {
            ResultDoc::Train(d) => &d.config_hash,
            ResultDoc::PairEval(d) => &d.config_hash,
            ResultDoc::EpisodeEval(d) => &d.config_hash,
            ResultDoc::Grid(d) => &d.config_hash,
            ResultDoc::Matrix(d) => &d.config_hash,
        }
    }

    /// Hash of the corpus the result was computed on. A matrix spans several
    /// corpora, so its hash covers the sorted per-dataset hashes.
    pub fn corpus_hash(&self) -> &str {
        match self {
            ResultDoc::Train(d) => &d.corpus_hash,
            ResultDoc::PairEval(d) => &d.corpus_hash,
            ResultDoc::EpisodeEval(d) => &d.corpus_hash,
            ResultDoc::Grid(d) => &d.corpus_hash,
            ResultDoc::Matrix(d) => &d.corpus_hash,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainDoc {
    pub config_hash: String,
    pub corpus_hash: String,
    pub checkpoint_id: String,
    pub steps: usize,
    pub eval_every: usize,
    pub epoch_losses: Vec<f64>,
    /// Dev F1 every `eval_every` steps; empty without dev pairs.
    pub curve: Vec<CurvePoint>,
    pub provenance: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairEvalDoc {
    pub config_hash: String,
    pub corpus_hash: String,
    pub report: PairEvalReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeEvalDoc {
    pub config_hash: String,
    pub corpus_hash: String,
    pub report: EpisodeEvalReport,
}

/// Episode accuracy of one grid model at one shot count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridEpisodeRow {
    pub rel_types: usize,
    pub data_size: usize,
    pub k: usize,
    pub accuracy: f64,
}

/// Dev learning curve of one grid model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCurve {
    pub rel_types: usize,
    pub data_size: usize,
    pub points: Vec<CurvePoint>,
}

/// One trained grid model and how its relations were chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridModel {
    pub rel_types: usize,
    pub data_size: usize,
    pub selection: String,
    pub checkpoint_id: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridDoc {
    pub config_hash: String,
    pub corpus_hash: String,
    pub split_hash: String,
    pub eval_every: usize,
    pub models: Vec<GridModel>,
    pub rows: Vec<GridRow>,
    pub episodes: Vec<GridEpisodeRow>,
    pub curves: Vec<GridCurve>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixDataset {
    pub id: String,
    pub corpus_hash: String,
    pub checkpoint_id: String,
    pub nota_threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixDoc {
    pub config_hash: String,
    pub corpus_hash: String,
    pub datasets: Vec<MatrixDataset>,
    pub cells: Vec<CrossDatasetCell>,
}
