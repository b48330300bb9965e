use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::SparseVec;
use super::toy::{ColumnGrad, ToyEncoder, ToyEncoderParams};
use crate::error::{Error, Result};
use crate::evaluator::{curve_point, LearningCurve};
use crate::sampler::{PairExample, PairLabel};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    /// Mini-batch gradient descent.
    #[default]
    Sgd,
    /// Adam with lazily updated moments (only touched columns move).
    Adam,
}

impl std::str::FromStr for Optimizer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(Optimizer::Sgd),
            "adam" => Ok(Optimizer::Adam),
            other => Err(Error::InvalidConfig(format!("unknown optimizer {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    /// Toy-encoder default 0.01; transformer fine-tuning would use 2e-5.
    pub learning_rate: f64,
    /// Decoupled: every step multiplies the projection by `1 - lr * weight_decay`.
    pub weight_decay: f64,
    pub eval_every: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 4,
            epochs: 4,
            learning_rate: 0.01,
            weight_decay: 0.1,
            eval_every: 1000,
            seed: 0,
            optimizer: Optimizer::Sgd,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.eval_every == 0 {
            return Err(Error::InvalidConfig("batch_size and eval_every must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite())
            || self.weight_decay.is_nan()
            || self.weight_decay < 0.0
        {
            return Err(Error::InvalidConfig("learning_rate must be positive, weight_decay non-negative".into()));
        }
        if self.learning_rate * self.weight_decay >= 1.0 {
            return Err(Error::InvalidConfig("learning_rate * weight_decay must be below 1".into()));
        }
        Ok(())
    }
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

struct AdamState {
    first: Vec<f64>,
    second: Vec<f64>,
}

/// Single-threaded, seeded training loop over a pair dataset.
pub struct Trainer<'a> {
    encoder: ToyEncoder,
    config: TrainConfig,
    examples: Vec<(SparseVec, PairLabel)>,
    order: Vec<usize>,
    rng: ChaCha8Rng,
    step: usize,
    dev_pairs: &'a [PairExample],
    curve: LearningCurve,
    adam: Option<AdamState>,
    epoch_losses: Vec<f64>,
}

impl<'a> Trainer<'a> {
    pub fn new(
        pairs: &[PairExample],
        config: &TrainConfig,
        params: &ToyEncoderParams,
        dev_pairs: &'a [PairExample],
    ) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        config.validate()?;
        let encoder = ToyEncoder::init(params)?;
        let examples = pairs
            .iter()
            .map(|p| (encoder.featurize(&p.first_text).sub(&encoder.featurize(&p.second_text)), p.label))
            .collect();
        let adam = (config.optimizer == Optimizer::Adam).then(|| {
            let n = params.hash_dim * params.proj_dim;
            AdamState { first: vec![0.0; n], second: vec![0.0; n] }
        });
        Ok(Trainer {
            encoder,
            config: config.clone(),
            examples,
            order: (0..pairs.len()).collect(),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            step: 0,
            dev_pairs,
            curve: LearningCurve::default(),
            adam,
            epoch_losses: Vec::new(),
        })
    }

    pub fn encoder(&self) -> &ToyEncoder {
        &self.encoder
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn curve(&self) -> &LearningCurve {
        &self.curve
    }

    /// Mean training loss of each finished epoch.
    pub fn epoch_losses(&self) -> &[f64] {
        &self.epoch_losses
    }

    /// One shuffled pass over the training pairs; returns the mean batch loss.
    pub fn run_epoch(&mut self) -> Result<f64> {
        self.order.shuffle(&mut self.rng);
        let order = std::mem::take(&mut self.order);
        let mut total = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(self.config.batch_size) {
            let loss = self.train_batch(batch)?;
            total += loss;
            batches += 1;
            if self.step.is_multiple_of(self.config.eval_every) && !self.dev_pairs.is_empty() {
                let point = curve_point(&self.encoder, self.step, self.dev_pairs)?;
                self.curve.points.push(point);
            }
        }
        self.order = order;
        let mean = total / batches as f64;
        self.epoch_losses.push(mean);
        Ok(mean)
    }

    fn train_batch(&mut self, batch: &[usize]) -> Result<f64> {
        let weight = 1.0 / batch.len() as f64;
        let mut grad = ColumnGrad::default();
        let mut loss = 0.0;
        for &i in batch {
            let (diff, label) = &self.examples[i];
            let (l, g) = self.encoder.pair_loss_grad(diff, *label);
            loss += weight * l;
            for (col, values) in g.columns {
                let acc = grad.columns.entry(col).or_insert_with(|| vec![0.0; values.len()]);
                acc.iter_mut().zip(&values).for_each(|(a, v)| *a += weight * v);
            }
        }
        self.step += 1;
        if !loss.is_finite() {
            return Err(Error::DivergedLoss(self.step));
        }
        self.apply(&grad);
        Ok(loss)
    }

    fn apply(&mut self, grad: &ColumnGrad) {
        let lr = self.config.learning_rate;
        self.encoder.decay(1.0 - lr * self.config.weight_decay);
        let scale = self.encoder.scale();
        let p = self.encoder.proj_dim();
        let t = self.step as i32;
        let weights = self.encoder.weights_mut();
        for (&col, values) in &grad.columns {
            let base = col as usize * p;
            for (row, &g) in values.iter().enumerate() {
                let e = base + row;
                let update = match &mut self.adam {
                    None => g,
                    Some(state) => {
                        state.first[e] = ADAM_BETA1 * state.first[e] + (1.0 - ADAM_BETA1) * g;
                        state.second[e] = ADAM_BETA2 * state.second[e] + (1.0 - ADAM_BETA2) * g * g;
                        let m_hat = state.first[e] / (1.0 - ADAM_BETA1.powi(t));
                        let v_hat = state.second[e] / (1.0 - ADAM_BETA2.powi(t));
                        m_hat / (v_hat.sqrt() + ADAM_EPS)
                    }
                };
                weights[e] -= lr * update / scale;
            }
        }
    }

    pub fn finish(mut self) -> (ToyEncoder, LearningCurve) {
        self.encoder.fold_scale();
        (self.encoder, self.curve)
    }
}

/// Trains a toy encoder; dev F1 is recorded every `eval_every` steps when
/// `dev_pairs` is non-empty.
pub fn train_toy(
    pairs: &[PairExample],
    config: &TrainConfig,
    params: &ToyEncoderParams,
    dev_pairs: &[PairExample],
) -> Result<(ToyEncoder, LearningCurve)> {
    let mut trainer = Trainer::new(pairs, config, params, dev_pairs)?;
    for _ in 0..config.epochs {
        trainer.run_epoch()?;
    }
    Ok(trainer.finish())
}
