//! Binary-classification training of a [`QaModel`] and multiple-choice
//! evaluation.
//!
//! Each minibatch holds `batch_triplets` (question, image, graph) triplets;
//! every triplet contributes its correct answer (label 1) and three decoys
//! (label 0). Evaluation scores all `K` candidates and takes the argmax.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, QaSample};
use crate::error::{Error, Result};
use crate::heads::{predict, Instance, QaModel, SampleInput};
use crate::nn::{apply_running_updates, Session};
use crate::tensor::{bce_mean, AdamState, Checkpoint};
use crate::Rng;

pub const DECOYS_PER_TRIPLET: usize = 3;

/// When the learning rate is divided by the decay factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum LrSchedule {
    /// After any epoch whose validation accuracy is strictly below the
    /// previous epoch's.
    OnValidationDecrease,
    /// After every `every` epochs regardless of validation accuracy.
    Fixed { every: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_triplets: usize,
    pub lr: f64,
    pub lr_decay_factor: f64,
    pub max_epochs: usize,
    pub seed: u64,
    pub schedule: LrSchedule,
    /// Write elapsed seconds into the log. Off by default so logs are
    /// byte-stable.
    pub record_wall_time: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_triplets: 100,
            lr: 1e-3,
            lr_decay_factor: 10.0,
            max_epochs: 30,
            seed: 0,
            schedule: LrSchedule::OnValidationDecrease,
            record_wall_time: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_triplets == 0 || self.max_epochs == 0 {
            return Err(Error::Config(
                "batch size and epoch count must be positive".into(),
            ));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate {} must be positive",
                self.lr
            )));
        }
        if self.lr_decay_factor.is_nan() || self.lr_decay_factor <= 1.0 {
            return Err(Error::Config(format!(
                "decay factor {} must exceed 1",
                self.lr_decay_factor
            )));
        }
        if let LrSchedule::Fixed { every: 0 } = self.schedule {
            return Err(Error::Config(
                "fixed schedule period must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A training triplet with the candidate positions it contributes: the
/// correct answer first, then the chosen decoys.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Triplet {
    pub sample: usize,
    pub candidates: Vec<usize>,
    pub group: Option<String>,
}

impl Triplet {
    pub fn labels(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.candidates.len()).map(|i| if i == 0 { 1.0 } else { 0.0 })
    }
}

/// Picks the decoys for one triplet: a random named group if the sample
/// has any with enough members, otherwise three decoys drawn uniformly.
pub fn choose_decoys(sample: &QaSample, index: usize, rng: &mut Rng) -> Result<Triplet> {
    let groups: Vec<(&String, &Vec<usize>)> = sample
        .decoy_groups
        .iter()
        .flatten()
        .filter(|(_, members)| members.len() >= DECOYS_PER_TRIPLET)
        .collect();
    let (pool, group) = match groups.choose(rng) {
        Some((name, members)) => ((*members).clone(), Some((*name).clone())),
        None => (sample.decoys(), None),
    };
    if pool.len() < DECOYS_PER_TRIPLET {
        return Err(Error::Sample {
            sample: sample.label(),
            message: format!(
                "{} decoys available, {DECOYS_PER_TRIPLET} needed",
                pool.len()
            ),
        });
    }
    let mut candidates = vec![sample.correct_index];
    candidates.extend(pool.choose_multiple(rng, DECOYS_PER_TRIPLET).copied());
    Ok(Triplet {
        sample: index,
        candidates,
        group,
    })
}

/// Decoy choice for a batch of sample positions.
pub fn sample_minibatch(
    samples: &[QaSample],
    indices: &[usize],
    rng: &mut Rng,
) -> Result<Vec<Triplet>> {
    indices
        .iter()
        .map(|&i| choose_decoys(&samples[i], i, rng))
        .collect()
}

/// Mean sigmoid cross-entropy of raw logits.
pub fn bce_loss(logits: &[f64], labels: &[f64]) -> f64 {
    bce_mean(logits, labels)
}

/// One line of the JSON-lines training log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Learning rate used during this epoch.
    pub lr: f64,
    pub train_loss: f64,
    pub val_accuracy: f64,
    pub wall_time: f64,
    pub batches: usize,
    pub triplets: usize,
    pub instances: usize,
    /// Triplets and instances in the largest batch of the epoch.
    pub max_batch_triplets: usize,
    pub max_batch_instances: usize,
}

pub fn log_to_jsonl(log: &[EpochRecord]) -> String {
    let mut out = String::new();
    for r in log {
        out.push_str(&serde_json::to_string(r).expect("log records serialize"));
        out.push('\n');
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall_accuracy: f64,
    pub per_type_accuracy: BTreeMap<String, f64>,
    pub per_type_counts: BTreeMap<String, usize>,
    pub n_samples: usize,
    /// Mean binary cross-entropy over every candidate of every sample.
    pub loss: f64,
}

impl EvalReport {
    /// Builds a report from per-sample scores.
    pub fn from_scores(samples: &[QaSample], scores: &[Vec<f64>]) -> Self {
        let mut correct = 0usize;
        let mut by_type: BTreeMap<String, (usize, usize)> = BTreeMap::new();
        let mut loss_sum = 0.0;
        let mut loss_n = 0usize;
        for (s, sc) in samples.iter().zip(scores) {
            let hit = predict(sc) == s.correct_index;
            correct += usize::from(hit);
            let e = by_type.entry(s.question_type().to_string()).or_default();
            e.0 += usize::from(hit);
            e.1 += 1;
            let labels: Vec<f64> = (0..sc.len())
                .map(|k| f64::from(u8::from(k == s.correct_index)))
                .collect();
            loss_sum += bce_mean(sc, &labels) * sc.len() as f64;
            loss_n += sc.len();
        }
        let n = samples.len();
        EvalReport {
            overall_accuracy: ratio(correct, n),
            per_type_accuracy: by_type
                .iter()
                .map(|(t, &(c, k))| (t.clone(), ratio(c, k)))
                .collect(),
            per_type_counts: by_type.iter().map(|(t, &(_, k))| (t.clone(), k)).collect(),
            n_samples: n,
            loss: if loss_n == 0 {
                0.0
            } else {
                loss_sum / loss_n as f64
            },
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// Fixed-width table of per-type accuracies.
    pub fn table(&self) -> String {
        let mut out = format!("{:<16} {:>8} {:>9}\n", "type", "count", "accuracy");
        for (t, acc) in &self.per_type_accuracy {
            out.push_str(&format!(
                "{:<16} {:>8} {:>8.2}%\n",
                t,
                self.per_type_counts[t],
                100.0 * acc
            ));
        }
        out.push_str(&format!(
            "{:<16} {:>8} {:>8.2}%\n",
            "overall",
            self.n_samples,
            100.0 * self.overall_accuracy
        ));
        out
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Candidate scores for every sample, computed in parallel.
pub fn score_all(model: &QaModel, inputs: &[SampleInput]) -> Result<Vec<Vec<f64>>> {
    let chunks: Vec<Vec<Vec<f64>>> = inputs
        .par_chunks(EVAL_CHUNK)
        .map(|chunk| model.score_batch(&chunk.iter().collect::<Vec<_>>()))
        .collect::<Result<_>>()?;
    Ok(chunks.into_iter().flatten().collect())
}

const EVAL_CHUNK: usize = 64;

pub fn evaluate(model: &QaModel, data: &Dataset) -> Result<EvalReport> {
    let scores = score_all(model, &data.inputs)?;
    Ok(EvalReport::from_scores(&data.samples, &scores))
}

/// Result of [`fit`]: the best-validation parameters and the epoch log.
#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: QaModel,
    pub log: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
}

/// Trains `model` in place for up to `max_epochs` and returns a copy
/// holding the parameters of the best validation epoch (earliest on ties).
pub fn fit(
    model: QaModel,
    train: &Dataset,
    val: &Dataset,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    fit_with(model, train, val, cfg, |_| {})
}

/// [`fit`] with a callback invoked after every epoch.
pub fn fit_with(
    mut model: QaModel,
    train: &Dataset,
    val: &Dataset,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::Config(
            "training and validation sets must be non-empty".into(),
        ));
    }
    let mut rng = Rng::seed_from_u64(cfg.seed);
    let mut adam = AdamState::new(model.store(), cfg.lr);
    let start = Instant::now();
    let mut log = Vec::new();
    let mut best: Option<(usize, f64, QaModel)> = None;
    let mut prev_val: Option<f64> = None;
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let lr = adam.learning_rate;
        let (mut loss_sum, mut batches, mut triplets, mut instances) = (0.0, 0, 0, 0);
        let (mut max_t, mut max_i) = (0, 0);
        for chunk in order.chunks(cfg.batch_triplets) {
            let batch = sample_minibatch(&train.samples, chunk, &mut rng)?;
            let n_inst: usize = batch.iter().map(|t| t.candidates.len()).sum();
            let loss = train_step(&mut model, &mut adam, &train.inputs, &batch, &mut rng).map_err(
                |e| match e {
                    Error::NonFiniteLoss { value, .. } => Error::NonFiniteLoss {
                        epoch,
                        batch: batches + 1,
                        value,
                    },
                    other => other,
                },
            )?;
            loss_sum += loss;
            batches += 1;
            triplets += batch.len();
            instances += n_inst;
            max_t = max_t.max(batch.len());
            max_i = max_i.max(n_inst);
        }
        let val_accuracy = evaluate(&model, val)?.overall_accuracy;
        let record = EpochRecord {
            epoch,
            lr,
            train_loss: loss_sum / batches as f64,
            val_accuracy,
            wall_time: if cfg.record_wall_time {
                start.elapsed().as_secs_f64()
            } else {
                0.0
            },
            batches,
            triplets,
            instances,
            max_batch_triplets: max_t,
            max_batch_instances: max_i,
        };
        log::info!(
            "epoch {epoch}: lr {lr:.2e} loss {:.4} val {:.4}",
            record.train_loss,
            record.val_accuracy
        );
        on_epoch(&record);
        log.push(record);

        if best.as_ref().is_none_or(|(_, acc, _)| val_accuracy > *acc) {
            best = Some((epoch, val_accuracy, model.clone()));
        }
        let decay = match cfg.schedule {
            LrSchedule::OnValidationDecrease => prev_val.is_some_and(|p| val_accuracy < p),
            LrSchedule::Fixed { every } => epoch % every == 0,
        };
        if decay {
            adam.learning_rate = lr / cfg.lr_decay_factor;
        }
        prev_val = Some(val_accuracy);
    }
    let (best_epoch, best_val_accuracy, best_model) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        model: best_model,
        log,
        best_epoch,
        best_val_accuracy,
    })
}

/// Forward, backward and one Adam update on a batch; returns the loss.
pub fn train_step(
    model: &mut QaModel,
    adam: &mut AdamState,
    inputs: &[SampleInput],
    batch: &[Triplet],
    rng: &mut Rng,
) -> Result<f64> {
    let samples: Vec<&SampleInput> = batch.iter().map(|t| &inputs[t.sample]).collect();
    let mut instances = Vec::new();
    let mut labels = Vec::new();
    for (i, t) in batch.iter().enumerate() {
        instances.extend(t.candidates.iter().map(|&candidate| Instance {
            sample: i,
            candidate,
        }));
        labels.extend(t.labels());
    }
    let (loss, grads, running) = {
        let mut s = Session::train(model.store(), rng);
        let loss = model.loss(&mut s, &samples, &instances, &labels)?;
        let value = s.value(loss).data()[0];
        if !value.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch: 0,
                batch: 0,
                value,
            });
        }
        let grads = s.param_grads(loss)?;
        (value, grads, s.into_running_updates())
    };
    if !grads.is_finite() {
        return Err(Error::NonFiniteLoss {
            epoch: 0,
            batch: 0,
            value: f64::NAN,
        });
    }
    adam.update(model.store_mut(), &grads)?;
    apply_running_updates(model.store_mut(), &running);
    Ok(loss)
}

pub fn save_checkpoint(model: &QaModel, path: impl AsRef<Path>) -> Result<()> {
    model.to_checkpoint().save(path)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<QaModel> {
    QaModel::from_checkpoint(&Checkpoint::load(path)?)
}
