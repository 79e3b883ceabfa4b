use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::network::{Workspace, INPUT_LEN};
use super::{Adam, Network, Scalar, Tensor};
use crate::dataset::{DatasetRecord, RecordMeta};
use crate::error::{Error, Result};
use crate::eval;
use crate::preprocess::{to_feature_matrix, FeatureOptions};
use crate::seed::{self, tag};
use crate::signal::NUM_CLASSES;

/// Each mini-batch is split into this many contiguous shards whose gradients
/// are summed in shard order, so results do not depend on the thread count.
const SHARDS: usize = 8;
const CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOptions {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl TrainOptions {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!("learning_rate {} must be positive", self.learning_rate)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    /// Mean per-class TPR on the validation set at threshold 0.5, utilized class masked.
    pub val_mean_tpr: Option<f64>,
}

/// Network inputs (stored as `f32`) with the metadata of their records.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingSet {
    inputs: Vec<f32>,
    meta: Vec<RecordMeta>,
}

fn features(record: &DatasetRecord, options: FeatureOptions) -> Vec<f32> {
    to_feature_matrix(&record.snapshot, options).to_network_input().iter().map(|&v| v as f32).collect()
}

fn meta(r: &DatasetRecord) -> RecordMeta {
    RecordMeta {
        labels: r.labels,
        utilized_class: r.utilized_class,
        num_interferers: r.num_interferers,
        snr_db: r.snr_db,
        seed: r.seed,
    }
}

impl TrainingSet {
    pub fn from_records(records: &[DatasetRecord], options: FeatureOptions) -> Self {
        let rows: Vec<Vec<f32>> = records.par_iter().map(|r| features(r, options)).collect();
        TrainingSet { inputs: rows.concat(), meta: records.iter().map(meta).collect() }
    }

    /// Builds the set from a record stream without holding the snapshots.
    pub fn from_stream(records: impl Iterator<Item = Result<DatasetRecord>>, options: FeatureOptions) -> Result<Self> {
        let mut set = TrainingSet::default();
        let mut chunk = Vec::with_capacity(CHUNK);
        let flush = |chunk: &mut Vec<DatasetRecord>, set: &mut TrainingSet| {
            let part = TrainingSet::from_records(chunk, options);
            set.inputs.extend(part.inputs);
            set.meta.extend(part.meta);
            chunk.clear();
        };
        for r in records {
            chunk.push(r?);
            if chunk.len() == CHUNK {
                flush(&mut chunk, &mut set);
            }
        }
        flush(&mut chunk, &mut set);
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.meta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.meta.is_empty()
    }

    pub fn input(&self, i: usize) -> &[f32] {
        &self.inputs[i * INPUT_LEN..][..INPUT_LEN]
    }

    /// All inputs, row-major.
    pub fn inputs(&self) -> &[f32] {
        &self.inputs
    }

    pub fn meta(&self) -> &[RecordMeta] {
        &self.meta
    }
}

struct Shard<S> {
    ws: Workspace<S>,
    grads: Vec<Tensor<S>>,
    loss: f64,
}

fn validation_tpr<S: Scalar>(net: &Network<S>, val: &TrainingSet) -> Result<Option<f64>> {
    let scores = net.predict_batch(val.inputs())?;
    let predicted = eval::decide_all(&scores, eval::DEFAULT_THRESHOLD)?;
    Ok(eval::tpr_report(&predicted, val.meta(), true)?.mean_tpr())
}

/// Mini-batch training with shuffling, the fused output loss and Adam.
///
/// Appends one [`EpochLog`] per epoch to `net.training_log` and passes it to
/// `on_epoch`. The weights after the last epoch are kept.
pub fn train<S: Scalar>(
    net: &mut Network<S>,
    data: &TrainingSet,
    val: Option<&TrainingSet>,
    options: &TrainOptions,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<()> {
    options.validate()?;
    net.head()?;
    if net.input_len() != INPUT_LEN || net.output_len() != NUM_CLASSES {
        return Err(Error::Shape(format!(
            "network maps {} inputs to {} outputs; training needs {INPUT_LEN} -> {NUM_CLASSES}",
            net.input_len(),
            net.output_len()
        )));
    }
    if data.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    if val.is_some_and(TrainingSet::is_empty) {
        return Err(Error::InvalidArgument("validation set is empty".into()));
    }
    let targets: Vec<S> = data
        .meta
        .iter()
        .flat_map(|m| (0..NUM_CLASSES).map(move |c| if m.labels.bits() >> c & 1 == 1 { S::one() } else { S::zero() }))
        .collect();

    let mut adam = Adam::new(net.params(), options.learning_rate);
    let mut shards: Vec<Shard<S>> =
        (0..SHARDS).map(|_| Shard { ws: Workspace::new(net), grads: net.zero_grads(), loss: 0.0 }).collect();
    let n = data.len();

    for epoch in 0..options.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut seed::rng(seed::derive(options.seed, &[tag::SHUFFLE, epoch as u64])));
        let mut loss_sum = 0.0;
        for (b, batch) in order.chunks(options.batch_size).enumerate() {
            let per = batch.len().div_ceil(SHARDS);
            let model = &*net;
            shards.par_iter_mut().enumerate().try_for_each(|(s, shard)| -> Result<()> {
                shard.loss = 0.0;
                shard.grads.iter_mut().for_each(|g| g.data_mut().fill(S::zero()));
                let lo = (s * per).min(batch.len());
                let hi = ((s + 1) * per).min(batch.len());
                for (k, &idx) in batch[lo..hi].iter().enumerate() {
                    let position = (b * options.batch_size + lo + k) as u64;
                    let dropout = seed::derive(options.seed, &[tag::DROPOUT, epoch as u64, position]);
                    let target = &targets[idx * NUM_CLASSES..][..NUM_CLASSES];
                    shard.loss += model.accumulate(&mut shard.ws, data.input(idx), target, Some(dropout), &mut shard.grads)?;
                }
                Ok(())
            })?;

            let (first, rest) = shards.split_at_mut(1);
            let total = &mut first[0].grads;
            for shard in rest.iter() {
                for (t, g) in total.iter_mut().zip(&shard.grads) {
                    t.data_mut().iter_mut().zip(g.data()).for_each(|(a, &v)| *a += v);
                }
            }
            let scale = S::of(1.0 / batch.len() as f64);
            total.iter_mut().for_each(|t| t.data_mut().iter_mut().for_each(|v| *v = *v * scale));
            adam.step(net.params_mut(), total)?;
            loss_sum += shards.iter().map(|s| s.loss).sum::<f64>();
        }
        if net.params().iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument(format!("training diverged in epoch {}", epoch + 1)));
        }
        let log = EpochLog {
            epoch: epoch + 1,
            train_loss: loss_sum / n as f64,
            val_mean_tpr: val.map(|v| validation_tpr(net, v)).transpose()?.flatten(),
        };
        on_epoch(&log);
        net.training_log.push(log);
    }
    Ok(())
}
