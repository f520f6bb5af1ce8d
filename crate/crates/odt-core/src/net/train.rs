//! End-to-end training, classification, and evaluation.
//!
//! Training consumes a labeled field corpus: each record's complex field is
//! centre-cropped, converted to the network's input representation, and
//! cached; every epoch then re-augments each training sample with a freshly
//! seeded elastic warp, so the network never sees the exact same image
//! twice while the run as a whole stays deterministic. Phase enters the
//! network as raw unwrapped radians — no per-image standardization — so
//! defect magnitude, which is exactly what separates clean from noisy,
//! survives into the features.
//!
//! A held-out validation slice is scored after every epoch and the
//! parameters from the best-scoring epoch are what the run returns:
//! training longer can only help, never silently hurt.
//!
//! Gradients within a batch accumulate sequentially in sample order before
//! the single optimizer step, so a rerun with the same seed reproduces the
//! trained weights bit for bit.

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{OdtError, Result};
use crate::field::{center_crop, read_field, ComplexField2D};
use crate::net::adam::{adam_step, AdamState};
use crate::net::autodiff::{backward, bce_loss, forward_pass, RunMode};
use crate::net::elastic::elastic_transform;
use crate::net::params::{
    init_custom_params, InputMode, NetParams, CONV_CHANNELS, INPUT_SIZE, LINEAR_DIMS,
};
use crate::net::tensor::Tensor;
use crate::retrieval::unwrap_phase;
use crate::seed::{derive_rng, derive_seed};
use crate::sim::{FieldRecord, Label, Split};

// Derived-stream tags; distinct constants keep the streams decorrelated.
const TAG_VAL_SPLIT: u64 = 11;
const TAG_SHUFFLE: u64 = 12;
const TAG_DROPOUT_TRAIN: u64 = 15;
const TAG_AUG: u64 = 16;

/// Hyperparameters and architecture plan for one training run.
///
/// The defaults reproduce the standard screening setup; the architecture
/// fields exist so tests can train scaled-down variants of the same
/// topology in milliseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// One inverted-dropout rate per linear layer, applied to that layer's
    /// input during training only.
    pub dropout_rates: Vec<f64>,
    /// Probabilities strictly above this are classified noisy.
    pub decision_threshold: f64,
    /// Elastic augmentation strength in pixels; 0 disables augmentation.
    pub elastic_alpha: f64,
    /// Elastic displacement correlation length in pixels.
    pub elastic_sigma: f64,
    /// Fraction of the training records held out for per-epoch validation.
    pub validation_fraction: f64,
    pub seed: u64,
    pub input_mode: InputMode,
    /// Side length fields are centre-cropped to before entering the network.
    pub input_size: usize,
    pub conv_channels: Vec<usize>,
    pub linear_dims: Vec<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 16,
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            dropout_rates: vec![0.3, 0.5, 0.5],
            decision_threshold: 0.5,
            elastic_alpha: 8.0,
            elastic_sigma: 4.0,
            validation_fraction: 0.1,
            seed: 0,
            input_mode: InputMode::Phase,
            input_size: INPUT_SIZE,
            conv_channels: CONV_CHANNELS.to_vec(),
            linear_dims: LINEAR_DIMS.to_vec(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(OdtError::validation(
                "epochs and batch size must be at least 1".to_string(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(OdtError::validation(format!(
                "learning rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.beta1)
            || !(0.0..1.0).contains(&self.beta2)
            || !(self.epsilon > 0.0 && self.epsilon.is_finite())
        {
            return Err(OdtError::validation(
                "optimizer moments need betas in [0, 1) and positive epsilon".to_string(),
            ));
        }
        if self.dropout_rates.len() != self.linear_dims.len() {
            return Err(OdtError::validation(format!(
                "{} dropout rates for {} linear layers",
                self.dropout_rates.len(),
                self.linear_dims.len()
            )));
        }
        if self.dropout_rates.iter().any(|r| !(0.0..1.0).contains(r)) {
            return Err(OdtError::validation(
                "dropout rates must lie in [0, 1)".to_string(),
            ));
        }
        if !(self.decision_threshold > 0.0 && self.decision_threshold < 1.0) {
            return Err(OdtError::validation(format!(
                "decision threshold must lie in (0, 1), got {}",
                self.decision_threshold
            )));
        }
        if !(self.elastic_alpha >= 0.0 && self.elastic_alpha.is_finite())
            || !(self.elastic_sigma > 0.0 && self.elastic_sigma.is_finite())
        {
            return Err(OdtError::validation(
                "elastic augmentation needs alpha >= 0 and sigma > 0".to_string(),
            ));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(OdtError::validation(format!(
                "validation fraction must lie in [0, 1), got {}",
                self.validation_fraction
            )));
        }
        if self.conv_channels.is_empty()
            || self.linear_dims.is_empty()
            || self.linear_dims.last() != Some(&1)
        {
            return Err(OdtError::validation(
                "architecture plan needs conv blocks and a final linear width of 1".to_string(),
            ));
        }
        let pools = self.conv_channels.len() - 1;
        let divisor = 1usize << pools;
        if self.input_size == 0 || self.input_size % divisor != 0 {
            return Err(OdtError::validation(format!(
                "input size {} does not survive {pools} rounds of 2x2 pooling",
                self.input_size
            )));
        }
        Ok(())
    }
}

/// One epoch's worth of bookkeeping. Training loss and accuracy come from
/// the training passes themselves (augmented inputs, dropout active);
/// validation accuracy is an eval-mode pass over the held-out slice, NaN
/// when there is none.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    /// Optimizer steps taken this epoch: ceil(train samples / batch size).
    pub steps: usize,
}

/// Classification counts and rates against a labeled truth set. `Noisy` is
/// the positive class. A rate whose denominator class is absent from the
/// truth is NaN — an absent class means the rate is unmeasured, not perfect.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub true_positives: usize,
    pub true_negatives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
}

/// Tallies predictions against truth labels.
pub fn evaluate_metrics(predicted: &[Label], truth: &[Label]) -> Result<Metrics> {
    if predicted.len() != truth.len() {
        return Err(OdtError::validation(format!(
            "{} predictions against {} truth labels",
            predicted.len(),
            truth.len()
        )));
    }
    let mut tp = 0usize;
    let mut tn = 0usize;
    let mut fp = 0usize;
    let mut fne = 0usize;
    for (&p, &t) in predicted.iter().zip(truth) {
        match (p, t) {
            (Label::Noisy, Label::Noisy) => tp += 1,
            (Label::Clean, Label::Clean) => tn += 1,
            (Label::Noisy, Label::Clean) => fp += 1,
            (Label::Clean, Label::Noisy) => fne += 1,
        }
    }
    Ok(Metrics {
        accuracy: (tp + tn) as f64 / predicted.len() as f64,
        sensitivity: tp as f64 / (tp + fne) as f64,
        specificity: tn as f64 / (tn + fp) as f64,
        true_positives: tp,
        true_negatives: tn,
        false_positives: fp,
        false_negatives: fne,
    })
}

/// Converts a complex field into the network's input tensor: centre-crop to
/// `input_size`, then take the channel(s) the mode asks for. Phase is
/// unwrapped (amplitude-guided) and enters as raw radians; nothing is
/// rescaled, because defect magnitude is the signal.
pub fn field_to_input(
    field: &ComplexField2D,
    mode: InputMode,
    input_size: usize,
) -> Result<Tensor> {
    let cropped = center_crop(field, input_size, input_size)?;
    let amplitude = cropped.amplitude();
    match mode {
        InputMode::Amplitude => {
            Tensor::new(vec![1, input_size, input_size], amplitude.values().to_vec())
        }
        InputMode::Phase => {
            let phase = unwrap_phase(&cropped.phase(), Some(&amplitude))?;
            Tensor::new(vec![1, input_size, input_size], phase.values().to_vec())
        }
        InputMode::Complex => {
            let phase = unwrap_phase(&cropped.phase(), Some(&amplitude))?;
            let mut values = amplitude.values().to_vec();
            values.extend_from_slice(phase.values());
            Tensor::new(vec![2, input_size, input_size], values)
        }
    }
}

/// Classifies one field: probability strictly above the threshold means
/// noisy. Returns the label and the probability itself.
pub fn classify(
    params: &NetParams,
    field: &ComplexField2D,
    input_size: usize,
    threshold: f64,
) -> Result<(Label, f64)> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(OdtError::validation(format!(
            "decision threshold must lie in (0, 1), got {threshold}"
        )));
    }
    let input = field_to_input(field, params.input_mode, input_size)?;
    let cache = forward_pass(params, &input, RunMode::Eval, &[], 0)?;
    let label = if cache.probability > threshold {
        Label::Noisy
    } else {
        Label::Clean
    };
    Ok((label, cache.probability))
}

fn label_value(label: Label) -> f64 {
    match label {
        Label::Noisy => 1.0,
        Label::Clean => 0.0,
    }
}

/// Trains a screening network on the training split of a corpus.
///
/// Records with `split == Train` are loaded and converted once; a seeded
/// `validation_fraction` slice of them is held out and scored after every
/// epoch, and the parameters from the epoch with the highest validation
/// accuracy are returned (ties keep the earlier epoch; without a validation
/// slice the final epoch wins). The whole run — initialization, shuffling,
/// augmentation, dropout — derives from `config.seed`, so identical inputs
/// produce identical weights.
pub fn train(
    records: &[FieldRecord],
    base_dir: &Path,
    config: &TrainConfig,
) -> Result<(NetParams, Vec<EpochLog>)> {
    config.validate()?;
    let train_records: Vec<&FieldRecord> = records
        .iter()
        .filter(|r| r.split == Split::Train)
        .collect();
    if train_records.is_empty() {
        return Err(OdtError::validation(
            "no training records in the manifest".to_string(),
        ));
    }
    let has_clean = train_records.iter().any(|r| r.label == Label::Clean);
    let has_noisy = train_records.iter().any(|r| r.label == Label::Noisy);
    if !has_clean || !has_noisy {
        return Err(OdtError::validation(
            "training needs both clean and noisy records".to_string(),
        ));
    }

    let mut inputs = Vec::with_capacity(train_records.len());
    let mut labels = Vec::with_capacity(train_records.len());
    for r in &train_records {
        let field = read_field(base_dir.join(&r.path))?;
        inputs.push(field_to_input(&field, config.input_mode, config.input_size)?);
        labels.push(label_value(r.label));
    }

    // Seeded validation holdout.
    let n = inputs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut derive_rng(config.seed, &[TAG_VAL_SPLIT]));
    let n_val = (n as f64 * config.validation_fraction).floor() as usize;
    let (val_idx, train_idx) = order.split_at(n_val);
    let val_idx = val_idx.to_vec();
    let mut pool = train_idx.to_vec();

    let mut params = init_custom_params(
        config.seed,
        config.input_mode,
        &config.conv_channels,
        &config.linear_dims,
    )?;
    let mut state = AdamState::new(&params);
    let mut log = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, NetParams)> = None;

    for epoch in 0..config.epochs {
        pool.shuffle(&mut derive_rng(config.seed, &[TAG_SHUFFLE, epoch as u64]));
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        let mut steps = 0usize;

        for batch in pool.chunks(config.batch_size) {
            let mut grads_sum = params.zero_gradients();
            for &idx in batch {
                let input = if config.elastic_alpha > 0.0 {
                    elastic_transform(
                        &inputs[idx],
                        config.elastic_alpha,
                        config.elastic_sigma,
                        derive_seed(config.seed, &[TAG_AUG, epoch as u64, idx as u64]),
                    )?
                } else {
                    inputs[idx].clone()
                };
                let dropout_seed =
                    derive_seed(config.seed, &[TAG_DROPOUT_TRAIN, epoch as u64, idx as u64]);
                let cache = forward_pass(
                    &params,
                    &input,
                    RunMode::Train,
                    &config.dropout_rates,
                    dropout_seed,
                )?;
                loss_sum += bce_loss(cache.probability, labels[idx]);
                let said_noisy = cache.probability > config.decision_threshold;
                if said_noisy == (labels[idx] == 1.0) {
                    correct += 1;
                }
                let grads = backward(&params, &cache, labels[idx])?;
                grads_sum.add_assign(&grads);
            }
            grads_sum.scale(1.0 / batch.len() as f64);
            adam_step(
                &mut params,
                &grads_sum,
                &mut state,
                config.learning_rate,
                config.beta1,
                config.beta2,
                config.epsilon,
            )?;
            steps += 1;
        }

        let val_accuracy = if val_idx.is_empty() {
            f64::NAN
        } else {
            let mut right = 0usize;
            for &idx in &val_idx {
                let cache = forward_pass(&params, &inputs[idx], RunMode::Eval, &[], 0)?;
                let said_noisy = cache.probability > config.decision_threshold;
                if said_noisy == (labels[idx] == 1.0) {
                    right += 1;
                }
            }
            right as f64 / val_idx.len() as f64
        };

        log.push(EpochLog {
            epoch: epoch + 1,
            train_loss: loss_sum / pool.len() as f64,
            train_accuracy: correct as f64 / pool.len() as f64,
            val_accuracy,
            steps,
        });

        if !val_idx.is_empty() && best.as_ref().is_none_or(|(b, _)| val_accuracy > *b) {
            best = Some((val_accuracy, params.clone()));
        }
    }

    let final_params = match best {
        Some((_, p)) => p,
        None => params,
    };
    Ok((final_params, log))
}

// ==== tests ====
