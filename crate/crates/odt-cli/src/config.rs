//! Run configuration: one TOML document describing the instrument, the
//! corpus recipe, the screening rule, the training run, and the
//! reconstruction geometry.
//!
//! A single top-level `seed` drives every stage; per-stage seeds are derived
//! from it with fixed tags, so a config file plus a seed pins the entire
//! experiment byte for byte. Command-line flags override individual keys;
//! every section falls back to defaults, so an empty document (or no
//! `--config` at all) is a valid, fully specified run.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use odt_core::net::{InputMode, TrainConfig, CONV_CHANNELS, INPUT_SIZE, LINEAR_DIMS};
use odt_core::rule::{RuleConfig, PRESET_THRESHOLD};
use odt_core::seed::derive_seed;
use odt_core::sim::{DatasetConfig, OpticsConfig};
use odt_core::{OdtError, Result};

// Stage tags keeping the derived seed streams decorrelated.
const TAG_DATASET: u64 = 101;
const TAG_TRAIN: u64 = 102;

/// Complete description of one run. Mirrors the TOML document:
/// top-level `seed` and `threads`, then `[optics]`, `[dataset]`,
/// `[hologram]`, `[rule]`, `[train]`, and `[reconstruct]` sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; every random stream in the run derives from it.
    pub seed: u64,
    /// Worker-thread cap; 0 means all available cores.
    pub threads: usize,
    pub optics: OpticsConfig,
    pub dataset: DatasetSection,
    pub hologram: HologramSection,
    pub rule: RuleSection,
    pub train: TrainSection,
    pub reconstruct: ReconstructSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            threads: 0,
            optics: OpticsConfig::default(),
            dataset: DatasetSection::default(),
            hologram: HologramSection::default(),
            rule: RuleSection::default(),
            train: TrainSection::default(),
            reconstruct: ReconstructSection::default(),
        }
    }
}

impl RunConfig {
    /// Corpus recipe for this run's optics and derived dataset seed.
    pub fn dataset_config(&self) -> DatasetConfig {
        self.dataset.to_config(&self.optics, derive_seed(self.seed, &[TAG_DATASET]))
    }

    /// Training hyperparameters with the derived training seed.
    pub fn train_config(&self) -> TrainConfig {
        self.train.to_config(derive_seed(self.seed, &[TAG_TRAIN]))
    }

    /// Spectral-screen geometry for this run's optics.
    pub fn rule_config(&self) -> RuleConfig {
        self.rule.to_config(&self.optics)
    }
}

/// Loads a config file, or the defaults when no path is given.
///
/// A missing file is an I/O failure; a file that does not parse as a run
/// configuration is a validation failure (bad config).
pub fn load(path: Option<&Path>) -> Result<RunConfig> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = fs::read_to_string(path).map_err(|e| OdtError::io(path, e))?;
    toml::from_str(&text).map_err(|e| {
        OdtError::validation(format!("{}: {e}", path.display()))
    })
}

// ==== sections ====

/// `[dataset]`: the corpus recipe minus optics and seed, which come from
/// the top level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSection {
    pub count: usize,
    pub fringe_share: f64,
    pub broken_share: f64,
    pub balance: bool,
    pub volume_depth: usize,
    pub clean_fringe_max: f64,
    pub fringe_amplitude_range: [f64; 2],
    pub broken_fraction_range: [f64; 2],
}

impl Default for DatasetSection {
    fn default() -> Self {
        let d = DatasetConfig::default();
        Self {
            count: d.count,
            fringe_share: d.fringe_share,
            broken_share: d.broken_share,
            balance: d.balance,
            volume_depth: d.volume_depth,
            clean_fringe_max: d.clean_fringe_max,
            fringe_amplitude_range: d.fringe_amplitude_range,
            broken_fraction_range: d.broken_fraction_range,
        }
    }
}

impl DatasetSection {
    pub fn to_config(&self, optics: &OpticsConfig, seed: u64) -> DatasetConfig {
        DatasetConfig {
            optics: optics.clone(),
            count: self.count,
            fringe_share: self.fringe_share,
            broken_share: self.broken_share,
            balance: self.balance,
            seed,
            volume_depth: self.volume_depth,
            clean_fringe_max: self.clean_fringe_max,
            fringe_amplitude_range: self.fringe_amplitude_range,
            broken_fraction_range: self.broken_fraction_range,
        }
    }
}

/// `[hologram]`: off-axis reference geometry for hologram synthesis and
/// demodulation. The carrier is the reference-beam tilt in radians per
/// micrometer; the crop radius is the sideband bandwidth kept on retrieval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HologramSection {
    pub carrier: [f64; 2],
    pub ref_amplitude: f64,
    pub crop_radius: f64,
}

impl Default for HologramSection {
    fn default() -> Self {
        // Carrier at ~61% of the default grid's Nyquist, crop at half the
        // carrier: the classic off-axis compromise between sideband
        // separation and kept bandwidth.
        Self { carrier: [12.0, 0.0], ref_amplitude: 1.0, crop_radius: 6.0 }
    }
}

/// `[rule]`: spectral-screen geometry and decision threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuleSection {
    /// Radius of the ignored central disk; 0 means half the detection
    /// pupil, the standard choice.
    pub mask_radius: f64,
    /// Disk center, the transverse illumination frequency. Zero for
    /// background-normalized fields.
    pub mask_center: [f64; 2],
    /// Log10 peak level strictly above which a field is called noisy.
    pub threshold: f64,
    /// Refit the threshold on the training split before screening. The
    /// preset value was tuned on microscope data; synthetic corpora land on
    /// a different scale, so this defaults on.
    pub calibrate: bool,
}

impl Default for RuleSection {
    fn default() -> Self {
        Self {
            mask_radius: 0.0,
            mask_center: [0.0, 0.0],
            threshold: PRESET_THRESHOLD,
            calibrate: true,
        }
    }
}

impl RuleSection {
    pub fn to_config(&self, optics: &OpticsConfig) -> RuleConfig {
        let mask_radius = if self.mask_radius > 0.0 {
            self.mask_radius
        } else {
            0.5 * optics.pupil_radius()
        };
        RuleConfig { mask_radius, mask_center: self.mask_center, threshold: self.threshold }
    }
}

/// `[train]`: hyperparameters and architecture plan. The training seed is
/// derived from the top-level seed, not stored here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub dropout_rates: Vec<f64>,
    pub decision_threshold: f64,
    pub elastic_alpha: f64,
    pub elastic_sigma: f64,
    pub validation_fraction: f64,
    pub input_mode: InputMode,
    pub input_size: usize,
    pub conv_channels: Vec<usize>,
    pub linear_dims: Vec<usize>,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            beta1: t.beta1,
            beta2: t.beta2,
            epsilon: t.epsilon,
            dropout_rates: t.dropout_rates,
            decision_threshold: t.decision_threshold,
            elastic_alpha: t.elastic_alpha,
            elastic_sigma: t.elastic_sigma,
            validation_fraction: t.validation_fraction,
            input_mode: t.input_mode,
            input_size: INPUT_SIZE,
            conv_channels: CONV_CHANNELS.to_vec(),
            linear_dims: LINEAR_DIMS.to_vec(),
        }
    }
}

impl TrainSection {
    pub fn to_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            dropout_rates: self.dropout_rates.clone(),
            decision_threshold: self.decision_threshold,
            elastic_alpha: self.elastic_alpha,
            elastic_sigma: self.elastic_sigma,
            validation_fraction: self.validation_fraction,
            seed,
            input_mode: self.input_mode,
            input_size: self.input_size,
            conv_channels: self.conv_channels.clone(),
            linear_dims: self.linear_dims.clone(),
        }
    }
}

/// `[reconstruct]`: axial extent of the inverted volume and the
/// specimen-free box used for the background-noise figure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructSection {
    pub volume_depth: usize,
    pub box_origin: [usize; 3],
    pub box_size: [usize; 3],
}

impl Default for ReconstructSection {
    fn default() -> Self {
        Self { volume_depth: 64, box_origin: [2, 2, 2], box_size: [8, 8, 8] }
    }
}

// ==== tests ====
