//! Labeled field-corpus generation.
//!
//! A corpus is a set of simulated acquisitions: phantoms are scanned over
//! the full illumination set, each angle yields one background-normalized
//! field, and a per-record defect plan decides whether that field stays
//! clean or receives a fringe or broken-phase injection. Records are written
//! as OFC1 files plus a JSON-lines manifest holding the label, the defect
//! parameters, the acquisition geometry, and the record seed.
//!
//! Labeling follows the defect magnitude, not the injection bookkeeping: a
//! record is `noisy` exactly when `fringe_amplitude ≥ 0.05` or
//! `broken_fraction ≥ 0.02`. Clean records may still carry a faint parasitic
//! fringe below that threshold — real systems are never spectrally silent,
//! and a screen that only works on mathematically pristine backgrounds would
//! be useless — so the clean/noisy boundary is a magnitude, not a kind.
//!
//! Everything derives from one master seed: shuffles, phantom geometry, and
//! per-record defect draws each use their own derived stream, so corpora are
//! byte-identical across runs and insensitive to generation order.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{OdtError, Result};
use crate::field::{write_field, TAU};
use crate::seed::{derive_rng, derive_seed};
use crate::sim::{
    illumination_set, inject_broken_phase, inject_fringe_noise, make_phantom,
    potential_spectrum, simulate_field_from_spectrum, OpticsConfig, PhantomSpec,
};

// Derived-stream tags; distinct constants keep the streams decorrelated.
const TAG_KINDS: u64 = 1;
const TAG_SPLIT: u64 = 2;
const TAG_PHANTOM: u64 = 3;
const TAG_RECORD: u64 = 4;
const TAG_FRINGE: u64 = 5;
const TAG_BROKEN: u64 = 6;

/// Binary screening label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Clean,
    Noisy,
}

/// Which defect injection a record received. `None` still allows a
/// sub-threshold parasitic fringe; see the module docs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    None,
    Fringe,
    Broken,
}

/// Train/test membership from the seeded 75/25 shuffle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// One manifest line: where the field lives and everything needed to
/// reproduce or audit it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldRecord {
    /// OFC1 file path, relative to the manifest's directory.
    pub path: String,
    pub label: Label,
    pub kind: NoiseKind,
    pub fringe_amplitude: f64,
    pub fringe_freq: [f64; 2],
    pub broken_fraction: f64,
    pub angle_index: usize,
    pub k_in: crate::sim::WaveVector,
    pub seed: u64,
    pub split: Split,
}

/// Corpus recipe. Shares are fractions of the total record count assigned
/// to each defect kind; the rest stays clean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub optics: OpticsConfig,
    /// Total records to emit (rounded down to even when balancing).
    pub count: usize,
    /// Fraction of records receiving an above-threshold fringe.
    pub fringe_share: f64,
    /// Fraction of records receiving a broken-phase region.
    pub broken_share: f64,
    /// Force equal clean and noisy counts, apportioning the noisy half
    /// between kinds by their relative shares.
    pub balance: bool,
    pub seed: u64,
    /// Axial voxel count of the simulated volumes.
    pub volume_depth: usize,
    /// Upper bound (exclusive) of the parasitic fringe amplitude on clean
    /// records. Must stay below the 0.05 labeling threshold.
    pub clean_fringe_max: f64,
    /// Amplitude range for noisy fringes, within [0.05, 2].
    pub fringe_amplitude_range: [f64; 2],
    /// Region-fraction range for broken records, within [0.02, 1].
    pub broken_fraction_range: [f64; 2],
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            optics: OpticsConfig::default(),
            count: 400,
            fringe_share: 0.25,
            broken_share: 0.25,
            balance: false,
            seed: 7,
            volume_depth: 64,
            clean_fringe_max: 0.03,
            fringe_amplitude_range: [0.5, 1.5],
            broken_fraction_range: [0.15, 0.55],
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        self.optics.validate()?;
        if self.count < 2 {
            return Err(OdtError::validation(format!(
                "corpus needs at least 2 records, got {}",
                self.count
            )));
        }
        for (share, name) in [(self.fringe_share, "fringe_share"), (self.broken_share, "broken_share")] {
            if !share.is_finite() || !(0.0..=1.0).contains(&share) {
                return Err(OdtError::validation(format!("{name} must lie in [0, 1], got {share}")));
            }
        }
        if self.fringe_share + self.broken_share > 1.0 + 1e-12 {
            return Err(OdtError::validation("defect shares must sum to at most 1"));
        }
        if self.balance && self.fringe_share + self.broken_share == 0.0 {
            return Err(OdtError::validation(
                "balancing needs at least one nonzero defect share",
            ));
        }
        if !self.volume_depth.is_power_of_two() {
            return Err(OdtError::validation(format!(
                "volume_depth must be a power of two, got {}",
                self.volume_depth
            )));
        }
        if !self.clean_fringe_max.is_finite()
            || !(0.0..0.05).contains(&self.clean_fringe_max)
        {
            return Err(OdtError::validation(format!(
                "clean_fringe_max must lie in [0, 0.05), got {}",
                self.clean_fringe_max
            )));
        }
        let [flo, fhi] = self.fringe_amplitude_range;
        if !(0.05..=2.0).contains(&flo) || !(0.05..=2.0).contains(&fhi) || flo > fhi {
            return Err(OdtError::validation(
                "fringe_amplitude_range must be an ordered range within [0.05, 2]",
            ));
        }
        let [blo, bhi] = self.broken_fraction_range;
        if !(0.02..=1.0).contains(&blo) || !(0.02..=1.0).contains(&bhi) || blo > bhi {
            return Err(OdtError::validation(
                "broken_fraction_range must be an ordered range within [0.02, 1]",
            ));
        }
        Ok(())
    }

    /// Effective record count after the balance rounding rule.
    fn total(&self) -> usize {
        if self.balance {
            self.count & !1
        } else {
            self.count
        }
    }

    /// Records per kind: (clean, fringe, broken).
    fn quotas(&self) -> (usize, usize, usize) {
        let total = self.total();
        if self.balance {
            let noisy = total / 2;
            let weight = self.fringe_share / (self.fringe_share + self.broken_share);
            let fringe = (noisy as f64 * weight).round() as usize;
            (total - noisy, fringe, noisy - fringe)
        } else {
            let fringe = (total as f64 * self.fringe_share).round() as usize;
            let broken =
                ((total as f64 * self.broken_share).round() as usize).min(total - fringe);
            (total - fringe - broken, fringe, broken)
        }
    }
}

/// Generates the corpus into `out_dir`: `fields/record_*.ofc` plus
/// `manifest.jsonl`. Returns the records in emission order.
pub fn generate_dataset(config: &DatasetConfig, out_dir: &Path) -> Result<Vec<FieldRecord>> {
    config.validate()?;
    let fields_dir = out_dir.join("fields");
    fs::create_dir_all(&fields_dir).map_err(|e| OdtError::io(&fields_dir, e))?;

    let total = config.total();
    let (clean_n, fringe_n, broken_n) = config.quotas();
    let mut kinds = Vec::with_capacity(total);
    kinds.extend(std::iter::repeat_n(NoiseKind::None, clean_n));
    kinds.extend(std::iter::repeat_n(NoiseKind::Fringe, fringe_n));
    kinds.extend(std::iter::repeat_n(NoiseKind::Broken, broken_n));
    kinds.shuffle(&mut derive_rng(config.seed, &[TAG_KINDS]));

    let train_count = total * 3 / 4;
    let mut order: Vec<usize> = (0..total).collect();
    order.shuffle(&mut derive_rng(config.seed, &[TAG_SPLIT]));
    let mut splits = vec![Split::Test; total];
    for &i in order.iter().take(train_count) {
        splits[i] = Split::Train;
    }

    let angles = illumination_set(&config.optics)?;
    let dims = config.optics.volume_dims(config.volume_depth);
    let pupil = config.optics.pupil_radius();

    let mut records = Vec::with_capacity(total);
    let mut cached: Option<(usize, crate::sim::PhantomSpectrum)> = None;
    for index in 0..total {
        let group = index / angles.len();
        let angle_index = index % angles.len();
        if cached.as_ref().map(|(g, _)| *g) != Some(group) {
            let spec = random_phantom(config, group, dims)?;
            let volume = make_phantom(&[spec], dims, config.optics.n_medium)?;
            cached = Some((group, potential_spectrum(&volume, &config.optics)?));
        }
        let (_, spectrum) = cached.as_ref().unwrap();
        let ideal =
            simulate_field_from_spectrum(spectrum, &config.optics, &angles[angle_index])?;

        let record_seed = derive_seed(config.seed, &[TAG_RECORD, index as u64]);
        let kind = kinds[index];
        let mut fringe_amplitude = 0.0;
        let mut fringe_freq = [0.0, 0.0];
        let mut broken_fraction = 0.0;
        let field = match kind {
            NoiseKind::Broken => {
                let mut rng = derive_rng(record_seed, &[TAG_BROKEN]);
                let [lo, hi] = config.broken_fraction_range;
                broken_fraction = lo + (hi - lo) * rng.random::<f64>();
                inject_broken_phase(&ideal, broken_fraction, record_seed)?.0
            }
            NoiseKind::Fringe | NoiseKind::None => {
                let mut rng = derive_rng(record_seed, &[TAG_FRINGE]);
                fringe_amplitude = match kind {
                    NoiseKind::Fringe => {
                        let [lo, hi] = config.fringe_amplitude_range;
                        lo + (hi - lo) * rng.random::<f64>()
                    }
                    _ => config.clean_fringe_max * rng.random::<f64>(),
                };
                // Parasitic interference lands in the outer half of the
                // pupil band, well clear of the sample's own spectrum.
                let azimuth = TAU * rng.random::<f64>();
                let magnitude = pupil * (0.6 + 0.3 * rng.random::<f64>());
                fringe_freq = [magnitude * azimuth.cos(), magnitude * azimuth.sin()];
                let phase = TAU * rng.random::<f64>();
                inject_fringe_noise(&ideal, fringe_amplitude, fringe_freq, phase)?
            }
        };

        let label = if fringe_amplitude >= 0.05 || broken_fraction >= 0.02 {
            Label::Noisy
        } else {
            Label::Clean
        };
        let rel_path = format!("fields/record_{index:05}.ofc");
        write_field(out_dir.join(&rel_path), &field)?;
        records.push(FieldRecord {
            path: rel_path,
            label,
            kind,
            fringe_amplitude,
            fringe_freq,
            broken_fraction,
            angle_index,
            k_in: angles[angle_index],
            seed: record_seed,
            split: splits[index],
        });
    }

    write_manifest(out_dir.join("manifest.jsonl"), &records)?;
    Ok(records)
}

/// Seeded bead-or-rod phantom scaled to fit the grid with margin.
fn random_phantom(config: &DatasetConfig, group: usize, dims: crate::sim::VolumeDims) -> Result<PhantomSpec> {
    let mut rng = derive_rng(config.seed, &[TAG_PHANTOM, group as u64]);
    let half_xy = dims.nx as f64 / 2.0 * dims.voxel_pitch;
    let half_z = dims.nz as f64 / 2.0 * dims.voxel_pitch;
    let scale = half_xy.min(half_z);
    let delta_n = 0.01 + 0.04 * rng.random::<f64>();
    let offset = [
        half_xy * 0.5 * (rng.random::<f64>() - 0.5),
        half_xy * 0.5 * (rng.random::<f64>() - 0.5),
        half_z * 0.4 * (rng.random::<f64>() - 0.5),
    ];
    if rng.random::<f64>() < 0.5 {
        let radius = scale * (0.08 + 0.12 * rng.random::<f64>());
        Ok(PhantomSpec::bead(radius, delta_n, offset))
    } else {
        let radius = scale * (0.04 + 0.04 * rng.random::<f64>());
        let length = scale * (0.3 + 0.3 * rng.random::<f64>());
        let azimuth = TAU * rng.random::<f64>();
        Ok(PhantomSpec::rod(length.max(2.0 * radius), radius, azimuth, delta_n, offset))
    }
}

/// Writes one JSON object per line.
pub fn write_manifest(path: impl AsRef<Path>, records: &[FieldRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for record in records {
        let line = serde_json::to_string(record)
            .map_err(|e| OdtError::format(path, format!("manifest serialization: {e}")))?;
        out.extend_from_slice(line.as_bytes());
        out.push(b'\n');
    }
    let mut file = fs::File::create(path).map_err(|e| OdtError::io(path, e))?;
    file.write_all(&out).map_err(|e| OdtError::io(path, e))?;
    Ok(())
}

/// Reads a JSON-lines manifest, skipping blank lines.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<FieldRecord>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| OdtError::io(path, e))?;
    let mut records = Vec::new();
    for (number, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| OdtError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: FieldRecord = serde_json::from_str(&line).map_err(|e| {
            OdtError::format(path, format!("manifest line {}: {e}", number + 1))
        })?;
        records.push(record);
    }
    Ok(records)
}
