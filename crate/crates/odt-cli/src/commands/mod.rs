//! One module per subcommand, plus the small helpers they share: locating
//! fields relative to their manifest, parallel screening loops, and PNG
//! export.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use odt_core::field::read_field;
use odt_core::net::{classify, NetParams};
use odt_core::rule::{rule_score, RuleConfig};
use odt_core::sim::{FieldRecord, Label, Split};
use odt_core::{OdtError, Result};

use crate::report::ScoreRow;

pub mod evaluate;
pub mod pipeline;
pub mod reconstruct;
pub mod retrieve;
pub mod saliency;
pub mod screen;
pub mod simulate;
pub mod train;

/// Split selector for metric reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SplitArg {
    Train,
    Test,
    All,
}

impl SplitArg {
    pub fn to_split(self) -> Option<Split> {
        match self {
            SplitArg::Train => Some(Split::Train),
            SplitArg::Test => Some(Split::Test),
            SplitArg::All => None,
        }
    }
}

/// Directory that manifest-relative field paths resolve against.
pub(crate) fn manifest_base(manifest: &Path) -> PathBuf {
    match manifest.parent() {
        Some(parent) if !parent.as_os_str().is_empty() => parent.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

/// Scores every record with the spectral rule, in manifest order. Records
/// are independent, so the loop runs on the worker pool; the output order
/// is fixed by the input order regardless of thread count.
pub(crate) fn rule_score_records(
    records: &[FieldRecord],
    base: &Path,
    config: &RuleConfig,
) -> Result<Vec<f64>> {
    records
        .par_iter()
        .map(|record| rule_score(&read_field(base.join(&record.path))?, config))
        .collect()
}

/// Builds score rows from precomputed rule scores and a decision level.
pub(crate) fn rule_rows(
    records: &[FieldRecord],
    scores: &[f64],
    threshold: f64,
) -> Vec<ScoreRow> {
    records
        .iter()
        .zip(scores)
        .map(|(record, &score)| ScoreRow {
            path: record.path.clone(),
            split: record.split,
            truth: record.label,
            kind: record.kind,
            score,
            predicted: if score > threshold { Label::Noisy } else { Label::Clean },
        })
        .collect()
}

/// Classifies every record with a trained network, in manifest order.
pub(crate) fn net_rows(
    records: &[FieldRecord],
    base: &Path,
    params: &NetParams,
    input_size: usize,
    threshold: f64,
) -> Result<Vec<ScoreRow>> {
    records
        .par_iter()
        .map(|record| {
            let field = read_field(base.join(&record.path))?;
            let (predicted, probability) = classify(params, &field, input_size, threshold)?;
            Ok(ScoreRow {
                path: record.path.clone(),
                split: record.split,
                truth: record.label,
                kind: record.kind,
                score: probability,
                predicted,
            })
        })
        .collect()
}

/// Writes an 8-bit grayscale PNG.
pub(crate) fn save_gray_png(
    path: &Path,
    width: usize,
    height: usize,
    gray: Vec<u8>,
) -> Result<()> {
    let image = image::GrayImage::from_raw(width as u32, height as u32, gray)
        .ok_or_else(|| OdtError::validation("pixel buffer does not match the stated size"))?;
    image.save(path).map_err(|e| match e {
        image::ImageError::IoError(io) => OdtError::io(path, io),
        other => OdtError::format(path, other.to_string()),
    })
}

/// Percentage with two decimals; NaN stays NaN, marking an unmeasured rate.
pub(crate) fn percent(value: f64) -> String {
    format!("{:.2}%", 100.0 * value)
}
