//! `evaluate`: classify one split of a manifest with a trained model and
//! report accuracy, sensitivity, specificity, and per-defect sensitivities,
//! optionally as a JSON document.

use std::path::PathBuf;

use clap::Args;

use odt_core::net::read_model;
use odt_core::sim::read_manifest;
use odt_core::{OdtError, Result};

use crate::commands::{manifest_base, net_rows, percent, SplitArg};
use crate::config::RunConfig;
use crate::report::{split_report, write_json};

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Corpus manifest (JSON lines).
    #[arg(long)]
    pub manifest: PathBuf,

    /// Trained model file.
    #[arg(long)]
    pub model: PathBuf,

    /// Split to evaluate.
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,

    /// Optional JSON report output.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Probability threshold override for calling a field noisy.
    #[arg(long)]
    pub threshold: Option<f64>,
}

pub fn run(cfg: &RunConfig, args: &EvaluateArgs) -> Result<()> {
    let records = read_manifest(&args.manifest)?;
    let base = manifest_base(&args.manifest);
    let split = args.split.to_split();
    let subset: Vec<_> = records
        .into_iter()
        .filter(|r| split.is_none_or(|s| r.split == s))
        .collect();
    if subset.is_empty() {
        return Err(OdtError::validation("no records in the requested split"));
    }

    let params = read_model(&args.model)?;
    let threshold = args.threshold.unwrap_or(cfg.train.decision_threshold);
    let rows = net_rows(&subset, &base, &params, cfg.train.input_size, threshold)?;
    let report = split_report(&rows, split)?;

    println!(
        "{} split, {} fields: accuracy {}, sensitivity {}, specificity {}",
        report.split,
        report.records,
        percent(report.metrics.accuracy),
        percent(report.metrics.sensitivity),
        percent(report.metrics.specificity),
    );
    if let Some(fringe) = report.fringe_sensitivity {
        println!("fringe sensitivity: {}", percent(fringe));
    }
    if let Some(broken) = report.broken_sensitivity {
        println!("broken sensitivity: {}", percent(broken));
    }
    if let Some(out) = &args.out {
        write_json(out, &report)?;
        println!("report: {}", out.display());
    }
    Ok(())
}
