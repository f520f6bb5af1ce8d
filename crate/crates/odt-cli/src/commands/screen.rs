//! `screen`: score every field in a manifest with either the spectral rule
//! (peak log-magnitude outside a masked disk) or a trained network, write
//! the verdicts as CSV, and print metrics against the manifest's labels.

use std::path::PathBuf;

use clap::Args;

use odt_core::net::read_model;
use odt_core::rule::calibrate_threshold;
use odt_core::sim::{read_manifest, Split};
use odt_core::{OdtError, Result};

use crate::commands::{
    manifest_base, net_rows, percent, rule_rows, rule_score_records, SplitArg,
};
use crate::config::RunConfig;
use crate::report::{split_report, write_scores_csv};

#[derive(Debug, Args)]
pub struct ScreenArgs {
    /// Corpus manifest (JSON lines).
    #[arg(long)]
    pub manifest: PathBuf,

    /// Output CSV score table, one row per field.
    #[arg(long)]
    pub out: PathBuf,

    /// Screen with the spectral rule.
    #[arg(long)]
    pub rule: bool,

    /// Screen with a trained network model file.
    #[arg(long, conflicts_with = "rule")]
    pub model: Option<PathBuf>,

    /// Decision level override: log10 spectral peak for --rule, noisy
    /// probability for --model. For --rule this disables calibration.
    #[arg(long)]
    pub threshold: Option<f64>,

    /// Refit the rule threshold on the training split before scoring.
    #[arg(long)]
    pub calibrate: bool,

    /// Split to print metrics for.
    #[arg(long, value_enum, default_value = "all")]
    pub metrics_split: SplitArg,
}

pub fn run(cfg: &RunConfig, args: &ScreenArgs) -> Result<()> {
    let records = read_manifest(&args.manifest)?;
    if records.is_empty() {
        return Err(OdtError::validation("manifest has no records to screen"));
    }
    let base = manifest_base(&args.manifest);

    let rows = if args.rule {
        let mut rule_cfg = cfg.rule_config();
        if let Some(threshold) = args.threshold {
            rule_cfg.threshold = threshold;
        }
        let scores = rule_score_records(&records, &base, &rule_cfg)?;
        let calibrate = args.threshold.is_none() && (args.calibrate || cfg.rule.calibrate);
        if calibrate {
            let train_scores: Vec<(f64, _)> = records
                .iter()
                .zip(&scores)
                .filter(|(r, _)| r.split == Split::Train)
                .map(|(r, &s)| (s, r.label))
                .collect();
            rule_cfg.threshold = calibrate_threshold(&train_scores)?;
            println!("calibrated rule threshold: {}", rule_cfg.threshold);
        } else {
            println!("rule threshold: {}", rule_cfg.threshold);
        }
        rule_rows(&records, &scores, rule_cfg.threshold)
    } else if let Some(model_path) = &args.model {
        let params = read_model(model_path)?;
        let threshold = args.threshold.unwrap_or(cfg.train.decision_threshold);
        net_rows(&records, &base, &params, cfg.train.input_size, threshold)?
    } else {
        return Err(OdtError::validation(
            "choose a screening method: --rule or --model <FILE>",
        ));
    };

    write_scores_csv(&args.out, &rows)?;
    let report = split_report(&rows, args.metrics_split.to_split())?;
    println!(
        "screened {} fields -> {} ({} split: accuracy {}, sensitivity {}, specificity {})",
        rows.len(),
        args.out.display(),
        report.split,
        percent(report.metrics.accuracy),
        percent(report.metrics.sensitivity),
        percent(report.metrics.specificity),
    );
    Ok(())
}
