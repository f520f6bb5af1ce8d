//! `train`: fit the screening network on a manifest's training split and
//! save the best-validation-epoch parameters as a checksummed model file.

use std::path::PathBuf;

use clap::Args;

use odt_core::net::{train, write_model, write_training_log};
use odt_core::sim::read_manifest;
use odt_core::Result;

use crate::commands::{manifest_base, percent};
use crate::config::RunConfig;

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Corpus manifest (JSON lines); only its training split is used.
    #[arg(long)]
    pub manifest: PathBuf,

    /// Output model file.
    #[arg(long, default_value = "model.qcn")]
    pub out: PathBuf,

    /// Optional per-epoch CSV log (epoch, loss, accuracies).
    #[arg(long)]
    pub log: Option<PathBuf>,

    /// Epoch-count override for the config's train.epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
}

pub fn run(cfg: &RunConfig, args: &TrainArgs) -> Result<()> {
    let records = read_manifest(&args.manifest)?;
    let base = manifest_base(&args.manifest);
    let mut train_cfg = cfg.train_config();
    if let Some(epochs) = args.epochs {
        train_cfg.epochs = epochs;
    }

    let (params, log) = train(&records, &base, &train_cfg)?;
    for row in &log {
        println!(
            "epoch {:>3}: loss {:.4}, train accuracy {}, validation accuracy {}",
            row.epoch,
            row.train_loss,
            percent(row.train_accuracy),
            percent(row.val_accuracy),
        );
    }
    let checksum = write_model(&args.out, &params)?;
    if let Some(log_path) = &args.log {
        write_training_log(log_path, &log)?;
    }
    println!(
        "model: {} ({} parameters, checksum {checksum})",
        args.out.display(),
        params.num_parameters(),
    );
    Ok(())
}
