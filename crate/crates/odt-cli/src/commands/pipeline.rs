//! `pipeline`: the whole quality-control story in one run — simulate a
//! corpus, screen it with the spectral rule and with a freshly trained
//! network, reconstruct the first illumination sweep under each screen's
//! verdicts, and write a JSON summary of accuracies, background noise, and
//! every emitted file.
//!
//! Every stage derives its randomness from the config seed, so two runs of
//! the same config produce byte-identical artifacts — the cheap, total
//! check that an experiment is reproducible.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use rayon::prelude::*;
use serde::Serialize;

use odt_core::field::read_field;
use odt_core::net::{train, write_model, write_training_log};
use odt_core::recon::{background_sd, reconstruct_tomogram, VoxelBox};
use odt_core::rule::calibrate_threshold;
use odt_core::sim::{generate_dataset, write_volume, FieldRecord, Label, NoiseKind, Split};
use odt_core::{OdtError, Result};

use crate::commands::{net_rows, percent, rule_rows, rule_score_records};
use crate::config::RunConfig;
use crate::report::{
    file_inventory, split_report, write_json, write_scores_csv, FileEntry,
    SplitReport,
};

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Output directory for data/, model, volumes/, and reports/.
    #[arg(long, default_value = "pipeline-run")]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
struct PipelineSummary {
    seed: u64,
    records: RecordCounts,
    rule: ScreenSummary,
    net: NetSummary,
    reconstruction: ReconSummary,
    files: Vec<FileEntry>,
}

#[derive(Debug, Serialize)]
struct RecordCounts {
    total: usize,
    train: usize,
    test: usize,
    clean: usize,
    fringe: usize,
    broken: usize,
}

#[derive(Debug, Serialize)]
struct ScreenSummary {
    threshold: f64,
    calibrated: bool,
    test: SplitReport,
}

#[derive(Debug, Serialize)]
struct NetSummary {
    epochs: usize,
    parameters: usize,
    model_checksum: u64,
    test: SplitReport,
}

#[derive(Debug, Serialize)]
struct ReconSummary {
    sweep_fields: usize,
    volume_depth: usize,
    box_origin: [usize; 3],
    box_size: [usize; 3],
    variants: Vec<ReconVariant>,
}

/// One reconstruction of the sweep under one keep-set. A variant with no
/// kept fields gets no volume and a null background SD.
#[derive(Debug, Serialize)]
struct ReconVariant {
    name: String,
    kept_fields: usize,
    volume: Option<String>,
    background_sd: Option<f64>,
}

pub fn run(cfg: &RunConfig, args: &PipelineArgs) -> Result<()> {
    let out = &args.out;
    let reports = out.join("reports");
    fs::create_dir_all(&reports).map_err(|e| OdtError::io(&reports, e))?;

    // Stage 1: corpus.
    eprintln!("[1/5] simulating {} fields", cfg.dataset.count);
    let data_dir = out.join("data");
    let records = generate_dataset(&cfg.dataset_config(), &data_dir)?;
    let counts = RecordCounts {
        total: records.len(),
        train: records.iter().filter(|r| r.split == Split::Train).count(),
        test: records.iter().filter(|r| r.split == Split::Test).count(),
        clean: records.iter().filter(|r| r.kind == NoiseKind::None).count(),
        fringe: records.iter().filter(|r| r.kind == NoiseKind::Fringe).count(),
        broken: records.iter().filter(|r| r.kind == NoiseKind::Broken).count(),
    };

    // Stage 2: spectral rule.
    eprintln!("[2/5] screening with the spectral rule");
    let mut rule_cfg = cfg.rule_config();
    let scores = rule_score_records(&records, &data_dir, &rule_cfg)?;
    if cfg.rule.calibrate {
        let train_scores: Vec<(f64, Label)> = records
            .iter()
            .zip(&scores)
            .filter(|(r, _)| r.split == Split::Train)
            .map(|(r, &s)| (s, r.label))
            .collect();
        rule_cfg.threshold = calibrate_threshold(&train_scores)?;
    }
    let rule_rows_all = rule_rows(&records, &scores, rule_cfg.threshold);
    write_scores_csv(reports.join("rule_scores.csv"), &rule_rows_all)?;
    let rule_summary = ScreenSummary {
        threshold: rule_cfg.threshold,
        calibrated: cfg.rule.calibrate,
        test: split_report(&rule_rows_all, Some(Split::Test))?,
    };

    // Stage 3: network training.
    let train_cfg = cfg.train_config();
    eprintln!("[3/5] training the network ({} epochs)", train_cfg.epochs);
    let (params, log) = train(&records, &data_dir, &train_cfg)?;
    let model_checksum = write_model(out.join("model.qcn"), &params)?;
    write_training_log(reports.join("train_log.csv"), &log)?;

    // Stage 4: network screening.
    eprintln!("[4/5] screening with the trained network");
    let net_rows_all = net_rows(
        &records,
        &data_dir,
        &params,
        train_cfg.input_size,
        train_cfg.decision_threshold,
    )?;
    write_scores_csv(reports.join("net_scores.csv"), &net_rows_all)?;
    let net_summary = NetSummary {
        epochs: log.len(),
        parameters: params.num_parameters(),
        model_checksum,
        test: split_report(&net_rows_all, Some(Split::Test))?,
    };

    // Stage 5: reconstructions of the leading illumination sweep, once per
    // keep-set: everything, the manifest truth, and each screen's verdict.
    eprintln!("[5/5] reconstructing the leading sweep");
    let sweep: Vec<usize> = records
        .iter()
        .enumerate()
        .take_while(|(i, r)| r.angle_index == *i)
        .map(|(i, _)| i)
        .collect();
    let keep_all: Vec<usize> = sweep.clone();
    let keep_truth: Vec<usize> =
        sweep.iter().copied().filter(|&i| records[i].label == Label::Clean).collect();
    let keep_rule: Vec<usize> = sweep
        .iter()
        .copied()
        .filter(|&i| rule_rows_all[i].predicted == Label::Clean)
        .collect();
    let keep_net: Vec<usize> = sweep
        .iter()
        .copied()
        .filter(|&i| net_rows_all[i].predicted == Label::Clean)
        .collect();

    let volumes_dir = out.join("volumes");
    fs::create_dir_all(&volumes_dir).map_err(|e| OdtError::io(&volumes_dir, e))?;
    let depth = cfg.dataset.volume_depth;
    let region = VoxelBox { origin: cfg.reconstruct.box_origin, size: cfg.reconstruct.box_size };
    let mut variants = Vec::new();
    for (name, keep) in [
        ("all", &keep_all),
        ("truth_clean", &keep_truth),
        ("rule_kept", &keep_rule),
        ("net_kept", &keep_net),
    ] {
        variants.push(reconstruct_variant(
            name, keep, &records, &data_dir, cfg, depth, &region, out, &volumes_dir,
        )?);
    }
    let recon_summary = ReconSummary {
        sweep_fields: sweep.len(),
        volume_depth: depth,
        box_origin: region.origin,
        box_size: region.size,
        variants,
    };

    // Summary document plus the inventory of everything else written.
    let summary_path = reports.join("summary.json");
    let summary = PipelineSummary {
        seed: cfg.seed,
        records: counts,
        rule: rule_summary,
        net: net_summary,
        reconstruction: recon_summary,
        files: file_inventory(out, &summary_path)?,
    };
    write_json(&summary_path, &summary)?;

    print_summary(&summary, &summary_path);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn reconstruct_variant(
    name: &str,
    keep: &[usize],
    records: &[FieldRecord],
    data_dir: &Path,
    cfg: &RunConfig,
    depth: usize,
    region: &VoxelBox,
    out: &Path,
    volumes_dir: &Path,
) -> Result<ReconVariant> {
    if keep.is_empty() {
        return Ok(ReconVariant {
            name: name.to_string(),
            kept_fields: 0,
            volume: None,
            background_sd: None,
        });
    }
    let fields = keep
        .par_iter()
        .map(|&i| Ok((read_field(data_dir.join(&records[i].path))?, records[i].k_in)))
        .collect::<Result<Vec<_>>>()?;
    let volume = reconstruct_tomogram(&fields, &cfg.optics, depth)?;
    let path = volumes_dir.join(format!("{name}.riv"));
    write_volume(&path, &volume)?;
    let sd = match background_sd(&volume, region) {
        Ok(sd) => Some(sd),
        Err(e) => {
            eprintln!("note: background box skipped for {name}: {e}");
            None
        }
    };
    let rel = path
        .strip_prefix(out)
        .expect("volumes live under the output directory")
        .to_string_lossy()
        .replace('\\', "/");
    Ok(ReconVariant {
        name: name.to_string(),
        kept_fields: keep.len(),
        volume: Some(rel),
        background_sd: sd,
    })
}

fn print_summary(summary: &PipelineSummary, path: &Path) {
    let r = &summary.records;
    println!(
        "corpus: {} fields ({} train / {} test; {} clean, {} fringe, {} broken)",
        r.total, r.train, r.test, r.clean, r.fringe, r.broken
    );
    println!(
        "rule screen (threshold {}): test accuracy {}",
        summary.rule.threshold,
        percent(summary.rule.test.metrics.accuracy),
    );
    println!(
        "net screen ({} epochs): test accuracy {}",
        summary.net.epochs,
        percent(summary.net.test.metrics.accuracy),
    );
    for v in &summary.reconstruction.variants {
        match (v.background_sd, &v.volume) {
            (Some(sd), Some(vol)) => {
                println!("background SD [{}]: {sd:.6e} ({} fields) -> {vol}", v.name, v.kept_fields)
            }
            (None, Some(vol)) => {
                println!("background SD [{}]: unavailable ({} fields) -> {vol}", v.name, v.kept_fields)
            }
            _ => println!("background SD [{}]: no fields kept", v.name),
        }
    }
    println!("summary: {}", path.display());
}
