//! `simulate`: generate a labeled synthetic corpus — complex fields with
//! seeded defect injections plus a JSON-lines manifest, and optionally the
//! off-axis holograms a camera would have recorded of each field.

use std::fs;
use std::path::PathBuf;

use clap::Args;
use num_complex::Complex64;
use rayon::prelude::*;

use odt_core::field::{read_field, write_image, ComplexField2D};
use odt_core::sim::{generate_dataset, synthesize_hologram, Label, NoiseKind, Split};
use odt_core::{OdtError, Result};

use crate::config::RunConfig;

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Output directory; receives fields/ and manifest.jsonl.
    #[arg(long, default_value = "dataset")]
    pub out: PathBuf,

    /// Record-count override for the config's dataset.count.
    #[arg(long)]
    pub count: Option<usize>,

    /// Also write holograms/ — one off-axis hologram per field plus a
    /// background.oph recorded without a sample — for exercising retrieval.
    #[arg(long)]
    pub holograms: bool,
}

pub fn run(cfg: &RunConfig, args: &SimulateArgs) -> Result<()> {
    let mut dataset = cfg.dataset_config();
    if let Some(count) = args.count {
        dataset.count = count;
    }
    fs::create_dir_all(&args.out).map_err(|e| OdtError::io(&args.out, e))?;
    let records = generate_dataset(&dataset, &args.out)?;

    if args.holograms {
        write_holograms(cfg, &args.out, &records)?;
    }

    let count_where = |f: &dyn Fn(&odt_core::sim::FieldRecord) -> bool| {
        records.iter().filter(|r| f(r)).count()
    };
    println!(
        "wrote {} fields to {} ({} clean / {} noisy; kinds: {} none, {} fringe, {} broken)",
        records.len(),
        args.out.display(),
        count_where(&|r| r.label == Label::Clean),
        count_where(&|r| r.label == Label::Noisy),
        count_where(&|r| r.kind == NoiseKind::None),
        count_where(&|r| r.kind == NoiseKind::Fringe),
        count_where(&|r| r.kind == NoiseKind::Broken),
    );
    println!(
        "splits: {} train / {} test; manifest: {}",
        count_where(&|r| r.split == Split::Train),
        count_where(&|r| r.split == Split::Test),
        args.out.join("manifest.jsonl").display(),
    );
    Ok(())
}

/// Renders each field's off-axis hologram, plus the sample-free background
/// hologram retrieval needs for normalization.
fn write_holograms(
    cfg: &RunConfig,
    out: &std::path::Path,
    records: &[odt_core::sim::FieldRecord],
) -> Result<()> {
    let holo_dir = out.join("holograms");
    fs::create_dir_all(&holo_dir).map_err(|e| OdtError::io(&holo_dir, e))?;
    let carrier = cfg.hologram.carrier;
    let ref_amplitude = cfg.hologram.ref_amplitude;

    let n = cfg.optics.detector_pixels;
    let unit = ComplexField2D::new(
        n,
        n,
        cfg.optics.pixel_pitch,
        vec![Complex64::new(1.0, 0.0); n * n],
    )?;
    write_image(
        holo_dir.join("background.oph"),
        &synthesize_hologram(&unit, carrier, ref_amplitude)?,
    )?;

    records.par_iter().try_for_each(|record| {
        let field = read_field(out.join(&record.path))?;
        let hologram = synthesize_hologram(&field, carrier, ref_amplitude)?;
        let name = std::path::Path::new(&record.path)
            .file_stem()
            .expect("record paths carry file names")
            .to_string_lossy()
            .into_owned();
        write_image(holo_dir.join(format!("{name}.oph")), &hologram)
    })?;
    println!("wrote {} holograms to {}", records.len() + 1, holo_dir.display());
    Ok(())
}
