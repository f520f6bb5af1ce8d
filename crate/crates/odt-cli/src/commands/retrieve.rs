//! `retrieve`: demodulate an off-axis hologram — crop one sideband around
//! the reference carrier, re-center it, and inverse-transform — recovering
//! the complex field, optionally normalized by a matching background
//! hologram taken without a sample.

use std::path::PathBuf;

use clap::Args;

use odt_core::field::{read_image, write_field};
use odt_core::retrieval::{normalize_background, retrieve_field};
use odt_core::Result;

use crate::config::RunConfig;

#[derive(Debug, Args)]
pub struct RetrieveArgs {
    /// Hologram to demodulate (binary intensity image).
    #[arg(long)]
    pub hologram: PathBuf,

    /// Sample-free hologram from the same setup; when given, the retrieved
    /// sample field is divided by the retrieved background field.
    #[arg(long)]
    pub background: Option<PathBuf>,

    /// Output complex-field file.
    #[arg(long)]
    pub out: PathBuf,

    /// Detector pixel pitch in micrometers (default: the config optics).
    #[arg(long)]
    pub pixel_pitch: Option<f64>,

    /// Reference-beam tilt, radians per micrometer (default: the config's
    /// hologram section).
    #[arg(long, num_args = 2, value_names = ["KX", "KY"], allow_negative_numbers = true)]
    pub carrier: Option<Vec<f64>>,

    /// Sideband bandwidth kept around the carrier (default: the config's
    /// hologram section).
    #[arg(long)]
    pub crop_radius: Option<f64>,
}

pub fn run(cfg: &RunConfig, args: &RetrieveArgs) -> Result<()> {
    let pitch = args.pixel_pitch.unwrap_or(cfg.optics.pixel_pitch);
    let carrier = match &args.carrier {
        Some(c) => [c[0], c[1]],
        None => cfg.hologram.carrier,
    };
    let crop_radius = args.crop_radius.unwrap_or(cfg.hologram.crop_radius);

    let hologram = read_image(&args.hologram)?;
    let mut field = retrieve_field(&hologram, pitch, carrier, crop_radius)?;
    if let Some(background_path) = &args.background {
        let background =
            retrieve_field(&read_image(background_path)?, pitch, carrier, crop_radius)?;
        field = normalize_background(&field, &background)?;
    }
    write_field(&args.out, &field)?;
    println!(
        "retrieved {}x{} field from {} -> {}",
        field.width(),
        field.height(),
        args.hologram.display(),
        args.out.display(),
    );
    Ok(())
}
