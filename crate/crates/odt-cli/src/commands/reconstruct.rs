//! `reconstruct`: invert one illumination sweep of complex fields into a
//! 3-D refractive-index volume, optionally dropping fields a screen (or
//! the manifest's own labels) marked noisy, and report the background-noise
//! figure over the configured specimen-free box.
//!
//! The manifest's leading run of records whose angle index equals their
//! position — one full sweep of a single specimen — is reconstructed;
//! corpora hold many single-angle specimens after that run, which cannot be
//! combined into one volume.

use std::collections::HashSet;
use std::path::PathBuf;

use clap::Args;
use rayon::prelude::*;

use odt_core::field::read_field;
use odt_core::recon::{background_sd, reconstruct_tomogram, VoxelBox};
use odt_core::sim::{read_manifest, write_volume, Label, RIVolume};
use odt_core::{OdtError, Result};

use crate::commands::{manifest_base, save_gray_png};
use crate::config::RunConfig;

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// Corpus manifest (JSON lines).
    #[arg(long)]
    pub manifest: PathBuf,

    /// Output volume file.
    #[arg(long, default_value = "volume.riv")]
    pub out: PathBuf,

    /// Keep only fields whose manifest label is clean.
    #[arg(long)]
    pub clean_only: bool,

    /// Keep only fields a previous screen's CSV predicted clean.
    #[arg(long)]
    pub scores: Option<PathBuf>,

    /// Axial voxel count override for the config's reconstruct.volume_depth.
    #[arg(long)]
    pub depth: Option<usize>,

    /// Export one axial slice as a grayscale PNG (linear index-to-gray map).
    #[arg(long)]
    pub slice_png: Option<PathBuf>,

    /// Slice index for --slice-png (default: the middle slice).
    #[arg(long)]
    pub slice_index: Option<usize>,
}

pub fn run(cfg: &RunConfig, args: &ReconstructArgs) -> Result<()> {
    let records = read_manifest(&args.manifest)?;
    let base = manifest_base(&args.manifest);

    let sweep: Vec<_> = records
        .iter()
        .enumerate()
        .take_while(|(i, r)| r.angle_index == *i)
        .map(|(_, r)| r)
        .collect();
    if sweep.is_empty() {
        return Err(OdtError::validation(
            "manifest does not start with an illumination sweep (angle_index 0, 1, ...)",
        ));
    }
    let total = sweep.len();

    let mut kept = sweep;
    if args.clean_only {
        kept.retain(|r| r.label == Label::Clean);
    }
    if let Some(scores) = &args.scores {
        let clean: HashSet<String> =
            crate::report::read_kept_paths(scores)?.into_iter().collect();
        kept.retain(|r| clean.contains(&r.path));
    }
    if kept.is_empty() {
        return Err(OdtError::validation(
            "every field of the sweep was filtered out; nothing to reconstruct",
        ));
    }

    let fields = kept
        .par_iter()
        .map(|r| Ok((read_field(base.join(&r.path))?, r.k_in)))
        .collect::<Result<Vec<_>>>()?;
    let depth = args.depth.unwrap_or(cfg.reconstruct.volume_depth);
    let volume = reconstruct_tomogram(&fields, &cfg.optics, depth)?;
    write_volume(&args.out, &volume)?;

    let dims = volume.dims();
    println!(
        "reconstructed {}x{}x{} volume from {} of {} sweep fields -> {}",
        dims.nx,
        dims.ny,
        dims.nz,
        kept.len(),
        total,
        args.out.display(),
    );

    let region = VoxelBox { origin: cfg.reconstruct.box_origin, size: cfg.reconstruct.box_size };
    match background_sd(&volume, &region) {
        Ok(sd) => println!(
            "background SD over origin {:?} size {:?}: {:.6e}",
            region.origin, region.size, sd
        ),
        Err(e) => eprintln!("note: background box skipped: {e}"),
    }

    if let Some(png) = &args.slice_png {
        export_slice(&volume, args.slice_index, png)?;
    }
    Ok(())
}

/// Maps one axial slice linearly onto 8-bit gray and reports the mapping's
/// endpoints, so pixel values can be read back as refractive indices.
fn export_slice(volume: &RIVolume, index: Option<usize>, path: &PathBuf) -> Result<()> {
    let dims = volume.dims();
    let z = index.unwrap_or(dims.nz / 2);
    let slice = volume.slice_z(z)?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in slice.values() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let span = hi - lo;
    let gray: Vec<u8> = slice
        .values()
        .iter()
        .map(|&v| {
            if span > 0.0 {
                ((v - lo) / span * 255.0).round() as u8
            } else {
                0
            }
        })
        .collect();
    save_gray_png(path, slice.width(), slice.height(), gray)?;
    println!("slice z={z}: RI min {lo:.6}, max {hi:.6} -> {}", path.display());
    Ok(())
}
