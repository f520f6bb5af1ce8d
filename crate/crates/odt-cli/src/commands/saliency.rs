//! `saliency`: explain one classification. Renders the channel-weighted
//! activation map (where the network looked), the guided gradient map
//! (which pixels drove the score), and their pointwise product as
//! grayscale PNGs alongside the predicted probability.

use std::path::PathBuf;

use clap::Args;

use odt_core::field::read_field;
use odt_core::net::{classify, field_to_input, read_model};
use odt_core::saliency::{cam_map, grad_cam, guided_backprop, SaliencyMap};
use odt_core::Result;

use crate::commands::save_gray_png;
use crate::config::RunConfig;
use crate::report::label_name;

#[derive(Debug, Args)]
pub struct SaliencyArgs {
    /// Trained model file.
    #[arg(long)]
    pub model: PathBuf,

    /// Complex-field file to explain.
    #[arg(long)]
    pub field: PathBuf,

    /// Output prefix; writes <prefix>_cam.png, <prefix>_guided.png, and
    /// <prefix>_grad_cam.png.
    #[arg(long, default_value = "saliency")]
    pub out_prefix: String,

    /// Probability threshold override for the printed verdict.
    #[arg(long)]
    pub threshold: Option<f64>,
}

pub fn run(cfg: &RunConfig, args: &SaliencyArgs) -> Result<()> {
    let params = read_model(&args.model)?;
    let field = read_field(&args.field)?;
    let input_size = cfg.train.input_size;
    let threshold = args.threshold.unwrap_or(cfg.train.decision_threshold);

    let (label, probability) = classify(&params, &field, input_size, threshold)?;
    println!("p(noisy) = {probability:.4} -> {}", label_name(label));

    let input = field_to_input(&field, params.input_mode, input_size)?;
    let cam = cam_map(&params, &input)?;
    let guided = guided_backprop(&params, &input)?;
    let product = grad_cam(&cam, &guided)?;

    for (name, map) in [("cam", &cam), ("guided", &guided), ("grad_cam", &product)] {
        let path = PathBuf::from(format!("{}_{name}.png", args.out_prefix));
        write_map(&path, map)?;
    }
    Ok(())
}

fn write_map(path: &PathBuf, map: &SaliencyMap) -> Result<()> {
    save_gray_png(path, map.width(), map.height(), map.to_gray8())?;
    let note = if map.degenerate() { " (flat map: no spatial preference)" } else { "" };
    println!("{}{note}", path.display());
    Ok(())
}
