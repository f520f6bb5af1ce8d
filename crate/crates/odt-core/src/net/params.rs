//! Network parameters: architecture plan, initialization, gradients.
//!
//! The screening network is a fixed six-block convolutional column — channel
//! counts 32, 64, 128, 256, 512, 1024, each block 3×3 conv → ReLU → 2×2 max
//! pool except the last, which pools globally — followed by a three-layer
//! fully connected head ending in a single logit. The same container also
//! describes scaled-down variants of that shape (fewer blocks, narrower
//! layers), which is what the gradient-correctness tests train on.
//!
//! Initialization is the standard pairing for this topology: convolution
//! weights are zero-mean normal with variance 2/fan_in (He), which preserves
//! activation variance through ReLU stacks; linear weights are uniform over
//! ±sqrt(6/(fan_in+fan_out)) (Xavier); all biases start at zero.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{OdtError, Result};
use crate::seed::derive_rng;

/// Channel counts of the six convolution blocks.
pub const CONV_CHANNELS: [usize; 6] = [32, 64, 128, 256, 512, 1024];
/// Output widths of the fully connected head (the final 1 is the logit).
pub const LINEAR_DIMS: [usize; 3] = [512, 512, 1];
/// Side length the input field is centre-cropped to before classification.
pub const INPUT_SIZE: usize = 128;

/// Which scalar image(s) of the complex field the network consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputMode {
    /// Unwrapped phase, one channel. Phase carries most of the defect
    /// signature, so this is the default.
    Phase,
    /// Amplitude, one channel.
    Amplitude,
    /// Two channels: amplitude and unwrapped phase.
    Complex,
}

impl InputMode {
    pub fn channels(self) -> usize {
        match self {
            InputMode::Phase | InputMode::Amplitude => 1,
            InputMode::Complex => 2,
        }
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            InputMode::Phase => 0,
            InputMode::Amplitude => 1,
            InputMode::Complex => 2,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(InputMode::Phase),
            1 => Some(InputMode::Amplitude),
            2 => Some(InputMode::Complex),
            _ => None,
        }
    }
}

/// One 3×3 convolution block's parameters. Weights are row-major
/// `[out_ch, in_ch, 3, 3]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub in_ch: usize,
    pub out_ch: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// One fully connected layer's parameters. Weights are row-major
/// `[out_dim, in_dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Complete parameter set of a screening network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    pub input_mode: InputMode,
    pub convs: Vec<ConvLayer>,
    pub linears: Vec<LinearLayer>,
}

/// Gradient (or optimizer-moment) storage mirroring one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Gradient storage mirroring a full [`NetParams`], in declaration order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub convs: Vec<LayerGrad>,
    pub linears: Vec<LayerGrad>,
}

impl Gradients {
    /// Elementwise accumulation; shapes must match.
    pub fn add_assign(&mut self, other: &Gradients) {
        debug_assert!(self.same_shape(other));
        let pairs = self
            .convs
            .iter_mut()
            .zip(&other.convs)
            .chain(self.linears.iter_mut().zip(&other.linears));
        for (a, b) in pairs {
            for (x, y) in a.weights.iter_mut().zip(&b.weights) {
                *x += y;
            }
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += y;
            }
        }
    }

    /// Scales every entry, e.g. by 1/batch to turn a sum into a mean.
    pub fn scale(&mut self, factor: f64) {
        for layer in self.convs.iter_mut().chain(self.linears.iter_mut()) {
            for x in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                *x *= factor;
            }
        }
    }

    pub(crate) fn same_shape(&self, other: &Gradients) -> bool {
        self.convs.len() == other.convs.len()
            && self.linears.len() == other.linears.len()
            && self
                .convs
                .iter()
                .zip(&other.convs)
                .chain(self.linears.iter().zip(&other.linears))
                .all(|(a, b)| {
                    a.weights.len() == b.weights.len() && a.bias.len() == b.bias.len()
                })
    }
}

impl NetParams {
    /// Zero-filled gradient storage with this network's shape.
    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            convs: self
                .convs
                .iter()
                .map(|c| LayerGrad {
                    weights: vec![0.0; c.weights.len()],
                    bias: vec![0.0; c.bias.len()],
                })
                .collect(),
            linears: self
                .linears
                .iter()
                .map(|l| LayerGrad {
                    weights: vec![0.0; l.weights.len()],
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }

    pub fn num_parameters(&self) -> usize {
        self.convs
            .iter()
            .map(|c| c.weights.len() + c.bias.len())
            .chain(self.linears.iter().map(|l| l.weights.len() + l.bias.len()))
            .sum()
    }

    /// Checks internal consistency: the channel/width chain from input mode
    /// through every block to the single logit, matching buffer lengths, and
    /// finite values.
    pub fn validate(&self) -> Result<()> {
        if self.convs.is_empty() || self.linears.is_empty() {
            return Err(OdtError::validation(
                "network needs at least one convolution block and one linear layer".to_string(),
            ));
        }
        let mut ch = self.input_mode.channels();
        for (i, c) in self.convs.iter().enumerate() {
            if c.in_ch != ch {
                return Err(OdtError::validation(format!(
                    "conv block {i} expects {} input channels, chain provides {ch}",
                    c.in_ch
                )));
            }
            if c.weights.len() != c.out_ch * c.in_ch * 9 || c.bias.len() != c.out_ch {
                return Err(OdtError::validation(format!(
                    "conv block {i} buffer lengths do not match {}x{}x3x3",
                    c.out_ch, c.in_ch
                )));
            }
            ch = c.out_ch;
        }
        let mut dim = ch;
        for (i, l) in self.linears.iter().enumerate() {
            if l.in_dim != dim {
                return Err(OdtError::validation(format!(
                    "linear layer {i} expects width {}, chain provides {dim}",
                    l.in_dim
                )));
            }
            if l.weights.len() != l.out_dim * l.in_dim || l.bias.len() != l.out_dim {
                return Err(OdtError::validation(format!(
                    "linear layer {i} buffer lengths do not match {}x{}",
                    l.out_dim, l.in_dim
                )));
            }
            dim = l.out_dim;
        }
        if dim != 1 {
            return Err(OdtError::validation(format!(
                "final layer must emit one logit, emits {dim}"
            )));
        }
        let finite = self
            .convs
            .iter()
            .flat_map(|c| c.weights.iter().chain(c.bias.iter()))
            .chain(
                self.linears
                    .iter()
                    .flat_map(|l| l.weights.iter().chain(l.bias.iter())),
            )
            .all(|v| v.is_finite());
        if !finite {
            return Err(OdtError::validation(
                "network parameters must be finite".to_string(),
            ));
        }
        Ok(())
    }
}

// Tag separating initialization draws from the other derived streams.
const TAG_INIT: u64 = 10;

/// Initializes the standard six-block architecture.
pub fn init_params(seed: u64, input_mode: InputMode) -> NetParams {
    init_custom_params(seed, input_mode, &CONV_CHANNELS, &LINEAR_DIMS)
        .expect("standard architecture plan is valid")
}

/// Initializes an arbitrary plan of the same topology: each entry of
/// `conv_channels` is one conv→ReLU→pool block (the last block pools
/// globally), each entry of `linear_dims` one head layer, the final entry
/// required to be 1 (the logit).
pub fn init_custom_params(
    seed: u64,
    input_mode: InputMode,
    conv_channels: &[usize],
    linear_dims: &[usize],
) -> Result<NetParams> {
    if conv_channels.is_empty() || linear_dims.is_empty() {
        return Err(OdtError::validation(
            "architecture plan needs at least one conv block and one linear layer".to_string(),
        ));
    }
    if conv_channels.iter().chain(linear_dims).any(|&d| d == 0) {
        return Err(OdtError::validation(
            "architecture plan contains a zero-width layer".to_string(),
        ));
    }
    if *linear_dims.last().unwrap() != 1 {
        return Err(OdtError::validation(
            "final linear layer must have width 1".to_string(),
        ));
    }

    let mut rng = derive_rng(seed, &[TAG_INIT]);
    let mut convs = Vec::with_capacity(conv_channels.len());
    let mut in_ch = input_mode.channels();
    for &out_ch in conv_channels {
        let fan_in = (in_ch * 9) as f64;
        let he = Normal::new(0.0, (2.0 / fan_in).sqrt()).expect("positive std");
        let weights = (0..out_ch * in_ch * 9)
            .map(|_| he.sample(&mut rng))
            .collect();
        convs.push(ConvLayer {
            in_ch,
            out_ch,
            weights,
            bias: vec![0.0; out_ch],
        });
        in_ch = out_ch;
    }

    let mut linears = Vec::with_capacity(linear_dims.len());
    let mut in_dim = in_ch;
    for &out_dim in linear_dims {
        let bound = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let weights = (0..out_dim * in_dim)
            .map(|_| rng.random_range(-bound..bound))
            .collect();
        linears.push(LinearLayer {
            in_dim,
            out_dim,
            weights,
            bias: vec![0.0; out_dim],
        });
        in_dim = out_dim;
    }

    let params = NetParams {
        input_mode,
        convs,
        linears,
    };
    debug_assert!(params.validate().is_ok());
    Ok(params)
}

// ==== tests ====
