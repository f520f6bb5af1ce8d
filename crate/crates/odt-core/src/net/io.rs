//! On-disk formats for trained models and training logs.
//!
//! `QCN1`: magic `QCN1`, u8 input mode (0 phase, 1 amplitude, 2 complex),
//! u32 LE conv block count followed by (u32 in_ch, u32 out_ch) per block,
//! u32 LE linear layer count followed by (u32 in_dim, u32 out_dim) per
//! layer, then every parameter as f64 LE — per layer weights first, bias
//! second, layers in network order — and finally a u32 LE CRC32 of every
//! preceding byte. The checksum distinguishes "this model was damaged in
//! transit" from "this is not a model file" when a load fails.
//!
//! Training logs are plain CSV — one row per epoch — so they can be plotted
//! without any tooling.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{OdtError, Result};
use crate::net::params::{ConvLayer, InputMode, LinearLayer, NetParams};
use crate::net::train::EpochLog;

const MODEL_MAGIC: &[u8; 4] = b"QCN1";
/// Caps on header-declared sizes; anything larger is a corrupt or hostile
/// header, not a model this library could have produced.
const MAX_LAYERS: u32 = 1024;
const MAX_WIDTH: u32 = 1 << 20;

/// Writes a trained model, returning the number of bytes written.
pub fn write_model(path: impl AsRef<Path>, params: &NetParams) -> Result<u64> {
    let path = path.as_ref();
    params.validate()?;

    let payload_values: usize = params
        .convs
        .iter()
        .map(|c| c.weights.len() + c.bias.len())
        .chain(params.linears.iter().map(|l| l.weights.len() + l.bias.len()))
        .sum();
    let header = 4 + 1 + 4 + params.convs.len() * 8 + 4 + params.linears.len() * 8;
    let mut bytes = Vec::with_capacity(header + payload_values * 8 + 4);

    bytes.extend_from_slice(MODEL_MAGIC);
    bytes.push(params.input_mode.code());
    bytes.extend_from_slice(&(params.convs.len() as u32).to_le_bytes());
    for c in &params.convs {
        bytes.extend_from_slice(&(c.in_ch as u32).to_le_bytes());
        bytes.extend_from_slice(&(c.out_ch as u32).to_le_bytes());
    }
    bytes.extend_from_slice(&(params.linears.len() as u32).to_le_bytes());
    for l in &params.linears {
        bytes.extend_from_slice(&(l.in_dim as u32).to_le_bytes());
        bytes.extend_from_slice(&(l.out_dim as u32).to_le_bytes());
    }
    for c in &params.convs {
        for v in c.weights.iter().chain(c.bias.iter()) {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    for l in &params.linears {
        for v in l.weights.iter().chain(l.bias.iter()) {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&bytes);
    bytes.extend_from_slice(&crc.to_le_bytes());

    File::create(path)
        .and_then(|mut f| f.write_all(&bytes))
        .map_err(|e| OdtError::io(path, e))?;
    Ok(bytes.len() as u64)
}

/// Reads a model written by [`write_model`], verifying the checksum and the
/// architecture chain before accepting any value.
pub fn read_model(path: impl AsRef<Path>) -> Result<NetParams> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| OdtError::io(path, e))?;

    if bytes.len() < 4 + 1 + 4 + 4 + 4 {
        return Err(OdtError::format(path, "file too short to be a model"));
    }
    let (body, crc_bytes) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(crc_bytes.try_into().expect("4-byte slice"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(OdtError::format(
            path,
            format!("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}"),
        ));
    }

    let mut pos = 0usize;
    let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
        if *pos + n > body.len() {
            return Err(OdtError::format(
                path,
                format!("truncated header at offset {}", *pos),
            ));
        }
        let s = &body[*pos..*pos + n];
        *pos += n;
        Ok(s)
    };
    let take_u32 = |pos: &mut usize| -> Result<u32> {
        let b = take(pos, 4)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4-byte slice")))
    };

    if take(&mut pos, 4)? != MODEL_MAGIC {
        return Err(OdtError::format(path, "bad magic, not a model file"));
    }
    let mode_code = take(&mut pos, 1)?[0];
    let input_mode = InputMode::from_code(mode_code)
        .ok_or_else(|| OdtError::format(path, format!("unknown input mode {mode_code}")))?;

    let n_convs = take_u32(&mut pos)?;
    if n_convs == 0 || n_convs > MAX_LAYERS {
        return Err(OdtError::format(path, format!("implausible conv count {n_convs}")));
    }
    let mut conv_dims = Vec::with_capacity(n_convs as usize);
    for _ in 0..n_convs {
        let in_ch = take_u32(&mut pos)?;
        let out_ch = take_u32(&mut pos)?;
        if in_ch == 0 || out_ch == 0 || in_ch > MAX_WIDTH || out_ch > MAX_WIDTH {
            return Err(OdtError::format(path, "implausible conv dimensions"));
        }
        conv_dims.push((in_ch as usize, out_ch as usize));
    }
    let n_linears = take_u32(&mut pos)?;
    if n_linears == 0 || n_linears > MAX_LAYERS {
        return Err(OdtError::format(
            path,
            format!("implausible linear count {n_linears}"),
        ));
    }
    let mut linear_dims = Vec::with_capacity(n_linears as usize);
    for _ in 0..n_linears {
        let in_dim = take_u32(&mut pos)?;
        let out_dim = take_u32(&mut pos)?;
        if in_dim == 0 || out_dim == 0 || in_dim > MAX_WIDTH || out_dim > MAX_WIDTH {
            return Err(OdtError::format(path, "implausible linear dimensions"));
        }
        linear_dims.push((in_dim as usize, out_dim as usize));
    }

    let payload_values: usize = conv_dims
        .iter()
        .map(|&(i, o)| o * i * 9 + o)
        .chain(linear_dims.iter().map(|&(i, o)| o * i + o))
        .sum();
    let payload = &body[pos..];
    if payload.len() != payload_values * 8 {
        return Err(OdtError::format(
            path,
            format!(
                "payload is {} bytes, header promises {} values ({} bytes)",
                payload.len(),
                payload_values,
                payload_values * 8
            ),
        ));
    }
    let mut values = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")));
    let mut next = |n: usize| -> Vec<f64> { values.by_ref().take(n).collect() };

    let convs: Vec<ConvLayer> = conv_dims
        .iter()
        .map(|&(in_ch, out_ch)| ConvLayer {
            in_ch,
            out_ch,
            weights: next(out_ch * in_ch * 9),
            bias: next(out_ch),
        })
        .collect();
    let linears: Vec<LinearLayer> = linear_dims
        .iter()
        .map(|&(in_dim, out_dim)| LinearLayer {
            in_dim,
            out_dim,
            weights: next(out_dim * in_dim),
            bias: next(out_dim),
        })
        .collect();

    let params = NetParams {
        input_mode,
        convs,
        linears,
    };
    params
        .validate()
        .map_err(|e| OdtError::format(path, format!("inconsistent model: {e}")))?;
    Ok(params)
}

/// Writes the per-epoch training log as CSV. Undefined rates (for instance
/// the validation accuracy of a run without a validation split) appear as
/// `NaN`.
pub fn write_training_log(path: impl AsRef<Path>, log: &[EpochLog]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("epoch,train_loss,train_accuracy,val_accuracy\n");
    for row in log {
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.epoch, row.train_loss, row.train_accuracy, row.val_accuracy
        ));
    }
    File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| OdtError::io(path, e))
}

// ==== tests ====
