//! On-disk formats for complex fields and real rasters.
//!
//! `OFC1`: magic `OFC1`, u32 LE width, u32 LE height, f64 LE pixel pitch,
//! then width*height interleaved (re, im) f64 LE pairs in row-major order.
//!
//! `OPH1`: magic `OPH1`, u32 LE width, u32 LE height, then width*height
//! f64 LE values in row-major order. No pitch field: a real raster does not
//! carry geometry.
//!
//! Readers validate magic, header arithmetic, and exact payload length, and
//! every failure names the file.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{OdtError, Result};

use super::{ComplexField2D, PhaseImage};

const FIELD_MAGIC: &[u8; 4] = b"OFC1";
const IMAGE_MAGIC: &[u8; 4] = b"OPH1";

fn open_out(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).map_err(|e| OdtError::io(path, e))?,
    ))
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|e| OdtError::io(path, e))?;
    Ok(buf)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(OdtError::format(
                self.path,
                format!(
                    "truncated: wanted {} bytes at offset {}, file has {}",
                    n,
                    self.pos,
                    self.bytes.len()
                ),
            ));
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn magic(&mut self, expected: &[u8; 4]) -> Result<()> {
        let got = self.take(4)?;
        if got != expected {
            return Err(OdtError::format(
                self.path,
                format!(
                    "bad magic {:?}, expected {:?}",
                    String::from_utf8_lossy(got),
                    String::from_utf8_lossy(expected)
                ),
            ));
        }
        Ok(())
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f64(&mut self) -> Result<f64> {
        let b = self.take(8)?;
        Ok(f64::from_le_bytes(b.try_into().expect("8-byte slice")))
    }

    /// Remaining payload reinterpreted as f64 LE; errors if the byte count
    /// does not match `count` values exactly.
    fn f64_payload(&mut self, count: usize) -> Result<Vec<f64>> {
        let rest = &self.bytes[self.pos..];
        if rest.len() != count * 8 {
            return Err(OdtError::format(
                self.path,
                format!(
                    "payload is {} bytes, header promises {} values ({} bytes)",
                    rest.len(),
                    count,
                    count * 8
                ),
            ));
        }
        Ok(rest
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect())
    }
}

/// Writes a complex field as OFC1.
pub fn write_field(path: impl AsRef<Path>, field: &ComplexField2D) -> Result<()> {
    let path = path.as_ref();
    let mut out = open_out(path)?;
    let io = |e| OdtError::io(path, e);
    out.write_all(FIELD_MAGIC).map_err(io)?;
    out.write_all(&(field.width() as u32).to_le_bytes()).map_err(io)?;
    out.write_all(&(field.height() as u32).to_le_bytes()).map_err(io)?;
    out.write_all(&field.pixel_pitch().to_le_bytes()).map_err(io)?;
    for v in field.values() {
        out.write_all(&v.re.to_le_bytes()).map_err(io)?;
        out.write_all(&v.im.to_le_bytes()).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Reads an OFC1 complex field.
pub fn read_field(path: impl AsRef<Path>) -> Result<ComplexField2D> {
    let path = path.as_ref();
    let bytes = read_all(path)?;
    let mut cur = Cursor { bytes: &bytes, pos: 0, path };
    cur.magic(FIELD_MAGIC)?;
    let width = cur.u32()? as usize;
    let height = cur.u32()? as usize;
    let pitch = cur.f64()?;
    let raw = cur.f64_payload(width.checked_mul(height).and_then(|n| n.checked_mul(2)).ok_or_else(
        || OdtError::format(path, "header dimensions overflow"),
    )?)?;
    let values = raw
        .chunks_exact(2)
        .map(|p| Complex64::new(p[0], p[1]))
        .collect();
    ComplexField2D::new(width, height, pitch, values)
        .map_err(|e| OdtError::format(path, e.to_string()))
}

/// Writes a real raster as OPH1.
pub fn write_image(path: impl AsRef<Path>, image: &PhaseImage) -> Result<()> {
    let path = path.as_ref();
    let mut out = open_out(path)?;
    let io = |e| OdtError::io(path, e);
    out.write_all(IMAGE_MAGIC).map_err(io)?;
    out.write_all(&(image.width() as u32).to_le_bytes()).map_err(io)?;
    out.write_all(&(image.height() as u32).to_le_bytes()).map_err(io)?;
    for v in image.values() {
        out.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Reads an OPH1 real raster.
pub fn read_image(path: impl AsRef<Path>) -> Result<PhaseImage> {
    let path = path.as_ref();
    let bytes = read_all(path)?;
    let mut cur = Cursor { bytes: &bytes, pos: 0, path };
    cur.magic(IMAGE_MAGIC)?;
    let width = cur.u32()? as usize;
    let height = cur.u32()? as usize;
    let values = cur.f64_payload(
        width
            .checked_mul(height)
            .ok_or_else(|| OdtError::format(path, "header dimensions overflow"))?,
    )?;
    PhaseImage::new(width, height, values).map_err(|e| OdtError::format(path, e.to_string()))
}
