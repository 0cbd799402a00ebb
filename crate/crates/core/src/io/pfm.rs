//! PFM (portable float map) reader/writer.
//!
//! Headers are `Pf` (1 channel) or `PF` (3 channels), dimensions, then a
//! scale whose sign encodes endianness (negative = little-endian). Sample
//! rows are stored bottom-up. Values are f32 on disk; NaNs survive a round
//! trip (invalid pixels are conventionally NaN-tagged).

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::math::vec3;
use crate::sphere::ErpLattice;

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

struct Header {
    channels: usize,
    width: usize,
    height: usize,
    little_endian: bool,
    data_offset: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    // Three whitespace-separated tokens ("Pf"/"PF", "W H", scale), each
    // terminated by a single whitespace byte before the raster begins.
    let mut pos = 0;
    let mut token = |what: &str| -> Result<String> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(format_err(format!("missing {what} in PFM header")));
        }
        let s = std::str::from_utf8(&bytes[start..pos])
            .map_err(|_| format_err("non-ASCII PFM header"))?
            .to_string();
        // Consume exactly one whitespace byte after the token.
        pos += 1;
        Ok(s)
    };
    let magic = token("magic")?;
    let channels = match magic.as_str() {
        "Pf" => 1,
        "PF" => 3,
        other => return Err(format_err(format!("bad PFM magic {other:?}"))),
    };
    let width: usize = token("width")?
        .parse()
        .map_err(|_| format_err("bad PFM width"))?;
    let height: usize = token("height")?
        .parse()
        .map_err(|_| format_err("bad PFM height"))?;
    let scale: f64 = token("scale")?
        .parse()
        .map_err(|_| format_err("bad PFM scale"))?;
    if scale == 0.0 {
        return Err(format_err("PFM scale must be nonzero"));
    }
    Ok(Header {
        channels,
        width,
        height,
        little_endian: scale < 0.0,
        data_offset: pos,
    })
}

fn read_samples(path: &Path, expect_channels: usize) -> Result<(ErpLattice, Vec<f32>)> {
    let bytes = fs::read(path)?;
    let h = parse_header(&bytes)?;
    if h.channels != expect_channels {
        return Err(format_err(format!(
            "{} has {} channels, expected {expect_channels}",
            path.display(),
            h.channels
        )));
    }
    let count = h.width * h.height * h.channels;
    let body = &bytes[h.data_offset..];
    if body.len() != count * 4 {
        return Err(format_err(format!(
            "PFM body holds {} bytes, expected {}",
            body.len(),
            count * 4
        )));
    }
    let mut raw = Vec::with_capacity(count);
    for chunk in body.chunks_exact(4) {
        let arr = [chunk[0], chunk[1], chunk[2], chunk[3]];
        raw.push(if h.little_endian {
            f32::from_le_bytes(arr)
        } else {
            f32::from_be_bytes(arr)
        });
    }
    // Flip from bottom-up storage to our top-down row order.
    let lattice = ErpLattice::new(h.width, h.height)?;
    let mut data = vec![0.0f32; count];
    let row_len = h.width * h.channels;
    for v in 0..h.height {
        let src = (h.height - 1 - v) * row_len;
        data[v * row_len..(v + 1) * row_len].copy_from_slice(&raw[src..src + row_len]);
    }
    Ok((lattice, data))
}

fn write_samples(path: &Path, lattice: ErpLattice, channels: usize, data: &[f32]) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    let magic = if channels == 1 { "Pf" } else { "PF" };
    write!(out, "{magic}\n{} {}\n-1.0\n", lattice.width(), lattice.height())?;
    let row_len = lattice.width() * channels;
    for v in (0..lattice.height()).rev() {
        for x in &data[v * row_len..(v + 1) * row_len] {
            out.write_all(&x.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a 1-channel PFM into a scalar field (f32 widened to f64).
pub fn read_scalar(path: &Path) -> Result<ScalarField> {
    let (lattice, data) = read_samples(path, 1)?;
    ScalarField::from_vec(lattice, data.into_iter().map(f64::from).collect())
}

/// Writes a scalar field as 1-channel little-endian PFM (f64 narrowed to f32).
pub fn write_scalar(path: &Path, field: &ScalarField) -> Result<()> {
    let data: Vec<f32> = field.data().iter().map(|&x| x as f32).collect();
    write_samples(path, field.lattice(), 1, &data)
}

/// Reads a 3-channel PFM into a vector field.
pub fn read_vector(path: &Path) -> Result<VectorField> {
    let (lattice, data) = read_samples(path, 3)?;
    let vecs = data
        .chunks_exact(3)
        .map(|c| vec3(c[0] as f64, c[1] as f64, c[2] as f64))
        .collect();
    VectorField::from_vec(lattice, vecs)
}

/// Writes a vector field as 3-channel little-endian PFM.
pub fn write_vector(path: &Path, field: &VectorField) -> Result<()> {
    let mut data = Vec::with_capacity(field.data().len() * 3);
    for v in field.data() {
        data.push(v.x as f32);
        data.push(v.y as f32);
        data.push(v.z as f32);
    }
    write_samples(path, field.lattice(), 3, &data)
}
