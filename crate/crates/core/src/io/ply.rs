//! PLY point-cloud writer (ascii and binary little-endian) plus a reader
//! used as the round-trip fixture.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::disparity::CloudPoint;
use crate::error::{Error, Result};
use crate::math::vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyEncoding {
    Ascii,
    BinaryLe,
}

/// Writes points as x,y,z float32 plus red,green,blue uchar vertices.
pub fn write_ply(path: &Path, points: &[CloudPoint], encoding: PlyEncoding) -> Result<()> {
    for p in points {
        if !p.position.is_finite() {
            return Err(Error::Domain(format!(
                "point coordinates must be finite, got ({}, {}, {})",
                p.position.x, p.position.y, p.position.z
            )));
        }
    }
    let mut out = BufWriter::new(fs::File::create(path)?);
    let format = match encoding {
        PlyEncoding::Ascii => "ascii",
        PlyEncoding::BinaryLe => "binary_little_endian",
    };
    write!(
        out,
        "ply\nformat {format} 1.0\nelement vertex {}\n\
         property float x\nproperty float y\nproperty float z\n\
         property uchar red\nproperty uchar green\nproperty uchar blue\n\
         end_header\n",
        points.len()
    )?;
    for p in points {
        let (x, y, z) = (p.position.x as f32, p.position.y as f32, p.position.z as f32);
        match encoding {
            PlyEncoding::Ascii => {
                writeln!(out, "{x} {y} {z} {} {} {}", p.color[0], p.color[1], p.color[2])?;
            }
            PlyEncoding::BinaryLe => {
                out.write_all(&x.to_le_bytes())?;
                out.write_all(&y.to_le_bytes())?;
                out.write_all(&z.to_le_bytes())?;
                out.write_all(&p.color)?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a PLY written by [`write_ply`] (the exact vertex schema above).
pub fn read_ply(path: &Path) -> Result<Vec<CloudPoint>> {
    let bytes = fs::read(path)?;
    let header_end = find_header_end(&bytes)?;
    let header = std::str::from_utf8(&bytes[..header_end])
        .map_err(|_| Error::Format("non-ASCII PLY header".into()))?;
    let mut encoding = None;
    let mut count = None;
    for line in header.lines() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        match fields.as_slice() {
            ["format", "ascii", "1.0"] => encoding = Some(PlyEncoding::Ascii),
            ["format", "binary_little_endian", "1.0"] => encoding = Some(PlyEncoding::BinaryLe),
            ["element", "vertex", n] => {
                count = Some(n.parse::<usize>().map_err(|_| {
                    Error::Format(format!("bad vertex count {n:?}"))
                })?);
            }
            _ => {}
        }
    }
    let encoding = encoding.ok_or_else(|| Error::Format("PLY header lacks format".into()))?;
    let count = count.ok_or_else(|| Error::Format("PLY header lacks vertex element".into()))?;
    let body = &bytes[header_end..];
    let mut points = Vec::with_capacity(count);
    match encoding {
        PlyEncoding::Ascii => {
            let text = std::str::from_utf8(body)
                .map_err(|_| Error::Format("non-ASCII PLY body".into()))?;
            for line in text.lines().take(count) {
                let f: Vec<&str> = line.split_whitespace().collect();
                if f.len() != 6 {
                    return Err(Error::Format(format!("bad PLY vertex line {line:?}")));
                }
                let num = |s: &str| {
                    s.parse::<f32>()
                        .map_err(|_| Error::Format(format!("bad PLY float {s:?}")))
                };
                let byte = |s: &str| {
                    s.parse::<u8>()
                        .map_err(|_| Error::Format(format!("bad PLY color {s:?}")))
                };
                points.push(CloudPoint {
                    position: vec3(num(f[0])? as f64, num(f[1])? as f64, num(f[2])? as f64),
                    color: [byte(f[3])?, byte(f[4])?, byte(f[5])?],
                });
            }
        }
        PlyEncoding::BinaryLe => {
            const STRIDE: usize = 15; // 3 * f32 + 3 * u8
            if body.len() < count * STRIDE {
                return Err(Error::Format("PLY body shorter than vertex count".into()));
            }
            for rec in body.chunks_exact(STRIDE).take(count) {
                let f = |i: usize| {
                    f32::from_le_bytes([rec[i], rec[i + 1], rec[i + 2], rec[i + 3]]) as f64
                };
                points.push(CloudPoint {
                    position: vec3(f(0), f(4), f(8)),
                    color: [rec[12], rec[13], rec[14]],
                });
            }
        }
    }
    if points.len() != count {
        return Err(Error::Format(format!(
            "PLY body holds {} vertices, header says {count}",
            points.len()
        )));
    }
    Ok(points)
}

fn find_header_end(bytes: &[u8]) -> Result<usize> {
    const MARK: &[u8] = b"end_header\n";
    bytes
        .windows(MARK.len())
        .position(|w| w == MARK)
        .map(|p| p + MARK.len())
        .ok_or_else(|| Error::Format("PLY header has no end_header".into()))
}
