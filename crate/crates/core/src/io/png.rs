//! 8-bit PNG helpers for RGB images, binary masks, and normal visualization.

use std::path::Path;

use image::{GrayImage, ImageFormat, ImageReader, RgbImage};

use crate::error::{Error, Result};
use crate::field::{Mask, VectorField};
use crate::math::vec3;
use crate::normals::NormalMap;
use crate::sphere::ErpLattice;

fn quantize(x: f64) -> u8 {
    (x * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Writes an RGB field (components in [0, 1]) as 8-bit PNG.
pub fn write_rgb(path: &Path, field: &VectorField) -> Result<()> {
    let lat = field.lattice();
    let mut img = RgbImage::new(lat.width() as u32, lat.height() as u32);
    for v in 0..lat.height() {
        for u in 0..lat.width() {
            let c = field.get(u, v);
            img.put_pixel(
                u as u32,
                v as u32,
                image::Rgb([quantize(c.x), quantize(c.y), quantize(c.z)]),
            );
        }
    }
    img.save_with_format(path, ImageFormat::Png)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Reads an 8-bit RGB PNG into a [0, 1] vector field.
pub fn read_rgb(path: &Path) -> Result<VectorField> {
    let img = ImageReader::open(path)?
        .decode()
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?
        .to_rgb8();
    let lat = ErpLattice::new(img.width() as usize, img.height() as usize)?;
    Ok(VectorField::from_fn(lat, |u, v| {
        let p = img.get_pixel(u as u32, v as u32);
        vec3(
            p.0[0] as f64 / 255.0,
            p.0[1] as f64 / 255.0,
            p.0[2] as f64 / 255.0,
        )
    }))
}

/// Writes a mask as 8-bit gray PNG: 255 where set, 0 elsewhere.
pub fn write_mask(path: &Path, mask: &Mask) -> Result<()> {
    let lat = mask.lattice();
    let mut img = GrayImage::new(lat.width() as u32, lat.height() as u32);
    for v in 0..lat.height() {
        for u in 0..lat.width() {
            img.put_pixel(
                u as u32,
                v as u32,
                image::Luma([if mask.get(u, v) { 255 } else { 0 }]),
            );
        }
    }
    img.save_with_format(path, ImageFormat::Png)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

/// Reads a gray PNG as a mask (any value above 127 counts as set).
pub fn read_mask(path: &Path) -> Result<Mask> {
    let img = ImageReader::open(path)?
        .decode()
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?
        .to_luma8();
    let lat = ErpLattice::new(img.width() as usize, img.height() as usize)?;
    Ok(Mask::from_fn(lat, |u, v| {
        img.get_pixel(u as u32, v as u32).0[0] > 127
    }))
}

/// Writes a normal map visualization using the (n + 1) / 2 encoding; invalid
/// pixels are black.
pub fn write_normal_visualization(path: &Path, normals: &NormalMap) -> Result<()> {
    let lat = normals.lattice();
    let vis = VectorField::from_fn(lat, |u, v| {
        if normals.mask().get(u, v) {
            (normals.vectors().get(u, v) + vec3(1.0, 1.0, 1.0)) * 0.5
        } else {
            vec3(0.0, 0.0, 0.0)
        }
    });
    write_rgb(path, &vis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use tempfile::tempdir;

    #[test]
    fn rgb_round_trip_at_8bit_precision() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("img.png");
        let lat = ErpLattice::new(8, 4).unwrap();
        let mut rng = SplitMix64::new(5);
        // Start from exactly representable 8-bit levels.
        let field = VectorField::from_fn(lat, |_, _| {
            vec3(
                rng.below(256) as f64 / 255.0,
                rng.below(256) as f64 / 255.0,
                rng.below(256) as f64 / 255.0,
            )
        });
        write_rgb(&path, &field).unwrap();
        let back = read_rgb(&path).unwrap();
        assert_eq!(back.data(), field.data());
    }

    #[test]
    fn mask_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("mask.png");
        let lat = ErpLattice::new(6, 3).unwrap();
        let mask = Mask::from_fn(lat, |u, v| (u + v) % 3 == 0);
        write_mask(&path, &mask).unwrap();
        assert_eq!(read_mask(&path).unwrap(), mask);
    }

    #[test]
    fn identical_inputs_produce_identical_bytes() {
        let dir = tempdir().unwrap();
        let (a, b) = (dir.path().join("a.png"), dir.path().join("b.png"));
        let lat = ErpLattice::new(16, 8).unwrap();
        let mut rng = SplitMix64::new(6);
        let field = VectorField::from_fn(lat, |_, _| {
            vec3(rng.next_f64(), rng.next_f64(), rng.next_f64())
        });
        write_rgb(&a, &field).unwrap();
        write_rgb(&b, &field).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }
}
