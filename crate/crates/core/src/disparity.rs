//! Spherical disparity model for a vertically displaced camera pair:
//! forward and inverse mappings between radial depth and angular disparity,
//! unit conversion, point-cloud lifting, and ground-truth disparity with
//! occlusion masking.
//!
//! The polar angle entering the model, `theta_b`, is measured from the
//! baseline axis pointing away from the other camera. For the bottom
//! (default) reference view that axis is straight down, so an image row at
//! polar angle `theta_row` (from up) has `theta_b = pi - theta_row`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Mask, ScalarField, VectorField};
use crate::math::Vec3;
use crate::rig::{ReferenceView, RigConfig};
use crate::scene::{raycast, SceneDescription};
use crate::sphere::{pixel_to_dir, ErpLattice};

/// Unit a disparity map is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DisparityUnit {
    Radians,
    Pixels,
}

/// Angular disparity between the two views, d = theta_row_other - theta_row_ref.
///
/// `d = atan2( sin(theta_b), r_b/B + cos(theta_b) )`.
///
/// Points exactly on the baseline axis (`theta_b` = 0 or pi) have no defined
/// parallax direction; they return 0 (degenerate, not an error).
pub fn disparity_from_depth(r_b: f64, theta_b: f64, baseline: f64) -> Result<f64> {
    if !(r_b > 0.0) || !r_b.is_finite() {
        return Err(Error::Domain(format!("depth must be positive, got {r_b}")));
    }
    if !(baseline > 0.0) || !baseline.is_finite() {
        return Err(Error::Domain(format!(
            "baseline must be positive, got {baseline}"
        )));
    }
    if !(0.0..=PI).contains(&theta_b) {
        return Err(Error::Domain(format!(
            "polar angle must lie in [0, pi], got {theta_b}"
        )));
    }
    if theta_b == 0.0 || theta_b == PI {
        return Ok(0.0);
    }
    Ok(theta_b.sin().atan2(r_b / baseline + theta_b.cos()))
}

/// Inverse of [`disparity_from_depth`]:
/// `r_b = B * (sin(theta_b)/tan(d) - cos(theta_b)) = B * sin(theta_b - d)/sin(d)`.
pub fn depth_from_disparity(d: f64, theta_b: f64, baseline: f64) -> Result<f64> {
    if !(d > 0.0) || !d.is_finite() || d >= PI {
        return Err(Error::Domain(format!(
            "disparity must lie in (0, pi), got {d}"
        )));
    }
    if !(baseline > 0.0) || !baseline.is_finite() {
        return Err(Error::Domain(format!(
            "baseline must be positive, got {baseline}"
        )));
    }
    let r = baseline * (theta_b - d).sin() / d.sin();
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::Geometry(format!(
            "disparity {d} at polar angle {theta_b} implies nonpositive range {r}"
        )));
    }
    Ok(r)
}

/// Scalar disparity field with a unit tag and validity mask.
///
/// Valid entries are finite, nonnegative, and below pi radians (or the
/// pixel-unit equivalent, the image height).
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityMap {
    values: ScalarField,
    unit: DisparityUnit,
    mask: Mask,
}

impl DisparityMap {
    pub fn new(values: ScalarField, unit: DisparityUnit, mask: Mask) -> Result<DisparityMap> {
        let lat = values.lattice();
        if mask.lattice() != lat {
            return Err(Error::Usage("mask lattice does not match values".into()));
        }
        let limit = match unit {
            DisparityUnit::Radians => PI,
            DisparityUnit::Pixels => lat.height() as f64,
        };
        for v in 0..lat.height() {
            for u in 0..lat.width() {
                if mask.get(u, v) {
                    let d = values.get(u, v);
                    if !d.is_finite() || d < 0.0 || d >= limit {
                        return Err(Error::Domain(format!(
                            "disparity {d} at ({u}, {v}) outside [0, {limit})"
                        )));
                    }
                }
            }
        }
        Ok(DisparityMap { values, unit, mask })
    }

    pub fn values(&self) -> &ScalarField {
        &self.values
    }

    pub fn unit(&self) -> DisparityUnit {
        self.unit
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn lattice(&self) -> ErpLattice {
        self.values.lattice()
    }

    /// Converts to the requested unit (`d_px = d_rad * height / pi`); returns
    /// an unchanged clone when the units already match.
    pub fn convert_to(&self, to: DisparityUnit) -> DisparityMap {
        if self.unit == to {
            return self.clone();
        }
        let h = self.lattice().height() as f64;
        let factor = match to {
            DisparityUnit::Pixels => h / PI,
            DisparityUnit::Radians => PI / h,
        };
        let mut values = self.values.clone();
        for x in values.data_mut() {
            *x *= factor;
        }
        DisparityMap {
            values,
            unit: to,
            mask: self.mask.clone(),
        }
    }

    /// Lifts every valid pixel back to radial depth via the inverse model.
    /// Pixels whose disparity cannot be inverted become invalid.
    pub fn to_depth(&self, rig: &RigConfig) -> Result<DepthMap> {
        if self.lattice() != rig.lattice() {
            return Err(Error::Usage("disparity lattice does not match rig".into()));
        }
        let rad = self.convert_to(DisparityUnit::Radians);
        let lat = rad.lattice();
        let mut depth = ScalarField::new_filled(lat, f64::NAN);
        let mut mask = Mask::new_filled(lat, false);
        for v in 0..lat.height() {
            let theta_b = baseline_polar(lat.theta_of_v(v as f64), rig.reference());
            for u in 0..lat.width() {
                if !rad.mask.get(u, v) {
                    continue;
                }
                if let Ok(r) = depth_from_disparity(rad.values.get(u, v), theta_b, rig.baseline_m())
                {
                    depth.set(u, v, r);
                    mask.set(u, v, true);
                }
            }
        }
        DepthMap::new(depth, mask)
    }
}

/// Radial distance field (meters from the reference camera center).
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    values: ScalarField,
    mask: Mask,
}

impl DepthMap {
    pub fn new(values: ScalarField, mask: Mask) -> Result<DepthMap> {
        let lat = values.lattice();
        if mask.lattice() != lat {
            return Err(Error::Usage("mask lattice does not match values".into()));
        }
        for v in 0..lat.height() {
            for u in 0..lat.width() {
                if mask.get(u, v) {
                    let r = values.get(u, v);
                    if !r.is_finite() || r <= 0.0 {
                        return Err(Error::Domain(format!(
                            "depth {r} at ({u}, {v}) must be positive and finite"
                        )));
                    }
                }
            }
        }
        Ok(DepthMap { values, mask })
    }

    pub fn values(&self) -> &ScalarField {
        &self.values
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn lattice(&self) -> ErpLattice {
        self.values.lattice()
    }

    /// Applies the forward model per pixel. Degenerate baseline-axis pixels
    /// keep their 0 disparity but stay valid (pixel centers never reach the
    /// exact poles).
    pub fn to_disparity(&self, rig: &RigConfig) -> Result<DisparityMap> {
        if self.lattice() != rig.lattice() {
            return Err(Error::Usage("depth lattice does not match rig".into()));
        }
        let lat = self.lattice();
        let mut disp = ScalarField::new_filled(lat, f64::NAN);
        let mut mask = Mask::new_filled(lat, false);
        for v in 0..lat.height() {
            let theta_b = baseline_polar(lat.theta_of_v(v as f64), rig.reference());
            for u in 0..lat.width() {
                if !self.mask.get(u, v) {
                    continue;
                }
                let d = disparity_from_depth(self.values.get(u, v), theta_b, rig.baseline_m())?;
                disp.set(u, v, d);
                mask.set(u, v, true);
            }
        }
        DisparityMap::new(disp, DisparityUnit::Radians, mask)
    }
}

/// Polar angle from the baseline axis pointing away from the non-reference
/// camera, for an image row at polar angle `theta_row` (measured from up).
fn baseline_polar(theta_row: f64, reference: ReferenceView) -> f64 {
    match reference {
        ReferenceView::Bottom => PI - theta_row,
        ReferenceView::Top => theta_row,
    }
}

/// A lifted point with an 8-bit color (white when no color field is given).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CloudPoint {
    pub position: Vec3,
    pub color: [u8; 3],
}

/// Lifts each valid pixel to a 3D point in world coordinates: the ray
/// direction scaled by the inverted depth, rotated by the rig-to-world
/// rotation (origin at the reference camera center).
pub fn pointcloud_from_disparity(
    disp: &DisparityMap,
    rig: &RigConfig,
    colors: Option<&VectorField>,
) -> Result<Vec<CloudPoint>> {
    let lat = disp.lattice();
    if let Some(c) = colors {
        if c.lattice() != lat {
            return Err(Error::Usage("color lattice does not match disparity".into()));
        }
    }
    let rad = disp.convert_to(DisparityUnit::Radians);
    let to_world = rig.rig_to_world();
    let mut points = Vec::new();
    for v in 0..lat.height() {
        let theta_b = baseline_polar(lat.theta_of_v(v as f64), rig.reference());
        for u in 0..lat.width() {
            if !rad.mask().get(u, v) {
                continue;
            }
            let Ok(r) = depth_from_disparity(rad.values().get(u, v), theta_b, rig.baseline_m())
            else {
                continue;
            };
            let dir = pixel_to_dir(lat, u as f64, v as f64)
                .expect("integer pixel rows are always in range");
            let position = to_world.apply(dir.vec() * r);
            let color = match colors {
                Some(c) => {
                    let rgb = c.get(u, v);
                    [quantize(rgb.x), quantize(rgb.y), quantize(rgb.z)]
                }
                None => [255, 255, 255],
            };
            points.push(CloudPoint { position, color });
        }
    }
    Ok(points)
}

fn quantize(x: f64) -> u8 {
    (x * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Relative depth disagreement above which the other view is considered to
/// see a different surface.
pub const OCCLUSION_REL_THRESHOLD: f64 = 0.01;

/// Ground-truth disparity of the reference view plus an occlusion mask
/// (true = the corresponding ray from the other camera hits a different
/// surface). The reference (bottom) camera sits at `position`; the other
/// camera is displaced by the rig baseline.
pub fn gt_disparity(
    scene: &SceneDescription,
    rig: &RigConfig,
    position: Vec3,
) -> Result<(DisparityMap, Mask)> {
    scene.validate()?;
    let lat = rig.lattice();
    let to_world = rig.rig_to_world();
    let offset = rig.top_offset_world();
    let (ref_pos, other_pos) = match rig.reference() {
        ReferenceView::Bottom => (position, position + offset),
        ReferenceView::Top => (position + offset, position),
    };
    let mut disp = ScalarField::new_filled(lat, f64::NAN);
    let mut valid = Mask::new_filled(lat, false);
    let mut occluded = Mask::new_filled(lat, false);
    for v in 0..lat.height() {
        let theta_b = baseline_polar(lat.theta_of_v(v as f64), rig.reference());
        for u in 0..lat.width() {
            let dir_cam = pixel_to_dir(lat, u as f64, v as f64)
                .expect("integer pixel rows are always in range");
            let dir_world = to_world.apply(dir_cam.vec());
            let Some(hit) = raycast(scene, ref_pos, dir_world) else {
                continue;
            };
            disp.set(u, v, disparity_from_depth(hit.t, theta_b, rig.baseline_m())?);
            valid.set(u, v, true);
            let to_point = hit.point - other_pos;
            let r_other = to_point.norm();
            let blocked = match raycast(scene, other_pos, to_point / r_other) {
                Some(h2) => (h2.t - r_other).abs() > OCCLUSION_REL_THRESHOLD * r_other,
                None => true,
            };
            occluded.set(u, v, blocked);
        }
    }
    Ok((DisparityMap::new(disp, DisparityUnit::Radians, valid)?, occluded))
}
