//! Heading-aligned normal representation, normal estimation from depth, and
//! angular-error utilities.
//!
//! The heading-aligned frame of a pixel at longitude `alpha` is the camera
//! frame yawed by `alpha` about the vertical axis, so expressing a normal in
//! it applies the inverse rotation:
//!
//! ```text
//! n_HA = [  cos(a)  sin(a)  0 ]        n_raw = [ cos(a) -sin(a)  0 ]
//!        [ -sin(a)  cos(a)  0 ] n_raw          [ sin(a)  cos(a)  0 ] n_HA
//!        [    0       0     1 ]                [   0       0     1 ]
//! ```
//!
//! This direction is forced by the defining property of the representation:
//! yawing the camera by exactly k columns must leave the heading-aligned map
//! a pure k-column shift of the original.

use crate::disparity::DepthMap;
use crate::error::{Error, Result};
use crate::field::{Mask, ScalarField, VectorField};
use crate::math::{vec3, Vec3};
use crate::sphere::{pixel_to_dir, ErpLattice};

/// Coordinate frame a normal map is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalFrame {
    Camera,
    HeadingAligned,
}

const NORMAL_UNIT_TOL: f64 = 1e-6;

/// Per-pixel unit normals with a frame tag and validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalMap {
    vectors: VectorField,
    frame: NormalFrame,
    mask: Mask,
}

impl NormalMap {
    pub fn new(vectors: VectorField, frame: NormalFrame, mask: Mask) -> Result<NormalMap> {
        let lat = vectors.lattice();
        if mask.lattice() != lat {
            return Err(Error::Usage("mask lattice does not match vectors".into()));
        }
        for v in 0..lat.height() {
            for u in 0..lat.width() {
                if mask.get(u, v) {
                    let n = vectors.get(u, v).norm();
                    if (n - 1.0).abs() > NORMAL_UNIT_TOL {
                        return Err(Error::Domain(format!(
                            "normal at ({u}, {v}) is not unit: |n| = {n}"
                        )));
                    }
                }
            }
        }
        Ok(NormalMap {
            vectors,
            frame,
            mask,
        })
    }

    pub fn vectors(&self) -> &VectorField {
        &self.vectors
    }

    pub fn frame(&self) -> NormalFrame {
        self.frame
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn lattice(&self) -> ErpLattice {
        self.vectors.lattice()
    }

    /// Rewrites camera-frame normals in each pixel's heading-aligned frame.
    pub fn to_heading_aligned(&self) -> Result<NormalMap> {
        if self.frame != NormalFrame::Camera {
            return Err(Error::Usage(
                "to_heading_aligned expects a camera-frame map".into(),
            ));
        }
        Ok(self.rotate_per_column(NormalFrame::HeadingAligned, |c, s, n| {
            vec3(c * n.x + s * n.y, -s * n.x + c * n.y, n.z)
        }))
    }

    /// Inverse of [`NormalMap::to_heading_aligned`].
    pub fn from_heading_aligned(&self) -> Result<NormalMap> {
        if self.frame != NormalFrame::HeadingAligned {
            return Err(Error::Usage(
                "from_heading_aligned expects a heading-aligned map".into(),
            ));
        }
        Ok(self.rotate_per_column(NormalFrame::Camera, |c, s, n| {
            vec3(c * n.x - s * n.y, s * n.x + c * n.y, n.z)
        }))
    }

    fn rotate_per_column(
        &self,
        frame: NormalFrame,
        apply: impl Fn(f64, f64, Vec3) -> Vec3,
    ) -> NormalMap {
        let lat = self.lattice();
        let trig: Vec<(f64, f64)> = (0..lat.width())
            .map(|u| {
                let a = lat.alpha_of_u(u as f64);
                (a.cos(), a.sin())
            })
            .collect();
        let mut vectors = self.vectors.clone();
        for v in 0..lat.height() {
            for u in 0..lat.width() {
                let (c, s) = trig[u];
                vectors.set(u, v, apply(c, s, self.vectors.get(u, v)));
            }
        }
        NormalMap {
            vectors,
            frame,
            mask: self.mask.clone(),
        }
    }
}

/// Per-pixel angle between two normal maps, radians; NaN where either map is
/// invalid. The maps must share frame and lattice.
pub fn angular_error(a: &NormalMap, b: &NormalMap) -> Result<ScalarField> {
    if a.frame() != b.frame() {
        return Err(Error::Usage("normal maps use different frames".into()));
    }
    let lat = a.lattice();
    if b.lattice() != lat {
        return Err(Error::Usage("normal maps use different lattices".into()));
    }
    Ok(ScalarField::from_fn(lat, |u, v| {
        if a.mask().get(u, v) && b.mask().get(u, v) {
            a.vectors().get(u, v).dot(b.vectors().get(u, v)).clamp(-1.0, 1.0).acos()
        } else {
            f64::NAN
        }
    }))
}

/// Estimates camera-frame normals by lifting depth to 3D and crossing two
/// tangent finite differences over the 3x3 neighborhood (circular in
/// longitude). Normals are oriented toward the camera. Pole rows and pixels
/// with fewer than 3 valid axis neighbors are invalid.
pub fn normals_from_depth(depth: &DepthMap) -> Result<NormalMap> {
    let lat = depth.lattice();
    let point_at = |u: usize, v: usize| -> Option<Vec3> {
        if !depth.mask().get(u, v) {
            return None;
        }
        let dir = pixel_to_dir(lat, u as f64, v as f64)
            .expect("integer pixel rows are always in range");
        Some(dir.vec() * depth.values().get(u, v))
    };
    let mut vectors = VectorField::new_filled(lat, vec3(f64::NAN, f64::NAN, f64::NAN));
    let mut mask = Mask::new_filled(lat, false);
    for v in 1..lat.height().saturating_sub(1) {
        for u in 0..lat.width() {
            let Some(center) = point_at(u, v) else {
                continue;
            };
            let left = point_at(lat.wrap_u(u as isize - 1), v);
            let right = point_at(lat.wrap_u(u as isize + 1), v);
            let up = point_at(u, v - 1);
            let down = point_at(u, v + 1);
            let valid_neighbors = [left, right, up, down]
                .iter()
                .filter(|n| n.is_some())
                .count();
            if valid_neighbors < 3 {
                continue;
            }
            let tangent = |neg: Option<Vec3>, pos: Option<Vec3>| match (neg, pos) {
                (Some(a), Some(b)) => Some(b - a),
                (Some(a), None) => Some(center - a),
                (None, Some(b)) => Some(b - center),
                (None, None) => None,
            };
            let (Some(tu), Some(tv)) = (tangent(left, right), tangent(up, down)) else {
                continue;
            };
            let cross = tu.cross(tv);
            let norm = cross.norm();
            if !(norm > 0.0) || !norm.is_finite() {
                continue;
            }
            let mut n = cross / norm;
            // Orient toward the camera: the view ray is center/|center|.
            if n.dot(center) > 0.0 {
                n = -n;
            }
            vectors.set(u, v, n);
            mask.set(u, v, true);
        }
    }
    NormalMap::new(vectors, NormalFrame::Camera, mask)
}
