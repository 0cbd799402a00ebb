//! Two-camera top-bottom rig geometry.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{Rotation3, Vec3};
use crate::sphere::ErpLattice;

/// Which view disparity and depth are defined on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceView {
    #[default]
    Bottom,
    Top,
}

impl ReferenceView {
    pub fn opposite(&self) -> ReferenceView {
        match self {
            ReferenceView::Bottom => ReferenceView::Top,
            ReferenceView::Top => ReferenceView::Bottom,
        }
    }
}

/// Geometry of a vertically displaced stereo pair: both cameras share the rig
/// orientation; the top camera center sits `baseline_m` along the rig up-axis
/// from the bottom camera center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigConfig {
    baseline_m: f64,
    /// World-to-rig rotation.
    rotation: Rotation3,
    lattice: ErpLattice,
    reference: ReferenceView,
}

impl RigConfig {
    pub fn new(
        baseline_m: f64,
        rotation: Rotation3,
        lattice: ErpLattice,
        reference: ReferenceView,
    ) -> Result<RigConfig> {
        if !baseline_m.is_finite() || baseline_m <= 0.0 {
            return Err(Error::Domain(format!(
                "baseline must be positive and finite, got {baseline_m}"
            )));
        }
        Ok(RigConfig {
            baseline_m,
            rotation,
            lattice,
            reference,
        })
    }

    pub fn baseline_m(&self) -> f64 {
        self.baseline_m
    }

    /// World-to-rig rotation.
    pub fn world_to_rig(&self) -> Rotation3 {
        self.rotation
    }

    /// Rig-to-world rotation (transpose of the stored world-to-rig matrix).
    pub fn rig_to_world(&self) -> Rotation3 {
        self.rotation.transpose()
    }

    pub fn lattice(&self) -> ErpLattice {
        self.lattice
    }

    pub fn reference(&self) -> ReferenceView {
        self.reference
    }

    /// The rig up-axis (direction from bottom camera to top camera) in world
    /// coordinates.
    pub fn up_in_world(&self) -> Vec3 {
        self.rig_to_world().apply(Vec3::Z)
    }

    /// Offset from the bottom camera center to the top camera center, world
    /// coordinates.
    pub fn top_offset_world(&self) -> Vec3 {
        self.up_in_world() * self.baseline_m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    fn lat() -> ErpLattice {
        ErpLattice::new(8, 4).unwrap()
    }

    #[test]
    fn rejects_nonpositive_baseline() {
        assert!(RigConfig::new(0.0, Rotation3::identity(), lat(), ReferenceView::Bottom).is_err());
        assert!(RigConfig::new(-0.1, Rotation3::identity(), lat(), ReferenceView::Bottom).is_err());
    }

    #[test]
    fn upright_rig_points_up() {
        let rig = RigConfig::new(0.25, Rotation3::identity(), lat(), ReferenceView::Bottom).unwrap();
        let up = rig.up_in_world();
        assert_relative_eq!(up.z, 1.0);
        assert_relative_eq!(rig.top_offset_world().z, 0.25);
    }

    #[test]
    fn rolled_rig_tilts_the_baseline() {
        // World-to-rig roll of 90 degrees about x: rig-to-world is the
        // transpose, which carries rig +z to world +y.
        let rot = Rotation3::about_x(FRAC_PI_2);
        let rig = RigConfig::new(0.1, rot, lat(), ReferenceView::Bottom).unwrap();
        let up = rig.up_in_world();
        assert_relative_eq!(up.x, 0.0, epsilon = 1e-15);
        assert_relative_eq!(up.y, 1.0, epsilon = 1e-15);
        assert_relative_eq!(up.z, 0.0, epsilon = 1e-15);
    }
}
