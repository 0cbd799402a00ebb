//! Rig configuration JSON: a lossless schema struct plus conversion to the
//! validated geometric type.
//!
//! The schema struct stores exactly the numbers from the file, so a
//! read-then-write cycle reproduces the bytes; the matrix form is derived
//! on demand.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::Rotation3;
use crate::rig::{ReferenceView, RigConfig};
use crate::sphere::ErpLattice;

/// On-disk rig schema. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigSpec {
    pub baseline_m: f64,
    /// Unit quaternion (w, x, y, z) for the world-to-rig rotation.
    pub rotation_wxyz: [f64; 4],
    pub width: usize,
    pub height: usize,
    #[serde(default)]
    pub reference: ReferenceView,
}

impl RigSpec {
    pub fn from_config(config: &RigConfig) -> RigSpec {
        RigSpec {
            baseline_m: config.baseline_m(),
            rotation_wxyz: config.world_to_rig().to_quaternion_wxyz(),
            width: config.lattice().width(),
            height: config.lattice().height(),
            reference: config.reference(),
        }
    }

    pub fn to_config(&self) -> Result<RigConfig> {
        if !self.baseline_m.is_finite() || self.baseline_m <= 0.0 {
            return Err(Error::Format(format!(
                "baseline_m must be positive, got {}",
                self.baseline_m
            )));
        }
        let rotation = Rotation3::from_quaternion_wxyz(self.rotation_wxyz)
            .map_err(|e| Error::Format(format!("rotation_wxyz: {e}")))?;
        let lattice = ErpLattice::new(self.width, self.height)
            .map_err(|e| Error::Format(format!("width/height: {e}")))?;
        RigConfig::new(self.baseline_m, rotation, lattice, self.reference)
    }
}

pub fn read(path: &Path) -> Result<RigSpec> {
    let text = fs::read_to_string(path)?;
    let spec: RigSpec = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    // Surface semantic problems at read time, not first use.
    spec.to_config()?;
    Ok(spec)
}

pub fn write(path: &Path, spec: &RigSpec) -> Result<()> {
    let mut text = serde_json::to_string_pretty(spec)
        .map_err(|e| Error::Format(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn spec() -> RigSpec {
        let rot = Rotation3::about_z(0.7) * Rotation3::about_x(0.3);
        let lattice = ErpLattice::new(64, 32).unwrap();
        let config = RigConfig::new(0.25, rot, lattice, ReferenceView::Bottom).unwrap();
        RigSpec::from_config(&config)
    }

    #[test]
    fn write_read_round_trip_is_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("rig.json");
        let s = spec();
        write(&path, &s).unwrap();
        let back = read(&path).unwrap();
        assert_eq!(back, s);
        // Writing what was read reproduces the file byte for byte.
        let first = fs::read(&path).unwrap();
        write(&path, &back).unwrap();
        assert_eq!(fs::read(&path).unwrap(), first);
    }

    #[test]
    fn config_round_trip_preserves_geometry() {
        let s = spec();
        let config = s.to_config().unwrap();
        assert_eq!(config.baseline_m(), 0.25);
        assert_eq!(config.lattice().width(), 64);
        let again = RigSpec::from_config(&config);
        for i in 0..4 {
            assert!((again.rotation_wxyz[i] - s.rotation_wxyz[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn negative_baseline_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("rig.json");
        fs::write(
            &path,
            r#"{"baseline_m": -1.0, "rotation_wxyz": [1,0,0,0], "width": 8, "height": 4}"#,
        )
        .unwrap();
        let err = read(&path).unwrap_err();
        assert!(err.to_string().contains("baseline_m"), "{err}");
    }

    #[test]
    fn missing_rotation_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("rig.json");
        fs::write(&path, r#"{"baseline_m": 0.2, "width": 8, "height": 4}"#).unwrap();
        let err = read(&path).unwrap_err();
        assert!(err.to_string().contains("rotation_wxyz"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("rig.json");
        fs::write(
            &path,
            r#"{"baseline_m": 0.2, "rotation_wxyz": [1,0,0,0], "width": 8, "height": 4, "extra": 1}"#,
        )
        .unwrap();
        let err = read(&path).unwrap_err();
        assert!(err.to_string().contains("extra"), "{err}");
    }

    #[test]
    fn non_unit_quaternion_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("rig.json");
        fs::write(
            &path,
            r#"{"baseline_m": 0.2, "rotation_wxyz": [2,0,0,0], "width": 8, "height": 4}"#,
        )
        .unwrap();
        let err = read(&path).unwrap_err();
        assert!(err.to_string().contains("rotation_wxyz"), "{err}");
    }

    #[test]
    fn reference_defaults_to_bottom() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("rig.json");
        fs::write(
            &path,
            r#"{"baseline_m": 0.2, "rotation_wxyz": [1.0,0.0,0.0,0.0], "width": 8, "height": 4}"#,
        )
        .unwrap();
        assert_eq!(read(&path).unwrap().reference, ReferenceView::Bottom);
    }
}
