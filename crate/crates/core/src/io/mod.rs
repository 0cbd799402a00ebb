//! Readers and writers for the artifact file formats: PFM float maps, PLY
//! point clouds, rig JSON, and 8-bit PNG images/masks.

pub mod pfm;
pub mod ply;
pub mod png;
pub mod rig_json;
