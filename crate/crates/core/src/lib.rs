//! Geometric core for top-bottom equirectangular stereo: spherical disparity
//! model, heading-aligned normals, synthetic scene generation with ground
//! truth, a census/semi-global matcher, metrics, and file I/O.

pub mod error;
pub mod eval;
pub mod field;
pub mod io;
pub mod matcher;
pub mod math;
pub mod disparity;
pub mod normals;
pub mod rig;
pub mod rng;
pub mod scene;
pub mod scenegen;
pub mod sphere;

pub use error::{Error, Result};
