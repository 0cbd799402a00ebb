//! Row-major pixel grids over an ERP lattice: scalar fields (depth,
//! disparity, uncertainty), vector fields (RGB, normals), and validity masks.

use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::sphere::ErpLattice;

/// Common interface over [`ScalarField`] and [`VectorField`] so resampling
/// operations can be written once.
pub trait Field {
    type Value: Copy + PartialEq;

    fn lattice(&self) -> ErpLattice;
    fn get(&self, u: usize, v: usize) -> Self::Value;
    fn from_fn(lattice: ErpLattice, f: impl FnMut(usize, usize) -> Self::Value) -> Self
    where
        Self: Sized;
    /// Linear blend `a + t*(b - a)` used by bilinear sampling.
    fn lerp(a: Self::Value, b: Self::Value, t: f64) -> Self::Value;
}

fn index(lattice: ErpLattice, u: usize, v: usize) -> usize {
    assert!(
        u < lattice.width() && v < lattice.height(),
        "pixel ({u}, {v}) outside {}x{} lattice",
        lattice.width(),
        lattice.height()
    );
    v * lattice.width() + u
}

macro_rules! grid_common {
    ($name:ident, $value:ty) => {
        impl $name {
            pub fn new_filled(lattice: ErpLattice, value: $value) -> Self {
                Self {
                    lattice,
                    data: vec![value; lattice.len()],
                }
            }

            /// Wraps existing row-major data; length must equal width*height.
            pub fn from_vec(lattice: ErpLattice, data: Vec<$value>) -> Result<Self> {
                if data.len() != lattice.len() {
                    return Err(Error::Domain(format!(
                        "data length {} does not match {}x{} lattice",
                        data.len(),
                        lattice.width(),
                        lattice.height()
                    )));
                }
                Ok(Self { lattice, data })
            }

            pub fn from_fn(lattice: ErpLattice, mut f: impl FnMut(usize, usize) -> $value) -> Self {
                let mut data = Vec::with_capacity(lattice.len());
                for v in 0..lattice.height() {
                    for u in 0..lattice.width() {
                        data.push(f(u, v));
                    }
                }
                Self { lattice, data }
            }

            pub fn lattice(&self) -> ErpLattice {
                self.lattice
            }

            pub fn get(&self, u: usize, v: usize) -> $value {
                self.data[index(self.lattice, u, v)]
            }

            pub fn set(&mut self, u: usize, v: usize, value: $value) {
                self.data[index(self.lattice, u, v)] = value;
            }

            /// Access with circular wrap in u and clamp in v.
            pub fn get_wrapped(&self, u: isize, v: isize) -> $value {
                self.get(self.lattice.wrap_u(u), self.lattice.clamp_v(v))
            }

            pub fn data(&self) -> &[$value] {
                &self.data
            }

            pub fn data_mut(&mut self) -> &mut [$value] {
                &mut self.data
            }
        }
    };
}

/// Row-major grid of f64 samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    lattice: ErpLattice,
    data: Vec<f64>,
}

grid_common!(ScalarField, f64);

impl Field for ScalarField {
    type Value = f64;

    fn lattice(&self) -> ErpLattice {
        self.lattice
    }

    fn get(&self, u: usize, v: usize) -> f64 {
        ScalarField::get(self, u, v)
    }

    fn from_fn(lattice: ErpLattice, f: impl FnMut(usize, usize) -> f64) -> Self {
        ScalarField::from_fn(lattice, f)
    }

    fn lerp(a: f64, b: f64, t: f64) -> f64 {
        a + t * (b - a)
    }
}

/// Row-major grid of 3-vector samples.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    lattice: ErpLattice,
    data: Vec<Vec3>,
}

grid_common!(VectorField, Vec3);

impl Field for VectorField {
    type Value = Vec3;

    fn lattice(&self) -> ErpLattice {
        self.lattice
    }

    fn get(&self, u: usize, v: usize) -> Vec3 {
        VectorField::get(self, u, v)
    }

    fn from_fn(lattice: ErpLattice, f: impl FnMut(usize, usize) -> Vec3) -> Self {
        VectorField::from_fn(lattice, f)
    }

    fn lerp(a: Vec3, b: Vec3, t: f64) -> Vec3 {
        a + (b - a) * t
    }
}

/// Per-pixel validity mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    lattice: ErpLattice,
    data: Vec<bool>,
}

grid_common!(Mask, bool);

impl Mask {
    pub fn count_valid(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Pixelwise conjunction of two masks on the same lattice.
    pub fn and(&self, other: &Mask) -> Result<Mask> {
        if self.lattice != other.lattice {
            return Err(Error::Usage("mask lattices do not match".into()));
        }
        Ok(Mask {
            lattice: self.lattice,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| *a && *b)
                .collect(),
        })
    }
}

/// Circularly shifts columns: output(u, v) = input((u - k) mod width, v).
///
/// This is the pixel motion produced by a yaw of +2*pi*k/width.
pub fn shift_columns<F: Field>(field: &F, k: isize) -> F {
    let lat = field.lattice();
    F::from_fn(lat, |u, v| {
        field.get(lat.wrap_u(u as isize - k), v)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::vec3;

    fn lat4x2() -> ErpLattice {
        ErpLattice::new(4, 2).unwrap()
    }

    #[test]
    fn row_major_layout() {
        let f = ScalarField::from_fn(lat4x2(), |u, v| (v * 10 + u) as f64);
        assert_eq!(f.data()[5], 11.0); // v=1, u=1
        assert_eq!(f.get(3, 1), 13.0);
    }

    #[test]
    fn from_vec_checks_length() {
        assert!(ScalarField::from_vec(lat4x2(), vec![0.0; 7]).is_err());
        assert!(ScalarField::from_vec(lat4x2(), vec![0.0; 8]).is_ok());
    }

    #[test]
    fn wrapped_access_wraps_u_and_clamps_v() {
        let f = ScalarField::from_fn(lat4x2(), |u, v| (v * 10 + u) as f64);
        assert_eq!(f.get_wrapped(-1, 0), 3.0);
        assert_eq!(f.get_wrapped(4, 0), 0.0);
        assert_eq!(f.get_wrapped(0, -5), 0.0);
        assert_eq!(f.get_wrapped(0, 99), 10.0);
    }

    #[test]
    fn shift_columns_round_trips() {
        let f = ScalarField::from_fn(lat4x2(), |u, v| (v * 10 + u) as f64);
        let g = shift_columns(&shift_columns(&f, 3), -3);
        assert_eq!(f.data(), g.data());
        assert_eq!(shift_columns(&f, 1).get(1, 0), f.get(0, 0));
    }

    #[test]
    fn mask_and_counts() {
        let a = Mask::from_fn(lat4x2(), |u, _| u % 2 == 0);
        let b = Mask::from_fn(lat4x2(), |_, v| v == 0);
        let c = a.and(&b).unwrap();
        assert_eq!(c.count_valid(), 2);
    }

    #[test]
    fn vector_field_lerp() {
        let a = vec3(0.0, 0.0, 0.0);
        let b = vec3(1.0, 2.0, 4.0);
        let m = VectorField::lerp(a, b, 0.25);
        assert_eq!(m, vec3(0.25, 0.5, 1.0));
    }
}
