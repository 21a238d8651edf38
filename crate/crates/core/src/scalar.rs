//! Scalar abstraction shared by every matrix type in the crate.
//!
//! Feature files carry either 32- or 64-bit little-endian floats. All distance
//! and similarity arithmetic is carried out in `f64` regardless of the storage
//! width, so the trait only needs lossless widening plus the byte codec used
//! by the array file format.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point element type of a [`FeatureMatrix`](crate::FeatureMatrix).
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Array-format type descriptor, e.g. `"<f8"`.
    const DESCR: &'static str;
    /// Width of one element in bytes.
    const WIDTH: usize;

    fn widen(self) -> f64;

    /// Narrowing conversion used when generating data directly at this width.
    fn narrow(value: f64) -> Self;

    fn write_le(self, out: &mut Vec<u8>);

    fn read_le(bytes: &[u8]) -> Self;
}

impl Scalar for f32 {
    const DESCR: &'static str = "<f4";
    const WIDTH: usize = 4;

    #[inline]
    fn widen(self) -> f64 {
        f64::from(self)
    }

    #[inline]
    fn narrow(value: f64) -> Self {
        value as f32
    }

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes.try_into().expect("4-byte slice"))
    }
}

impl Scalar for f64 {
    const DESCR: &'static str = "<f8";
    const WIDTH: usize = 8;

    #[inline]
    fn widen(self) -> f64 {
        self
    }

    #[inline]
    fn narrow(value: f64) -> Self {
        value
    }

    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }

    fn read_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes.try_into().expect("8-byte slice"))
    }
}
