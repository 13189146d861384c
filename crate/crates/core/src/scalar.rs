//! Scalar abstraction shared by the simulator, controller, and flow network.
//!
//! Everything numeric in the crate is generic over [`Scalar`], which is
//! implemented for `f32` and `f64`. Text encodings rely on `Display`/`FromStr`
//! producing the shortest representation that parses back to the same bits.

use std::fmt::{Debug, Display};
use std::str::FromStr;

use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point scalar: `f32` or `f64`.
pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + num_traits::NumAssign
    + std::iter::Sum
    + Default
    + Debug
    + Display
    + FromStr
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Short tag used in file headers.
    const TAG: &'static str;

    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn from_u64_lossy(n: u64) -> Self {
        Self::from_u64(n).expect("u64 representable")
    }

    #[inline]
    fn half() -> Self {
        Self::lit(0.5)
    }

    #[inline]
    fn two() -> Self {
        Self::one() + Self::one()
    }
}

impl Scalar for f32 {
    const TAG: &'static str = "f32";
}

impl Scalar for f64 {
    const TAG: &'static str = "f64";
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roundtrip<T: Scalar>(x: T) -> T {
        x.to_string().parse::<T>().ok().unwrap()
    }

    #[test]
    fn display_roundtrips_bits() {
        for &x in &[0.1f64, 1.0 / 3.0, 9.81 * 0.04, -2.5e-310, f64::MAX] {
            assert_eq!(roundtrip(x).to_bits(), x.to_bits());
        }
        for &x in &[0.1f32, 1.0 / 3.0, 1e-40] {
            assert_eq!(roundtrip(x).to_bits(), x.to_bits());
        }
    }

    #[test]
    fn literals() {
        assert_eq!(f32::lit(0.25), 0.25f32);
        assert_eq!(f64::two(), 2.0);
        assert_eq!(<f64 as Scalar>::TAG, "f64");
    }
}
