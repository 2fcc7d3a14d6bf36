use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Element type for tensors and merge arithmetic: `f32` or `f64`.
///
/// Storage and the per-entry results stay at the scalar's own width; sums
/// and products that feed a single output entry are carried in `f64` and
/// rounded once at the end.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    fn to_f64_lossless(self) -> f64 {
        // f32 -> f64 and f64 -> f64 are both exact.
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Round an `f64` to this scalar's width.
    fn from_f64_rounded(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).unwrap_or_else(Self::nan)
    }
}

impl<T> Scalar for T where
    T: Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn widening_is_exact() {
        let x = 0.1f32;
        assert_eq!(x.to_f64_lossless() as f32, x);
        assert_eq!(f32::from_f64_rounded(0.1f64), 0.1f32);
        assert_eq!(f64::from_f64_rounded(0.1f64), 0.1f64);
    }
}
