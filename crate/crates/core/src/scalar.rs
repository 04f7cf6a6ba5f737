//! Scalar abstraction shared by every kernel.
//!
//! The solver is written once against [`Real`] and instantiated for `f64`
//! (the default used by the front end) and `f32`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type the lattice kernels can run on.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Default + Debug + Display + Sum + Send + Sync + 'static
{
    /// Converts an `f64` constant into `Self`.
    #[inline(always)]
    fn lit(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("representable constant")
    }

    #[inline(always)]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Sum in fixed-size blocks so the result does not depend on how work was split.
pub fn block_sum<T: Real>(values: &[T]) -> T {
    use rayon::prelude::*;
    const BLOCK: usize = 4096;
    let partials: Vec<T> = values
        .par_chunks(BLOCK)
        .map(|c| c.iter().copied().sum())
        .collect();
    partials.into_iter().sum()
}
