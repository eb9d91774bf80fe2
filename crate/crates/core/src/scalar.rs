//! Floating-point scalar abstraction so lattice math runs at f32 or f64.

use num_complex::Complex;

/// Real scalar for field values and lattice geometry.
///
/// Everything downstream (stencils, integrators, metrics) is written against
/// this trait; `f64` is the default through the crate-root aliases.
pub trait Real:
    num_traits::Float
    + num_traits::FloatConst
    + num_traits::NumAssign
    + num_traits::FromPrimitive
    + std::fmt::Debug
    + std::fmt::Display
    + std::fmt::LowerExp
    + Send
    + Sync
    + 'static
{
    /// Lift an `f64` literal into the scalar type.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal converts to any Real")
    }

    fn as_f64(self) -> f64 {
        num_traits::NumCast::from(self).expect("Real converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex value over the crate scalar.
pub type C<T> = Complex<T>;
