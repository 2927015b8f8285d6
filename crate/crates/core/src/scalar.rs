//! Floating-point abstraction for the scalar numeric kernels.
//!
//! The dispersion relation, the bracketing/minimization routines and the
//! small vector utilities (part metric, sign changes) only need ordinary
//! IEEE arithmetic, so they are written against this trait and work for
//! both `f32` and `f64`. Everything that carries physical tolerances
//! (integrators, averaging, front construction) is pinned to the crate's
//! [`Real`](crate::Real) alias instead.

/// Scalar type the generic kernels run on: `f32` or `f64`.
pub trait Scalar:
    num_traits::Float + num_traits::FromPrimitive + std::fmt::Debug + std::fmt::Display + 'static
{
    /// Converts an `f64` constant into this scalar type.
    ///
    /// Panics when the value is not representable (never the case for the
    /// finite literals this crate feeds it).
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("finite literal converts to scalar")
    }

    /// A solver tolerance that is meaningful at this precision: the
    /// requested `f64` tolerance, widened to a small multiple of the
    /// machine epsilon when the type cannot resolve it.
    fn tol(requested: f64) -> Self {
        let floor = Self::epsilon() * Self::of(64.0);
        Self::of(requested).max(floor)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
