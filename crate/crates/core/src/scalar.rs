use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real floating-point scalar the metric algebra is written against.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Absolute tolerance for identities that hold exactly in real arithmetic
    /// (imaginary residues, determinant identities, measurement equalities).
    fn exact_tol() -> Self;

    /// Converts an `f64` literal into this scalar.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }
}

impl Scalar for f64 {
    fn exact_tol() -> f64 {
        1e-12
    }
}

impl Scalar for f32 {
    fn exact_tol() -> f32 {
        1e-5
    }
}
