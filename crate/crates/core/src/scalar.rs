use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, Num, ToPrimitive};

/// Field-like scalar the exact probability engine runs on.
///
/// Anything closed under `+ - * /` with an ordering qualifies, which admits
/// both IEEE floats and exact rationals (`num_rational::BigRational`).
pub trait Scalar: Clone + Debug + PartialOrd + Num + FromPrimitive + ToPrimitive + Send + Sync {}

impl<T> Scalar for T where T: Clone + Debug + PartialOrd + Num + FromPrimitive + ToPrimitive + Send + Sync {}

/// Scalar with transcendental functions (`exp`, `ln`, `sqrt`), i.e. `f32`/`f64`.
pub trait Real: Scalar + Float {}

impl<T> Real for T where T: Scalar + Float {}

pub(crate) fn lit<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("scalar type cannot represent an f64 literal")
}

pub(crate) fn half<T: Scalar>() -> T {
    T::one() / (T::one() + T::one())
}

pub(crate) fn abs<T: Scalar>(x: T) -> T {
    if x < T::zero() {
        T::zero() - x
    } else {
        x
    }
}
