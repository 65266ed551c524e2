//! Element type abstraction: the network trains in f32, the gradient-check
//! harness instantiates the same code in f64.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};

pub trait Scalar:
    Float + NumAssignOps + FromPrimitive + ToPrimitive + Default + Debug + Display + Send + Sync + 'static
{
    fn of_f64(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("f64 conversion")
    }

    fn as_f64(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).expect("f64 conversion")
    }

    fn of_f32(v: f32) -> Self {
        <Self as FromPrimitive>::from_f32(v).expect("f32 conversion")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
