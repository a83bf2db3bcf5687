//! Sharpness-aware training with gradient-strength-scaled corruptions, built on
//! a small reverse-mode autodiff tape.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases below
//! fix the common instantiations.

pub mod autodiff;
pub mod data;
pub mod error;
pub mod grouping;
pub mod landscape;
pub mod model;
pub mod params;
pub mod sam;
pub mod scalar;
pub mod shift;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type ArrayF64 = autodiff::Array<f64>;
pub type ArrayF32 = autodiff::Array<f32>;
pub type TapeF64 = autodiff::Tape<f64>;
pub type TapeF32 = autodiff::Tape<f32>;
pub type ParamVectorF64 = params::ParamVector<f64>;
pub type ParamVectorF32 = params::ParamVector<f32>;
pub type ScaleVectorF64 = grouping::ScaleVector<f64>;
pub type ScaleVectorF32 = grouping::ScaleVector<f32>;
pub type SamConfigF64 = sam::SamConfig<f64>;
pub type SamConfigF32 = sam::SamConfig<f32>;
pub type OptimizerConfigF64 = sam::OptimizerConfig<f64>;
pub type OptimizerConfigF32 = sam::OptimizerConfig<f32>;
