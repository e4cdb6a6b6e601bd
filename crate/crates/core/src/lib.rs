//! Vanishing point detection from recurring image patterns combined with explicit line segments.
//!
//! Features are grouped into visual words, progressions of shrinking features inside each word
//! become implicit lines, and a weighted RANSAC intersects them together with detected edge
//! segments. Geometric code is generic over [`Scalar`] (`f32` or `f64`); the aliases below fix
//! the common choices.

// `!(x > 0.0)` is used on purpose so NaN fails validation; index loops read better in matrix code.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod clustering;
pub mod error;
pub mod eval;
pub mod features;
pub mod geometry;
pub mod linalg;
pub mod linefit;
pub mod pipeline;
pub mod ransac;
pub mod raster;
pub mod scalar;
pub mod selection;
pub mod synthgen;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Point2F64 = geometry::Point2<f64>;
pub type Point2F32 = geometry::Point2<f32>;
pub type HomLineF64 = geometry::HomLine<f64>;
pub type HomLineF32 = geometry::HomLine<f32>;
pub type OrientedLineF64 = geometry::OrientedLine<f64>;
pub type OrientedLineF32 = geometry::OrientedLine<f32>;
pub type VpEstimateF64 = geometry::VpEstimate<f64>;
pub type VpEstimateF32 = geometry::VpEstimate<f32>;
pub type FeatureF64 = features::Feature<f64>;
pub type FeatureF32 = features::Feature<f32>;
pub type LinePoolF64 = linefit::LinePool<f64>;
pub type LinePoolF32 = linefit::LinePool<f32>;
pub type VpResultF64 = ransac::VpResult<f64>;
pub type VpResultF32 = ransac::VpResult<f32>;
pub type DetectionOutputF64 = pipeline::DetectionOutput<f64>;
pub type DetectionOutputF32 = pipeline::DetectionOutput<f32>;
pub type SyntheticInstanceF64 = synthgen::SyntheticInstance<f64>;
