//! Full-reference image quality assessment through blur-equivalent
//! linearization.
//!
//! The pipeline turns a reference/distorted luminance pair into a predicted
//! DMOS score in four stages:
//!
//! 1. complex visual maps and smoothed gradient energy ([`vrf`]),
//! 2. certainty-region partitioning and the blur-equivalent edge index
//!    ([`edge`]),
//! 3. a complex-PSNR texture index over the hot region ([`texture`]),
//! 4. an affine fusion of the two indices ([`fusion`]).
//!
//! [`model`] holds the closed-form canonical blur model shared by every
//! stage, [`calibration`] fits its `(Q, tau)` parameters from blur-annotated
//! DMOS data, and [`harness`] provides dataset scoring and evaluation.
//!
//! Numeric code is generic over the [`scalar::Scalar`] float type; the
//! aliases below fix the default double-precision instantiation.

pub mod calibration;
pub mod edge;
pub mod error;
pub mod fusion;
pub mod harness;
pub mod image_io;
pub mod model;
pub mod render;
pub mod scalar;
pub mod stats;
pub mod texture;
pub mod vrf;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Default double-precision pipeline types.
pub type Luminance = image_io::LuminanceImage<f64>;
pub type Field = image_io::ScalarField<f64>;
pub type Map = vrf::VisualMap<f64>;
pub type Geometry = model::ViewerGeometry<f64>;
pub type Params = model::CanonicalParams<f64>;
pub type Blur = model::NormalizedBlur<f64>;
pub type Dmos = model::DmosScore<f64>;

/// Single-precision variants for memory-bound batch work.
pub type Luminance32 = image_io::LuminanceImage<f32>;
pub type Field32 = image_io::ScalarField<f32>;
pub type Map32 = vrf::VisualMap<f32>;
