//! Rank graduation (RGX_p) metrics for accuracy, robustness and
//! explainability of predictive models, together with the supporting
//! machinery: Lorenz-type curves, Cramér–von Mises divergences, whitening,
//! a k-fold SAFE evaluation pipeline and Monte Carlo Shapley values.
//!
//! The curve and metric code in [`rank`], [`rgx`] and [`divergence`] is
//! generic over the scalar type; [`rank`] and the `p = 1` area metrics also
//! run on exact rationals. The matrix-based layers (whitening, models,
//! pipelines) work in `f64`.

pub mod cv;
pub mod data;
pub mod divergence;
pub mod error;
pub mod explain;
pub mod models;
pub mod rank;
pub mod report;
pub mod rgx;
pub mod safe;
pub mod scalar;
pub mod synth;
pub mod whitening;

pub use error::{Error, ErrorCategory, Result};
pub use num_rational::Rational64;
pub use scalar::{Real, Scalar};

pub type Sample = rank::RankedSample<f64>;
pub type Curve = rank::PLCurve<f64>;
pub type Rgx = rgx::RgxResult<f64>;
pub type Cdf = divergence::StepCDF<f64>;
pub type ExactSample = rank::RankedSample<Rational64>;
pub type ExactCurve = rank::PLCurve<Rational64>;
pub type ExactRgx = rgx::RgxResult<Rational64>;
pub type SinglePrecisionSample = rank::RankedSample<f32>;
