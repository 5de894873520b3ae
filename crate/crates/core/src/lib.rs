//! Deterministic numerical laboratory for a fluctuating (stochastic and
//! crypto-stochastic) metric-tensor model of quantum phenomena.
//!
//! The exact metric algebra ([`metric`], [`measurement`], [`geodesic`],
//! [`uncertainty::raise_index`]) is generic over the scalar type through
//! [`Scalar`] (or, for determinants, any [`metric::Entry`] such as complex or
//! rational numbers). Monte Carlo experiments run in `f64` and draw every
//! random number from counter-based streams keyed by `(seed, indices)`, so
//! results do not depend on thread count or scheduling.

pub mod entangle;
pub mod error;
pub mod field;
pub mod geodesic;
pub mod measurement;
pub mod metric;
pub mod oscillator;
pub mod rng;
pub mod scalar;
pub mod slit;
pub mod stats;
pub mod uncertainty;

pub use error::{Error, Result};
pub use scalar::Scalar;

use num_complex::Complex;

/// Real double-precision metric, the workhorse of the physical pipelines.
pub type Metric = metric::Metric4<f64>;
/// Single-precision real metric.
pub type Metric32 = metric::Metric4<f32>;
/// Complex diagnostic metric (phase metrics and their superpositions).
pub type ComplexMetric = metric::Metric4<Complex<f64>>;
/// Geodesic state in double precision.
pub type State = geodesic::ParticleState<f64>;
/// Christoffel symbols in double precision.
pub type Christoffel = geodesic::ChristoffelSet<f64>;
