//! Numerical Finsler geometry built on exact truncated Taylor-jet
//! differentiation.
//!
//! The crate evaluates a Finsler metric `F(x, y)` together with all partial
//! derivatives up to a configurable order by propagating truncated
//! multivariate Taylor polynomials ("jets") through the metric's defining
//! expression. Every curvature quantity of the Berwald-connection calculus
//! (fundamental tensor, geodesic spray, Riemann and flag curvature, Cartan,
//! Berwald and Landsberg tensors, S-curvature) is then an exact polynomial
//! identity in those jet coefficients, so the classical tensor identities of
//! the subject can be verified numerically to near machine precision.
//!
//! The crate is `no_std` (with `alloc`); IO, file formats and the command
//! line front end live in the companion `finsler-cli` crate.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod detect;
pub mod error;
pub mod families;
pub mod geometry;
pub mod identities;
pub mod jet;
pub mod linalg;
pub mod sample;
pub mod volume;

pub use error::{Error, Result};
pub use geometry::{CurvatureBundle, JetBundle, MetricField, TangentPoint};
pub use jet::{JetContext, JetValue};
