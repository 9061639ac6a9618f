//! Point process partial least squares.
//!
//! Regresses a scalar response on the latent log-intensity of a temporal
//! point process. Subjects contribute event times (or binned counts); the
//! log-intensity covariance is estimated from pair correlations, each
//! subject's log-intensity is reconstructed in the leading eigenbasis by a
//! Poisson likelihood fit, and partial least squares directions are built
//! from Krylov iterates of the cross-covariance with the response.

pub mod bench;
pub mod bspline;
pub mod covariance;
pub mod error;
pub mod fpcr;
pub mod intensity;
pub mod numerics;
pub mod pls;
pub mod pointprocess;

pub use error::{P3lsError, Result};
