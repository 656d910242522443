//! Locating a penetrable obstacle buried in the lower layer of a two-layered
//! medium from a single wave measured where it was generated.
//!
//! The pipeline: simulate the wave (`fdtd`), Laplace-transform the record and
//! form the indicator function (`indicator`), read the optical distance
//! `l(D,B)` off the large-`tau` slope, and enclose the obstacle
//! (`geometry::enclosure_region`). The `kernel` module carries the
//! layered-medium fundamental solution (transmission coefficient, steepest
//! descent contour, leading-order asymptotics) used for the spectral route,
//! and `oracle` holds the independent brute-force validators.

pub mod config;
pub mod elliptic;
pub mod error;
pub mod fdtd;
pub mod fit;
pub mod geometry;
pub mod indicator;
pub mod kernel;
pub mod oracle;
pub mod pipeline;
pub mod quad;

pub use error::{Error, Result};
