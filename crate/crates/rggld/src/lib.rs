//! Simulation and numerical-evaluation toolkit for near-intermediate random
//! geometric graphs (RGGs) and coloured RGGs.
//!
//! The near-intermediate regime scales the connectivity radius so that
//! `n * r^d -> c`, keeping the mean degree bounded at `rho(d) * c` where
//! `rho(d)` is the Euclidean unit-ball volume. The crate provides
//!
//! * [`geometry`] — uniform point sampling in `[0,1)^d` and grid-accelerated
//!   graph construction on the cube or the torus,
//! * [`measures`] — empirical degree / colour / pair / neighbourhood measures
//!   and the marginalization map between them,
//! * [`rates`] — the large-deviation rate functions for the degree
//!   distribution, the isolated-vertex proportion, and the coloured
//!   pair/neighbourhood measures,
//! * [`montecarlo`] — seeded ensemble simulation confronting the rate
//!   functions with sampled graphs,
//! * [`verify`] — the acceptance checks run by `rggld verify` and by the
//!   integration test suite.

pub mod error;
pub mod geometry;
pub mod io;
pub mod measures;
pub mod montecarlo;
pub mod rates;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::{BoundaryMode, ColouredGraph, Graph, Kernel, ModelParams, PointCloud};
pub use measures::{Colour, Consistency, CountableMeasure, LocalityVector, NeighbourhoodMeasure};
pub use rates::{PoissonLaw, RateValue};
