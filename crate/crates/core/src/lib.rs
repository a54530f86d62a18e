//! Cut discontinuous Galerkin discretization of stationary and time-dependent
//! advection-reaction problems on domains described by level sets.
//!
//! The pipeline is: [`mesh`] builds a structured background grid and extracts
//! the active elements, [`geometry`] produces cut quadrature rules, [`space`]
//! provides broken polynomial bases, [`forms`] assembles the upwind operator,
//! ghost penalties, mass and load, [`linalg`] solves and measures conditioning,
//! [`timestep`] advances the semi-discrete system and [`analysis`] runs the
//! convergence and robustness studies.

pub mod analysis;
pub mod forms;
pub mod geometry;
pub mod linalg;
pub mod mesh;
pub mod space;
pub mod timestep;

pub use nalgebra::Vector2;

/// Points and vectors in the plane.
pub type Vec2 = Vector2<f64>;
