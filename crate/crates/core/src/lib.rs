//! Shifted-boundary finite elements for linear elasticity on implicit
//! geometries.
//!
//! The pipeline is: query an [`geometry::ImplicitGeometry`] to build an
//! incomplete, 2:1-balanced octree ([`octree`]), classify leaves and extract
//! the grid-aligned surrogate boundary, attach closest-point distance vectors
//! at the surrogate Gauss points, assemble the Nitsche-type shifted boundary
//! system ([`fem`]) and solve it ([`solver`]).

pub mod cases;
pub mod fem;
pub mod geometry;
pub mod inr;
pub mod metrics;
pub mod octree;
pub mod pipeline;
pub mod quadrature;
pub mod solver;
pub mod sparse;
pub mod vtk;
