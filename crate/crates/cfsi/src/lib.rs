//! 2D finite-element solver for micropolar (Cosserat) fluid-structure
//! interaction in a monolithic Eulerian formulation: velocity, microrotation
//! and pressure are solved as one implicit system per time step on a moving
//! triangulation, with an incompressible hyperelastic flag immersed in a
//! micropolar channel flow.
//!
//! The crate is generic over the floating-point scalar through
//! [`real::Real`]; the type aliases below fix the common `f64`
//! instantiations used by the CLI and the test suites.

pub mod assembly;
pub mod fespace;
pub mod io;
pub mod linalg;
pub mod mesh;
pub mod physics;
pub mod real;
pub mod solver;
pub mod timeloop;
pub mod verify;

pub use real::Real;

/// Default scalar for desk-scale runs.
pub type Scalar = f64;

pub type Mesh64 = mesh::Mesh<f64>;
pub type Field64 = fespace::Field<f64>;
pub type State64 = timeloop::State<f64>;
pub type PhysicalParams64 = assembly::PhysicalParams<f64>;
pub type Config64 = io::config::Config<f64>;
