//! Configuration parsing, VTK/CSV writers and line-profile extraction.

pub mod config;
pub mod probes;
pub mod vtk;
