//! Spectral laboratory for Navier–Stokes perturbations of small weak-L³
//! backgrounds on a periodic box.

pub mod dss;
pub mod fixedpoint;
pub mod grid;
pub mod landau;
pub mod lorentz;
pub mod mild_solver;
pub mod snapshot;
pub mod spectral;

pub use grid::{sample_field, Grid, GridError, ScalarField, VectorField3};
