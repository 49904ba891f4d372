//! Transient solid dynamics with mixed displacement-pressure finite elements.
//!
//! P1/P1 simplicial elements stabilized by a variational multi-scale model,
//! with an updated Lagrangian moving mesh, BDF time integration, and
//! compressible through fully incompressible elastic materials.

pub mod cases;
pub mod error;
pub mod fem;
pub mod io;
pub mod materials;
pub mod mesh;
pub mod solver;
pub mod vms;

pub use error::{Result, SolidynError};
