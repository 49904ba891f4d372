//! P1/P1 mixed discretization: dofs, element integration, global assembly,
//! and boundary-condition application.

mod assembly;
mod system;

pub use assembly::{assemble_steady_linear, assemble_transient};
pub use system::{
    apply_dirichlet, dirichlet_values, integrate_traction, BcKind, BoundaryCondition, DofMap,
    LinearSystem,
};
