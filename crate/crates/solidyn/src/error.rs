use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum SolidynError {
    #[error("degenerate element {element}: zero volume")]
    DegenerateElement { element: usize },

    #[error("inverted element {element}: non-positive volume")]
    InvertedElement { element: usize },

    #[error("mesh inversion at element {element}")]
    MeshInversion { element: usize },

    #[error("kinematic inversion: det(I - grad u) <= 0")]
    KinematicInversion,

    #[error("gmsh parse error at line {line}: {message}")]
    GmshParse { line: usize, message: String },

    #[error("unsupported gmsh element type {elem_type}")]
    GmshUnsupportedElement { elem_type: i32 },

    #[error("case file error at line {line}: {message}")]
    CaseParse { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown boundary tag '{0}'")]
    UnknownTag(String),

    #[error("unknown preset '{0}'")]
    UnknownPreset(String),

    #[error("conflicting dirichlet prescriptions on dof {dof}")]
    ConflictingDirichlet { dof: usize },

    #[error("missing displacement history for scheme {scheme}")]
    MissingHistory { scheme: String },

    #[error("linear solver failed: {0}")]
    LinearSolver(String),

    #[error("newton did not converge after {iterations} iterations (residual {residual:e})")]
    NewtonNonConvergence { iterations: usize, residual: f64 },

    #[error("material parameter out of range: {0}")]
    MaterialRange(String),

    #[error("probe point {0:?} lies outside the mesh")]
    ProbeOutsideMesh([f64; 3]),

    #[error("probe rows must have strictly increasing time")]
    NonMonotoneProbe,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SolidynError>;
