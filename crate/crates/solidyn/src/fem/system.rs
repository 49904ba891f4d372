//! Degrees of freedom, the global sparse system, and Dirichlet handling.

use crate::error::{Result, SolidynError};
use crate::mesh::Mesh;
use nalgebra::{DMatrix, DVector, Vector3};

/// Node-major displacement dofs followed by all pressure dofs.
#[derive(Debug, Clone, Copy)]
pub struct DofMap {
    n_nodes: usize,
    dim: usize,
}

impl DofMap {
    pub fn new(mesh: &Mesh) -> Self {
        Self { n_nodes: mesh.n_nodes(), dim: mesh.dim() }
    }

    pub fn displacement(&self, node: usize, axis: usize) -> usize {
        debug_assert!(axis < self.dim);
        node * self.dim + axis
    }

    pub fn pressure(&self, node: usize) -> usize {
        self.n_nodes * self.dim + node
    }

    pub fn total(&self) -> usize {
        self.n_nodes * (self.dim + 1)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }
}

/// Assembled sparse system in triplet form plus a dense right-hand side.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub n: usize,
    pub triplets: Vec<(usize, usize, f64)>,
    pub rhs: DVector<f64>,
}

impl LinearSystem {
    pub fn new(n: usize) -> Self {
        Self { n, triplets: Vec::new(), rhs: DVector::zeros(n) }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        if v != 0.0 {
            self.triplets.push((i, j, v));
        }
    }

    pub fn add_rhs(&mut self, i: usize, v: f64) {
        self.rhs[i] += v;
    }

    /// Dense copy, for small verification problems and tests.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for &(i, j, v) in &self.triplets {
            m[(i, j)] += v;
        }
        m
    }
}

/// Row replacement with symmetrization: constrained rows become identity rows
/// carrying the target value, and the known values are moved to the
/// right-hand side of every free row that couples to them.
pub fn apply_dirichlet(system: &mut LinearSystem, constraints: &[Option<f64>]) {
    assert_eq!(constraints.len(), system.n);
    let mut kept = Vec::with_capacity(system.triplets.len());
    for &(i, j, v) in &system.triplets {
        if constraints[i].is_some() {
            continue;
        }
        if let Some(g) = constraints[j] {
            system.rhs[i] -= v * g;
        } else {
            kept.push((i, j, v));
        }
    }
    for (d, c) in constraints.iter().enumerate() {
        if let Some(g) = c {
            kept.push((d, d, 1.0));
            system.rhs[d] = *g;
        }
    }
    system.triplets = kept;
}

/// One boundary-condition entry of a case.
#[derive(Debug, Clone, PartialEq)]
pub enum BcKind {
    /// Prescribed displacement on the tagged nodes; `components` masks axes.
    Dirichlet { value: Vector3<f64>, components: [bool; 3] },
    /// Constant traction vector on the tagged facets (force per unit measure).
    Traction(Vector3<f64>),
    /// Volumetric force: per unit mass when `per_mass` (a gravity vector),
    /// otherwise per unit current volume.
    BodyForce { value: Vector3<f64>, per_mass: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCondition {
    /// Mesh boundary tag; body forces carry no tag.
    pub tag: Option<String>,
    pub kind: BcKind,
    /// Linear ramp: scale grows from 0 to 1 over [0, t_end], then holds.
    pub ramp: Option<f64>,
}

impl BoundaryCondition {
    pub fn scale(&self, t: f64) -> f64 {
        match self.ramp {
            Some(t_end) => (t / t_end).clamp(0.0, 1.0),
            None => 1.0,
        }
    }
}

/// Evaluate all Dirichlet entries at time `t` into a per-dof target table.
/// Conflicting prescriptions (same dof, different values) are rejected.
pub fn dirichlet_values(
    mesh: &Mesh,
    dofs: &DofMap,
    bcs: &[BoundaryCondition],
    t: f64,
) -> Result<Vec<Option<f64>>> {
    let mut out = vec![None; dofs.total()];
    for bc in bcs {
        let BcKind::Dirichlet { value, components } = &bc.kind else { continue };
        let tag = bc.tag.as_deref().ok_or_else(|| {
            SolidynError::Config("Dirichlet condition requires a boundary tag".into())
        })?;
        mesh.tag_id(tag).ok_or_else(|| SolidynError::UnknownTag(tag.to_string()))?;
        let s = bc.scale(t);
        for node in mesh.nodes_with_tag(tag) {
            for axis in 0..dofs.dim() {
                if !components[axis] {
                    continue;
                }
                let dof = dofs.displacement(node, axis);
                let g = s * value[axis];
                match out[dof] {
                    Some(prev) if prev != g => {
                        return Err(SolidynError::ConflictingDirichlet { dof });
                    }
                    _ => out[dof] = Some(g),
                }
            }
        }
    }
    Ok(out)
}

/// Consistent P1 facet load for a constant traction: each facet spreads
/// t * measure / (number of facet nodes) onto its nodes.
pub fn integrate_traction(mesh: &Mesh, tag: &str, traction: &Vector3<f64>) -> Result<Vec<Vector3<f64>>> {
    integrate_traction_on(mesh, tag, traction, mesh.nodes_current())
}

pub(crate) fn integrate_traction_on(
    mesh: &Mesh,
    tag: &str,
    traction: &Vector3<f64>,
    coords: &[Vector3<f64>],
) -> Result<Vec<Vector3<f64>>> {
    let tag_id = mesh.tag_id(tag).ok_or_else(|| SolidynError::UnknownTag(tag.to_string()))?;
    let dim = mesh.dim();
    let mut loads = vec![Vector3::zeros(); mesh.n_nodes()];
    for facet in mesh.boundary_facets() {
        if facet.tag() != tag_id {
            continue;
        }
        let nodes = facet.nodes(dim);
        let measure = match dim {
            2 => (coords[nodes[1]] - coords[nodes[0]]).norm(),
            _ => {
                let e1 = coords[nodes[1]] - coords[nodes[0]];
                let e2 = coords[nodes[2]] - coords[nodes[0]];
                0.5 * e1.cross(&e2).norm()
            }
        };
        let share = traction * (measure / nodes.len() as f64);
        for &n in nodes {
            loads[n] += share;
        }
    }
    Ok(loads)
}
