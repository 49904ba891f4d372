//! Variational multi-scale stabilization of the equal-order u-p pair.
//!
//! The fine-scale projectors are the identity, so the scheme reduces to
//! algebraic sub-grid scales: every term is a residual-weighted element
//! integral controlled by a single intrinsic time tau per element.

use crate::error::{Result, SolidynError};
use crate::mesh::{ElementGeometry, Mesh};
use nalgebra::{SMatrix, Vector3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilizationModel {
    Static,
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilizationParams {
    pub alpha: f64,
    pub model: StabilizationModel,
}

impl Default for StabilizationParams {
    fn default() -> Self {
        Self { alpha: 1.0, model: StabilizationModel::Static }
    }
}

/// Intrinsic time of the sub-scales on one element.
///
/// Static: tau = alpha h^2 / (2 mu). Dynamic: the inertial scale rho/dt^2 is
/// blended in harmonically, tau = (rho/dt^2 + 2 mu/(alpha h^2))^-1, which
/// recovers the static value as dt grows and dt^2/rho on coarse elements.
pub fn compute_tau(h: f64, mu: f64, rho: f64, dt: f64, params: &StabilizationParams) -> Result<f64> {
    if !(h > 0.0) || !(mu > 0.0) || !(params.alpha > 0.0) {
        return Err(SolidynError::MaterialRange(format!(
            "stabilization needs h, mu, alpha > 0 (h={h}, mu={mu}, alpha={})",
            params.alpha
        )));
    }
    match params.model {
        StabilizationModel::Static => Ok(params.alpha * h * h / (2.0 * mu)),
        StabilizationModel::Dynamic => {
            if !(dt > 0.0) || !(rho > 0.0) {
                return Err(SolidynError::MaterialRange(format!(
                    "dynamic stabilization needs rho, dt > 0 (rho={rho}, dt={dt})"
                )));
            }
            Ok(1.0 / (rho / (dt * dt) + 2.0 * mu / (params.alpha * h * h)))
        }
    }
}

/// Per-element tau over the current mesh configuration.
pub fn tau_field(mesh: &Mesh, mu: f64, rho: f64, dt: f64, params: &StabilizationParams) -> Result<Vec<f64>> {
    (0..mesh.n_elements())
        .map(|e| compute_tau(mesh.element_geometry(e)?.h, mu, rho, dt, params))
        .collect()
}

/// tau (grad p, grad q) on one element: a scaled P1 Laplacian, the term that
/// kills the checkerboard pressure mode. Entries beyond dim+1 stay zero.
pub fn pressure_laplacian(geom: &ElementGeometry, n_nodes: usize, tau: f64) -> SMatrix<f64, 4, 4> {
    let mut k = SMatrix::<f64, 4, 4>::zeros();
    for a in 0..n_nodes {
        for b in 0..n_nodes {
            k[(a, b)] = tau * geom.volume * geom.shape_gradients[a].dot(&geom.shape_gradients[b]);
        }
    }
    k
}

/// tau (div u, div w) on one element, indexed as [3a + i, 3b + j].
pub fn divergence_penalty(geom: &ElementGeometry, n_nodes: usize, tau: f64) -> SMatrix<f64, 12, 12> {
    let mut k = SMatrix::<f64, 12, 12>::zeros();
    for a in 0..n_nodes {
        for b in 0..n_nodes {
            for i in 0..3 {
                for j in 0..3 {
                    k[(3 * a + i, 3 * b + j)] =
                        tau * geom.volume * geom.shape_gradients[a][i] * geom.shape_gradients[b][j];
                }
            }
        }
    }
    k
}

/// -(tau/K)(p, div w) on one element, coupling pressure dof b to momentum
/// dof (a, i); `inv_k` is 1/K (zero in the incompressible limit).
pub fn pressure_divergence_correction(
    geom: &ElementGeometry,
    n_nodes: usize,
    tau: f64,
    inv_k: f64,
) -> SMatrix<f64, 12, 4> {
    let mut k = SMatrix::<f64, 12, 4>::zeros();
    let w = tau * inv_k * geom.volume / n_nodes as f64;
    for a in 0..n_nodes {
        for b in 0..n_nodes {
            for i in 0..3 {
                k[(3 * a + i, b)] = -w * geom.shape_gradients[a][i];
            }
        }
    }
    k
}

/// tau (f - rho a, grad q) on one element with element-constant force and
/// acceleration; the right-hand-side part of the fine-scale pressure residual.
pub fn residual_projection_rhs(
    geom: &ElementGeometry,
    n_nodes: usize,
    tau: f64,
    force_minus_inertia: &Vector3<f64>,
) -> [f64; 4] {
    let mut r = [0.0; 4];
    for (a, slot) in r.iter_mut().enumerate().take(n_nodes) {
        *slot = tau * geom.volume * force_minus_inertia.dot(&geom.shape_gradients[a]);
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_box_mesh;
    use approx::assert_relative_eq;
    use nalgebra::Vector3;

    #[test]
    fn tau_examples() {
        let p = StabilizationParams::default();
        assert_relative_eq!(compute_tau(1.0, 0.5, 1.0, 1.0, &p).unwrap(), 1.0, max_relative = 1e-14);
        assert_relative_eq!(compute_tau(0.1, 500.0, 1.0, 1.0, &p).unwrap(), 1e-5, max_relative = 1e-12);

        let d = StabilizationParams { alpha: 1.0, model: StabilizationModel::Dynamic };
        let tau = compute_tau(1.0, 0.5, 1.0, 1e9, &d).unwrap();
        assert_relative_eq!(tau, 1.0, max_relative = 1e-6);
        // Coarse-element limit dt^2 / rho.
        let tau = compute_tau(1e6, 0.5, 4.0, 0.5, &d).unwrap();
        assert_relative_eq!(tau, 0.25 / 4.0, max_relative = 1e-6);
    }

    #[test]
    fn tau_rejects_bad_inputs() {
        let p = StabilizationParams::default();
        assert!(compute_tau(0.0, 1.0, 1.0, 1.0, &p).is_err());
        assert!(compute_tau(1.0, -1.0, 1.0, 1.0, &p).is_err());
        let d = StabilizationParams { alpha: 1.0, model: StabilizationModel::Dynamic };
        assert!(compute_tau(1.0, 1.0, 1.0, 0.0, &d).is_err());
    }

    #[test]
    fn tau_h_squared_scaling() {
        let p = StabilizationParams { alpha: 0.7, ..Default::default() };
        for h in [2.0, 0.5, 0.03] {
            let full = compute_tau(h, 3.0, 1.0, 1.0, &p).unwrap();
            let half = compute_tau(h / 2.0, 3.0, 1.0, 1.0, &p).unwrap();
            assert_relative_eq!(half, full / 4.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn zero_tau_kills_all_blocks() {
        let mesh = generate_box_mesh(&[1.0, 1.0], &[1, 1]).unwrap();
        let geom = mesh.element_geometry(0).unwrap();
        assert_eq!(pressure_laplacian(&geom, 3, 0.0).norm(), 0.0);
        assert_eq!(divergence_penalty(&geom, 3, 0.0).norm(), 0.0);
        assert_eq!(pressure_divergence_correction(&geom, 3, 0.0, 1.0).norm(), 0.0);
        let r = residual_projection_rhs(&geom, 3, 0.0, &Vector3::new(1.0, 2.0, 0.0));
        assert_eq!(r, [0.0; 4]);
    }

    #[test]
    fn reference_triangle_pressure_block_is_p1_laplacian() {
        // First triangle of the unit square: (0,0),(1,0),(1,1), gradients
        // (-1,0),(1,-1),(0,1), area 1/2; Laplacian computed by hand.
        let mesh = generate_box_mesh(&[1.0, 1.0], &[1, 1]).unwrap();
        let geom = mesh.element_geometry(0).unwrap();
        let k = pressure_laplacian(&geom, 3, 1.0);
        let expect = [[0.5, -0.5, 0.0], [-0.5, 1.0, -0.5], [0.0, -0.5, 0.5]];
        for a in 0..3 {
            for b in 0..3 {
                assert_relative_eq!(k[(a, b)], expect[a][b], epsilon = 1e-14);
            }
        }
        // Rows sum to zero: constant pressure produces no contribution.
        for a in 0..3 {
            assert!((k.row(a).sum()).abs() < 1e-14);
        }
    }

    #[test]
    fn divergence_penalty_annihilates_rigid_translation() {
        let mesh = generate_box_mesh(&[2.0, 1.0, 1.0], &[2, 1, 1]).unwrap();
        let geom = mesh.element_geometry(0).unwrap();
        let k = divergence_penalty(&geom, 4, 0.3);
        // u = const on every node -> div u = 0 -> K u = 0.
        let mut u = SMatrix::<f64, 12, 1>::zeros();
        for a in 0..4 {
            u[3 * a] = 1.5;
            u[3 * a + 1] = -0.2;
            u[3 * a + 2] = 0.7;
        }
        assert!((k * u).norm() < 1e-14);
    }
}
