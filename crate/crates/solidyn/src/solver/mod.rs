//! Time integration, Newton iteration, and the linear-solve contract.

mod linear;
mod stepping;
#[cfg(test)]
mod tests;

pub use linear::{solve_linear_system, Csr, LinearSolverConfig};
pub use stepping::{advance_step, newton_step, NewtonTrace, StepReport};

use crate::error::{Result, SolidynError};
use nalgebra::Vector3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Bdf1,
    Bdf2,
}

/// Discrete state at the end of a step; `u` doubles as the Newton iterate for
/// u^{n+1} while a step is in progress.
#[derive(Debug, Clone)]
pub struct State {
    /// Total displacement from the reference configuration.
    pub u: Vec<Vector3<f64>>,
    pub p: Vec<f64>,
    pub u_n: Vec<Vector3<f64>>,
    pub u_nm1: Option<Vec<Vector3<f64>>>,
    pub u_nm2: Option<Vec<Vector3<f64>>>,
    pub t: f64,
    pub step: usize,
}

impl State {
    /// Stress-free rest state: zero displacement and pressure.
    pub fn new(n_nodes: usize) -> Self {
        Self {
            u: vec![Vector3::zeros(); n_nodes],
            p: vec![0.0; n_nodes],
            u_n: vec![Vector3::zeros(); n_nodes],
            u_nm1: None,
            u_nm2: None,
            t: 0.0,
            step: 0,
        }
    }

    /// Impose an initial velocity by seeding fictitious history so the first
    /// backward difference reproduces v0: u^{-1} = -v0 dt. Only one slot is
    /// seeded; the first BDF2 step therefore still starts as BDF1.
    pub fn seed_velocity(&mut self, v0: &[Vector3<f64>], dt: f64) {
        assert_eq!(v0.len(), self.u.len());
        self.u_nm1 = Some(v0.iter().map(|v| -v * dt).collect());
    }
}

/// The BDF stencil in the incremental form needed by Newton:
/// a(u) = (c0 * u - hist) / dt^2 per node.
#[derive(Debug, Clone)]
pub struct Bdf {
    pub c0: f64,
    pub inv_dt2: f64,
    pub hist: Vec<Vector3<f64>>,
}

impl Bdf {
    pub fn new(state: &State, dt: f64, scheme: Scheme) -> Result<Self> {
        let missing = |s: &str| SolidynError::MissingHistory { scheme: s.to_string() };
        let inv_dt2 = 1.0 / (dt * dt);
        match scheme {
            Scheme::Bdf1 => {
                let um1 = state.u_nm1.as_ref().ok_or_else(|| missing("BDF1"))?;
                let hist = state.u_n.iter().zip(um1).map(|(a, b)| 2.0 * a - b).collect();
                Ok(Self { c0: 1.0, inv_dt2, hist })
            }
            Scheme::Bdf2 => {
                let um1 = state.u_nm1.as_ref().ok_or_else(|| missing("BDF2"))?;
                let um2 = state.u_nm2.as_ref().ok_or_else(|| missing("BDF2"))?;
                let hist = state
                    .u_n
                    .iter()
                    .zip(um1.iter().zip(um2))
                    .map(|(a, (b, c))| 5.0 * a - 4.0 * b + c)
                    .collect();
                Ok(Self { c0: 2.0, inv_dt2, hist })
            }
        }
    }

    pub fn acceleration(&self, node: usize, u: &Vector3<f64>) -> Vector3<f64> {
        (self.c0 * u - self.hist[node]) * self.inv_dt2
    }
}

/// Nodal acceleration of the current iterate under the given scheme.
pub fn bdf_acceleration(state: &State, dt: f64, scheme: Scheme) -> Result<Vec<Vector3<f64>>> {
    let bdf = Bdf::new(state, dt, scheme)?;
    Ok(state.u.iter().enumerate().map(|(n, u)| bdf.acceleration(n, u)).collect())
}

/// Solver parameters shared by all cases.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub scheme: Scheme,
    pub dt: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub linear: LinearSolverConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::Bdf2,
            dt: 0.01,
            newton_tol: 1e-8,
            newton_max_iter: 25,
            linear: LinearSolverConfig::Direct,
        }
    }
}
