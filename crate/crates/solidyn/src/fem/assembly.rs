//! Element integration and global assembly of the mixed u-p weak forms.
//!
//! Two paths share the dof layout: the linear-elastic operators are assembled
//! on the reference configuration (the problem stays genuinely linear), while
//! the hyperelastic models assemble residual and exact tangent through the
//! deformation gradient F = I + sum_a u_a (x) G_a pulled back to the
//! reference element.

use super::system::{
    integrate_traction_on, BcKind, BoundaryCondition, DofMap, LinearSystem,
};
use crate::error::{Result, SolidynError};
use crate::materials::{deviator, linear_dev_stress, Material, MaterialKind};
use crate::mesh::Mesh;
use crate::solver::{Bdf, Scheme, State};
use nalgebra::{DVector, Matrix3, Vector3};

/// Coefficient of the P1 consistent mass matrix on a simplex with `n` nodes:
/// integral of N_a N_b equals V (1 + delta_ab) / (n (n+1)).
fn mass_coeff(n: usize, a: usize, b: usize, volume: f64) -> f64 {
    volume * if a == b { 2.0 } else { 1.0 } / (n * (n + 1)) as f64
}

/// Sum of body-force entries at time `t`, split into per-unit-mass
/// (gravity-like) and per-unit-volume parts.
fn body_force_terms(bcs: &[BoundaryCondition], t: f64) -> (Vector3<f64>, Vector3<f64>) {
    let mut per_mass = Vector3::zeros();
    let mut per_volume = Vector3::zeros();
    for bc in bcs {
        if let BcKind::BodyForce { value, per_mass: pm } = &bc.kind {
            let v = value * bc.scale(t);
            if *pm {
                per_mass += v;
            } else {
                per_volume += v;
            }
        }
    }
    (per_mass, per_volume)
}

fn add_traction_loads(
    system: &mut LinearSystem,
    mesh: &Mesh,
    dofs: &DofMap,
    bcs: &[BoundaryCondition],
    coords: &[Vector3<f64>],
    t: f64,
) -> Result<()> {
    for bc in bcs {
        let BcKind::Traction(value) = &bc.kind else { continue };
        let tag = bc.tag.as_deref().ok_or_else(|| {
            SolidynError::Config("traction condition requires a boundary tag".into())
        })?;
        let loads = integrate_traction_on(mesh, tag, &(value * bc.scale(t)), coords)?;
        for (node, load) in loads.iter().enumerate() {
            for axis in 0..dofs.dim() {
                system.add_rhs(dofs.displacement(node, axis), load[axis]);
            }
        }
    }
    Ok(())
}

fn check_tau(mesh: &Mesh, tau: &[f64]) -> Result<()> {
    if tau.len() != mesh.n_elements() {
        return Err(SolidynError::Config(format!(
            "tau field has {} entries for {} elements",
            tau.len(),
            mesh.n_elements()
        )));
    }
    Ok(())
}

/// Static linear-elastic system on the current configuration (Galerkin terms
/// plus the pressure-Laplacian stabilization and its force projection).
pub fn assemble_steady_linear(
    mesh: &Mesh,
    material: &Material,
    bcs: &[BoundaryCondition],
    tau: &[f64],
    t: f64,
) -> Result<LinearSystem> {
    if material.kind != MaterialKind::LinearElastic {
        return Err(SolidynError::Config(
            "steady assembly requires a linear elastic material".into(),
        ));
    }
    check_tau(mesh, tau)?;
    let dofs = DofMap::new(mesh);
    let mut system = LinearSystem::new(dofs.total());
    let dim = mesh.dim();
    let n = dim + 1;
    let mu = material.moduli.mu;
    let inv_k = material.moduli.bulk.inverse();
    let (b_mass, b_vol) = body_force_terms(bcs, t);
    let f_vol = material.rho0 * b_mass + b_vol;

    for e in 0..mesh.n_elements() {
        let geom = mesh.element_geometry(e)?;
        let nodes = mesh.element(e);
        let v = geom.volume;
        let g = &geom.shape_gradients;
        for b in 0..n {
            for j in 0..dim {
                // Deviatoric stress response of the (b, j) displacement mode.
                let grad = Vector3::ith(j, 1.0) * g[b].transpose();
                let sig = linear_dev_stress(&grad, mu);
                for a in 0..n {
                    let row_force = sig * g[a] * v;
                    for i in 0..dim {
                        system.add(
                            dofs.displacement(nodes[a], i),
                            dofs.displacement(nodes[b], j),
                            row_force[i],
                        );
                    }
                }
                // Divergence constraint row: -(div u, q).
                for a in 0..n {
                    system.add(
                        dofs.pressure(nodes[a]),
                        dofs.displacement(nodes[b], j),
                        -v / n as f64 * g[b][j],
                    );
                }
            }
        }
        for a in 0..n {
            for b in 0..n {
                // Momentum pressure coupling +(p, div w).
                for i in 0..dim {
                    system.add(
                        dofs.displacement(nodes[a], i),
                        dofs.pressure(nodes[b]),
                        v / n as f64 * g[a][i],
                    );
                }
                // (1/K)(p, q) plus the stabilization Laplacian.
                system.add(
                    dofs.pressure(nodes[a]),
                    dofs.pressure(nodes[b]),
                    inv_k * mass_coeff(n, a, b, v) + tau[e] * v * g[a].dot(&g[b]),
                );
            }
            // Loads: (f, w) and the fine-scale projection (tau f, grad q).
            for i in 0..dim {
                system.add_rhs(dofs.displacement(nodes[a], i), v / n as f64 * f_vol[i]);
            }
            system.add_rhs(dofs.pressure(nodes[a]), tau[e] * v * f_vol.dot(&g[a]));
        }
    }
    add_traction_loads(&mut system, mesh, &dofs, bcs, mesh.nodes_current(), t)?;
    Ok(system)
}

/// Newton system of one transient step evaluated at the current iterate
/// (state.u, state.p): matrix = consistent tangent, rhs = -residual, so the
/// solution of the constrained system is the Newton increment.
pub fn assemble_transient(
    mesh: &Mesh,
    material: &Material,
    state: &State,
    dt: f64,
    scheme: Scheme,
    bcs: &[BoundaryCondition],
    tau: &[f64],
) -> Result<LinearSystem> {
    check_tau(mesh, tau)?;
    let bdf = Bdf::new(state, dt, scheme)?;
    let t = state.t + dt;
    match material.kind {
        MaterialKind::LinearElastic => transient_linear(mesh, material, state, &bdf, bcs, tau, t),
        _ => transient_hyper(mesh, material, state, &bdf, bcs, tau, t),
    }
}

fn pack_state(dofs: &DofMap, state: &State) -> DVector<f64> {
    let mut x = DVector::zeros(dofs.total());
    for node in 0..dofs.n_nodes() {
        for axis in 0..dofs.dim() {
            x[dofs.displacement(node, axis)] = state.u[node][axis];
        }
        x[dofs.pressure(node)] = state.p[node];
    }
    x
}

/// Linear elastodynamics on the reference configuration. The operators are
/// those of the steady assembly plus inertia, the Eq.-70-style divergence
/// penalty, the pressure-divergence correction, and the inertial part of the
/// fine-scale residual.
fn transient_linear(
    mesh: &Mesh,
    material: &Material,
    state: &State,
    bdf: &Bdf,
    bcs: &[BoundaryCondition],
    tau: &[f64],
    t: f64,
) -> Result<LinearSystem> {
    let dofs = DofMap::new(mesh);
    let mut system = LinearSystem::new(dofs.total());
    let dim = mesh.dim();
    let n = dim + 1;
    let mu = material.moduli.mu;
    let inv_k = material.moduli.bulk.inverse();
    let rho = material.rho0;
    let (b_mass, b_vol) = body_force_terms(bcs, t);
    let f_vol = rho * b_mass + b_vol;
    let c = bdf.c0 * bdf.inv_dt2;

    for e in 0..mesh.n_elements() {
        let geom = mesh.reference_geometry(e)?;
        let nodes = mesh.element(e);
        let v = geom.volume;
        let g = &geom.shape_gradients;
        for b in 0..n {
            for j in 0..dim {
                let grad = Vector3::ith(j, 1.0) * g[b].transpose();
                let sig = linear_dev_stress(&grad, mu);
                for a in 0..n {
                    let row_force = sig * g[a] * v;
                    for i in 0..dim {
                        let mut k = row_force[i] + tau[e] * v * g[a][i] * g[b][j];
                        if i == j {
                            k += rho * c * mass_coeff(n, a, b, v);
                        }
                        system.add(
                            dofs.displacement(nodes[a], i),
                            dofs.displacement(nodes[b], j),
                            k,
                        );
                    }
                    // Pressure row in u: -(div u, q) + tau (rho u_tt, grad q).
                    system.add(
                        dofs.pressure(nodes[a]),
                        dofs.displacement(nodes[b], j),
                        -v / n as f64 * g[b][j] + tau[e] * v * rho * c / n as f64 * g[a][j],
                    );
                }
            }
        }
        for a in 0..n {
            for b in 0..n {
                for i in 0..dim {
                    system.add(
                        dofs.displacement(nodes[a], i),
                        dofs.pressure(nodes[b]),
                        (1.0 - tau[e] * inv_k) * v / n as f64 * g[a][i],
                    );
                }
                system.add(
                    dofs.pressure(nodes[a]),
                    dofs.pressure(nodes[b]),
                    inv_k * mass_coeff(n, a, b, v) + tau[e] * v * g[a].dot(&g[b]),
                );
            }
            // Affine loads: external force plus the BDF history terms.
            let hist: Vector3<f64> =
                (0..n).map(|b| bdf.hist[nodes[b]] * bdf.inv_dt2).sum::<Vector3<f64>>() / n as f64;
            for i in 0..dim {
                let mut rhs = v / n as f64 * f_vol[i];
                for b in 0..n {
                    rhs += rho * mass_coeff(n, a, b, v) * bdf.inv_dt2 * bdf.hist[nodes[b]][i];
                }
                system.add_rhs(dofs.displacement(nodes[a], i), rhs);
            }
            system.add_rhs(
                dofs.pressure(nodes[a]),
                tau[e] * v * (f_vol + rho * hist).dot(&g[a]),
            );
        }
    }
    add_traction_loads(&mut system, mesh, &dofs, bcs, mesh.nodes_reference(), t)?;

    // Convert K x = b into increment form: rhs = b - K x_current.
    let x = pack_state(&dofs, state);
    let mut kx = DVector::zeros(dofs.total());
    for &(i, j, val) in &system.triplets {
        kx[i] += val * x[j];
    }
    system.rhs -= kx;
    Ok(system)
}

/// Per-element hyperelastic residual and exact tangent via analytic
/// directional derivatives of the pulled-back weak form.
fn transient_hyper(
    mesh: &Mesh,
    material: &Material,
    state: &State,
    bdf: &Bdf,
    bcs: &[BoundaryCondition],
    tau: &[f64],
    t: f64,
) -> Result<LinearSystem> {
    let dofs = DofMap::new(mesh);
    let mut system = LinearSystem::new(dofs.total());
    let dim = mesh.dim();
    let n = dim + 1;
    let mu = material.moduli.mu;
    let lambda = material.moduli.lambda();
    let inv_k = material.moduli.bulk.inverse();
    let rho0 = material.rho0;
    let (b_mass, b_vol) = body_force_terms(bcs, t);
    let c = bdf.c0 * bdf.inv_dt2;
    let nf = n as f64;
    let eye = Matrix3::identity();

    let mut residual = DVector::zeros(dofs.total());

    for e in 0..mesh.n_elements() {
        let geom = mesh.reference_geometry(e)?;
        let nodes = mesh.element(e);
        let v0 = geom.volume;
        let big_g = &geom.shape_gradients;
        let tau_e = tau[e];

        // Kinematics of the current iterate.
        let mut f = eye;
        for a in 0..n {
            f += state.u[nodes[a]] * big_g[a].transpose();
        }
        let j = f.determinant();
        if !(j > 0.0) {
            return Err(SolidynError::KinematicInversion);
        }
        let finv = f.try_inverse().ok_or(SolidynError::KinematicInversion)?;
        let g: Vec<Vector3<f64>> = (0..n).map(|a| finv.transpose() * big_g[a]).collect();
        let v = j * v0;
        // Objective volumetric strain: v * dvol = v0 * (J - 1), invariant
        // under rigid rotation (a linearized divergence measure is not, and
        // pollutes the constraint in large-rotation bending).
        let dvol = (j - 1.0) / j;
        let p_bar: f64 = (0..n).map(|a| state.p[nodes[a]]).sum::<f64>() / nf;
        let grad_p: Vector3<f64> =
            (0..n).map(|a| state.p[nodes[a]] * g[a]).sum::<Vector3<f64>>();
        let accel: Vec<Vector3<f64>> =
            (0..n).map(|a| bdf.acceleration(nodes[a], &state.u[nodes[a]])).collect();
        let accel_c: Vector3<f64> = accel.iter().sum::<Vector3<f64>>() / nf;
        let rho = rho0 / j;
        let f_vol = rho * b_mass + b_vol;

        let bb = f * f.transpose();
        let (dev_sig, s_pk2) = match material.kind {
            MaterialKind::NeoHookeanSimoTaylor => {
                (deviator(&bb) * (mu * j.powf(-5.0 / 3.0)), Matrix3::zeros())
            }
            MaterialKind::StVenantKirchhoff => {
                let e_gl = (f.transpose() * f - eye) * 0.5;
                let s = eye * (lambda * e_gl.trace()) + e_gl * (2.0 * mu);
                (deviator(&(f * s * f.transpose() / j)), s)
            }
            MaterialKind::LinearElastic => unreachable!(),
        };
        let p_dev = j * dev_sig * finv.transpose();
        let coef = (1.0 - tau_e * inv_k) * v * p_bar + tau_e * v * dvol;
        let r_tilde = grad_p + rho * accel_c - f_vol;

        // Residual.
        for a in 0..n {
            let mut r_u = v0 * p_dev * big_g[a] + coef * g[a];
            for b in 0..n {
                r_u += rho0 * mass_coeff(n, a, b, v0) * accel[b];
            }
            r_u -= rho0 * v0 / nf * b_mass + v / nf * b_vol;
            let mut r_p = -v / nf * dvol + tau_e * v * r_tilde.dot(&g[a]);
            for b in 0..n {
                r_p += inv_k * j * mass_coeff(n, a, b, v0) * state.p[nodes[b]];
            }
            for i in 0..dim {
                residual[dofs.displacement(nodes[a], i)] += r_u[i];
            }
            residual[dofs.pressure(nodes[a])] += r_p;
        }

        // Tangent columns in p.
        for b in 0..n {
            for a in 0..n {
                let dr_u = (1.0 - tau_e * inv_k) * v / nf * g[a];
                for i in 0..dim {
                    system.add(dofs.displacement(nodes[a], i), dofs.pressure(nodes[b]), dr_u[i]);
                }
                system.add(
                    dofs.pressure(nodes[a]),
                    dofs.pressure(nodes[b]),
                    inv_k * j * mass_coeff(n, a, b, v0) + tau_e * v * g[a].dot(&g[b]),
                );
            }
        }

        // Tangent columns in u via directional derivatives along (b, k).
        let m0_p: Vec<f64> = (0..n)
            .map(|a| (0..n).map(|b| mass_coeff(n, a, b, v0) * state.p[nodes[b]]).sum())
            .collect();
        for b in 0..n {
            for k in 0..dim {
                let e_k = Vector3::ith(k, 1.0);
                let h = e_k * big_g[b].transpose();
                let finv_h = finv * h;
                let dj = j * finv_h.trace();
                let dv = dj * v0;
                let dfinv = -finv_h * finv;
                let dg: Vec<Vector3<f64>> = (0..n).map(|a| dfinv.transpose() * big_g[a]).collect();
                // d(v * dvol) = d(v0 (J - 1)) = v0 dJ.
                let dvdvol = v0 * dj;
                let drho = -rho0 * dj / (j * j);
                let ddev_sig = match material.kind {
                    MaterialKind::NeoHookeanSimoTaylor => {
                        let dbb = h * f.transpose() + f * h.transpose();
                        deviator(&bb) * (mu * (-5.0 / 3.0) * j.powf(-8.0 / 3.0) * dj)
                            + deviator(&dbb) * (mu * j.powf(-5.0 / 3.0))
                    }
                    MaterialKind::StVenantKirchhoff => {
                        let de = (h.transpose() * f + f.transpose() * h) * 0.5;
                        let ds = eye * (lambda * de.trace()) + de * (2.0 * mu);
                        let dsig = f * s_pk2 * f.transpose() * (-dj / (j * j))
                            + (h * s_pk2 * f.transpose()
                                + f * ds * f.transpose()
                                + f * s_pk2 * h.transpose())
                                / j;
                        deviator(&dsig)
                    }
                    MaterialKind::LinearElastic => unreachable!(),
                };
                let dp_dev =
                    dj * dev_sig * finv.transpose() + j * ddev_sig * finv.transpose()
                        + j * dev_sig * dfinv.transpose();
                let dcoef = (1.0 - tau_e * inv_k) * dv * p_bar + tau_e * dvdvol;
                let daccel_c = c / nf * e_k;
                let dgrad_p: Vector3<f64> =
                    (0..n).map(|a| state.p[nodes[a]] * dg[a]).sum::<Vector3<f64>>();
                let dr_tilde = dgrad_p + drho * (accel_c - b_mass) + rho * daccel_c;

                for a in 0..n {
                    let mut dr_u = v0 * dp_dev * big_g[a] + dcoef * g[a] + coef * dg[a];
                    dr_u += rho0 * mass_coeff(n, a, b, v0) * c * e_k;
                    dr_u -= dv / nf * b_vol;
                    let dr_p = -dvdvol / nf
                        + inv_k * dj * m0_p[a]
                        + tau_e * (dv * r_tilde.dot(&g[a]) + v * (dr_tilde.dot(&g[a]) + r_tilde.dot(&dg[a])));
                    for i in 0..dim {
                        system.add(
                            dofs.displacement(nodes[a], i),
                            dofs.displacement(nodes[b], k),
                            dr_u[i],
                        );
                    }
                    system.add(
                        dofs.pressure(nodes[a]),
                        dofs.displacement(nodes[b], k),
                        dr_p,
                    );
                }
            }
        }
    }

    // External traction on the current configuration.
    let coords: Vec<Vector3<f64>> = mesh
        .nodes_reference()
        .iter()
        .zip(&state.u)
        .map(|(x0, u)| x0 + u)
        .collect();
    add_traction_loads(&mut system, mesh, &dofs, bcs, &coords, t)?;
    system.rhs -= residual;
    Ok(system)
}
