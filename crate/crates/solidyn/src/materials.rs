//! Constitutive models and kinematic transforms.
//!
//! All stress tensors are 3x3; planar problems use the plane-strain embedding
//! (zero out-of-plane displacement, nonzero out-of-plane stress), so deviators
//! are always the 3D ones.

use crate::error::{Result, SolidynError};
use nalgebra::Matrix3;

/// Bulk modulus, with an exact representation of the incompressible limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bulk {
    Finite(f64),
    Infinite,
}

impl Bulk {
    /// 1/K; exactly zero for the incompressible limit.
    pub fn inverse(self) -> f64 {
        match self {
            Bulk::Finite(k) => 1.0 / k,
            Bulk::Infinite => 0.0,
        }
    }
}

/// Elastic moduli derived from (E, nu).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moduli {
    pub e: f64,
    pub nu: f64,
    pub mu: f64,
    pub bulk: Bulk,
}

impl Moduli {
    /// First Lame parameter K - 2 mu / 3 (finite bulk only).
    pub fn lambda(&self) -> f64 {
        match self.bulk {
            Bulk::Finite(k) => k - 2.0 * self.mu / 3.0,
            Bulk::Infinite => f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaterialKind {
    LinearElastic,
    NeoHookeanSimoTaylor,
    StVenantKirchhoff,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub kind: MaterialKind,
    pub moduli: Moduli,
    /// Initial density (mass per unit reference volume).
    pub rho0: f64,
}

impl Material {
    pub fn new(kind: MaterialKind, e: f64, nu: f64, rho0: f64) -> Result<Self> {
        if !(rho0 > 0.0) {
            return Err(SolidynError::MaterialRange(format!("rho0 = {rho0} must be positive")));
        }
        Ok(Self { kind, moduli: compute_moduli(e, nu)?, rho0 })
    }
}

/// mu = E / (2(1+nu)); K = E / (3(1-2nu)), infinite at nu = 1/2.
pub fn compute_moduli(e: f64, nu: f64) -> Result<Moduli> {
    if !(e > 0.0) {
        return Err(SolidynError::MaterialRange(format!("E = {e} must be positive")));
    }
    if !(nu > -1.0 && nu <= 0.5) {
        return Err(SolidynError::MaterialRange(format!("nu = {nu} outside (-1, 0.5]")));
    }
    let mu = e / (2.0 * (1.0 + nu));
    let bulk = if nu == 0.5 {
        Bulk::Infinite
    } else {
        Bulk::Finite(e / (3.0 * (1.0 - 2.0 * nu)))
    };
    Ok(Moduli { e, nu, mu, bulk })
}

/// Trace-free part of a 3x3 tensor.
pub fn deviator(a: &Matrix3<f64>) -> Matrix3<f64> {
    a - Matrix3::identity() * (a.trace() / 3.0)
}

/// Small-strain deviatoric stress 2 mu dev[sym(grad_u)].
pub fn linear_dev_stress(grad_u: &Matrix3<f64>, mu: f64) -> Matrix3<f64> {
    let strain = (grad_u + grad_u.transpose()) * 0.5;
    deviator(&strain) * (2.0 * mu)
}

/// Volumetric strain div(u) = tr(grad_u).
pub fn volumetric_strain(grad_u: &Matrix3<f64>) -> f64 {
    grad_u.trace()
}

/// Deformation gradient from the current-frame displacement gradient:
/// F = (I - grad_u)^-1, J = det F.
///
/// In 2D, `grad_u` must be the plane embedding with zero third row/column so
/// that F keeps a unit out-of-plane stretch.
pub fn updated_lagrangian_f(grad_u: &Matrix3<f64>) -> Result<(Matrix3<f64>, f64)> {
    let a = Matrix3::identity() - grad_u;
    let det = a.determinant();
    if !(det > 0.0) {
        return Err(SolidynError::KinematicInversion);
    }
    let f = a.try_inverse().ok_or(SolidynError::KinematicInversion)?;
    Ok((f, 1.0 / det))
}

/// Left Cauchy-Green tensor F F^T with the incremental expansion around the
/// current displacement: the exact (I - grad_u)^-1 part plus
/// 2 eps(du) + grad_du grad_du^T + grad_du grad_u^T + grad_u grad_du^T.
/// Reduces to the exact F F^T when `grad_delta_u` vanishes.
pub fn fft_incremental(
    grad_u: &Matrix3<f64>,
    grad_delta_u: &Matrix3<f64>,
) -> Result<Matrix3<f64>> {
    let (f, _) = updated_lagrangian_f(grad_u)?;
    let base = f * f.transpose();
    let du = grad_delta_u;
    let eps2 = du + du.transpose();
    Ok(base + eps2 + du * du.transpose() + du * grad_u.transpose() + grad_u * du.transpose())
}

/// Pressure of the Simo-Taylor volumetric model, U'(J) = kappa/2 (J - 1/J).
pub fn simo_taylor_pressure(j: f64, kappa: f64) -> Result<f64> {
    if !(j > 0.0) {
        return Err(SolidynError::KinematicInversion);
    }
    Ok(0.5 * kappa * (j - 1.0 / j))
}

/// Simo-Taylor volumetric energy U(J) = kappa/4 (J^2 - 1) - kappa/2 ln J.
pub fn simo_taylor_energy(j: f64, kappa: f64) -> f64 {
    0.25 * kappa * (j * j - 1.0) - 0.5 * kappa * j.ln()
}

/// Neo-Hookean deviatoric Cauchy stress mu J^(-5/3) dev[F F^T].
pub fn neo_hookean_dev_stress(fft: &Matrix3<f64>, j: f64, mu: f64) -> Result<Matrix3<f64>> {
    if !(j > 0.0) {
        return Err(SolidynError::KinematicInversion);
    }
    Ok(deviator(fft) * (mu * j.powf(-5.0 / 3.0)))
}

/// St. Venant-Kirchhoff Cauchy stress and its pressure/deviator split:
/// S = lambda tr(E) I + 2 mu E with E = (F^T F - I)/2, sigma = J^-1 F S F^T.
pub fn svk_stress(f: &Matrix3<f64>, mu: f64, lambda: f64) -> (Matrix3<f64>, f64, Matrix3<f64>) {
    let j = f.determinant();
    let e = (f.transpose() * f - Matrix3::identity()) * 0.5;
    let s = Matrix3::identity() * (lambda * e.trace()) + e * (2.0 * mu);
    let sigma = f * s * f.transpose() / j;
    let p = sigma.trace() / 3.0;
    (sigma, p, deviator(&sigma))
}

/// Mass conservation rho J = rho0.
pub fn update_density(rho0: f64, j: f64) -> f64 {
    rho0 / j
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::{Matrix3, Vector3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn moduli_examples() {
        let m = compute_moduli(1.4e6, 0.4).unwrap();
        assert_relative_eq!(m.mu, 5.0e5, max_relative = 1e-12);

        let m = compute_moduli(250.0, 0.49995).unwrap();
        assert_relative_eq!(m.mu, 83.336, max_relative = 1e-4);
        match m.bulk {
            Bulk::Finite(k) => assert_relative_eq!(k, 8.3333e5, max_relative = 1e-4),
            Bulk::Infinite => panic!(),
        }

        let m = compute_moduli(3.0, 0.0).unwrap();
        assert_relative_eq!(m.mu, 1.5, max_relative = 1e-14);
        assert_relative_eq!(match m.bulk { Bulk::Finite(k) => k, _ => panic!() }, 1.0, max_relative = 1e-14);
    }

    #[test]
    fn incompressible_limit_exact() {
        let m = compute_moduli(250.0, 0.5).unwrap();
        assert_eq!(m.bulk, Bulk::Infinite);
        assert_eq!(m.bulk.inverse(), 0.0);
    }

    #[test]
    fn moduli_range_checks() {
        assert!(compute_moduli(-1.0, 0.3).is_err());
        assert!(compute_moduli(1.0, 0.6).is_err());
        assert!(compute_moduli(1.0, -1.0).is_err());
    }

    #[test]
    fn linear_dev_stress_examples() {
        assert_eq!(linear_dev_stress(&Matrix3::zeros(), 1.0), Matrix3::zeros());

        // Pure spin has no symmetric part.
        let spin = Matrix3::new(0.0, 1.0, 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert!(linear_dev_stress(&spin, 2.0).norm() < 1e-15);

        let eps = 1e-3;
        let g = Matrix3::from_diagonal(&Vector3::new(eps, 0.0, 0.0));
        let s = linear_dev_stress(&g, 1.0);
        assert_relative_eq!(s[(0, 0)], 4.0 * eps / 3.0, max_relative = 1e-13);
        assert_relative_eq!(s[(1, 1)], -2.0 * eps / 3.0, max_relative = 1e-13);
        assert_relative_eq!(s[(2, 2)], -2.0 * eps / 3.0, max_relative = 1e-13);
    }

    #[test]
    fn volumetric_strain_examples() {
        assert_eq!(volumetric_strain(&Matrix3::zeros()), 0.0);
        let g = Matrix3::from_diagonal(&Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(volumetric_strain(&g), 6.0);
        let shear = Matrix3::new(0.0, 0.5, 0.0, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert_eq!(volumetric_strain(&shear), 0.0);
    }

    #[test]
    fn updated_lagrangian_f_examples() {
        let (f, j) = updated_lagrangian_f(&Matrix3::zeros()).unwrap();
        assert_eq!(f, Matrix3::identity());
        assert_eq!(j, 1.0);

        let (f, j) = updated_lagrangian_f(&(Matrix3::identity() * 0.5)).unwrap();
        assert_relative_eq!(f[(0, 0)], 2.0, max_relative = 1e-14);
        assert_relative_eq!(j, 8.0, max_relative = 1e-13);

        assert!(updated_lagrangian_f(&Matrix3::identity()).is_err());
    }

    #[test]
    fn fft_incremental_examples() {
        let fft = fft_incremental(&Matrix3::zeros(), &Matrix3::zeros()).unwrap();
        assert_eq!(fft, Matrix3::identity());

        let eps = 0.01;
        let fft = fft_incremental(&Matrix3::zeros(), &(Matrix3::identity() * eps)).unwrap();
        let expect = 1.0 + 2.0 * eps + eps * eps;
        assert_relative_eq!(fft[(0, 0)], expect, max_relative = 1e-14);
        assert_relative_eq!(fft[(1, 1)], expect, max_relative = 1e-14);

        // Zero increment recovers the exact F F^T.
        let g = Matrix3::identity() * 0.5;
        let (f, _) = updated_lagrangian_f(&g).unwrap();
        let exact = f * f.transpose();
        let inc = fft_incremental(&g, &Matrix3::zeros()).unwrap();
        assert!((inc - exact).norm() <= 1e-12 * exact.norm());
    }

    #[test]
    fn simo_taylor_examples() {
        assert_eq!(simo_taylor_pressure(1.0, 7.0).unwrap(), 0.0);
        assert_relative_eq!(simo_taylor_pressure(2.0, 1.0).unwrap(), 0.75, max_relative = 1e-14);
        assert!(simo_taylor_pressure(0.0, 1.0).is_err());
    }

    #[test]
    fn simo_taylor_matches_energy_derivative() {
        // Centered finite difference of U(J) is the independent oracle.
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let kappa = 2.0;
        let h = 1e-6;
        for _ in 0..10 {
            let j = rng.gen_range(0.5..2.0);
            let fd = (simo_taylor_energy(j + h, kappa) - simo_taylor_energy(j - h, kappa)) / (2.0 * h);
            let p = simo_taylor_pressure(j, kappa).unwrap();
            assert_relative_eq!(p, fd, max_relative = 1e-6);
        }
    }

    #[test]
    fn neo_hookean_dev_examples() {
        let s = neo_hookean_dev_stress(&Matrix3::identity(), 1.0, 1.0).unwrap();
        assert!(s.norm() < 1e-15);

        let fft = Matrix3::from_diagonal(&Vector3::new(4.0, 0.25, 1.0));
        let s = neo_hookean_dev_stress(&fft, 1.0, 1.0).unwrap();
        assert_relative_eq!(s[(0, 0)], 2.25, max_relative = 1e-13);
        assert_relative_eq!(s[(1, 1)], -1.5, max_relative = 1e-13);
        assert_relative_eq!(s[(2, 2)], -0.75, max_relative = 1e-13);
        assert!(s.trace().abs() < 1e-14);
    }

    #[test]
    fn svk_examples() {
        let (sigma, p, dev) = svk_stress(&Matrix3::identity(), 1.0, 1.0);
        assert!(sigma.norm() < 1e-15 && p.abs() < 1e-15 && dev.norm() < 1e-15);

        // Frame indifference: pure rotation is stress free.
        let angle: f64 = 0.7;
        let (s, c) = angle.sin_cos();
        let r = Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0);
        let (sigma, _, _) = svk_stress(&r, 3.0, 2.0);
        assert!(sigma.norm() < 1e-12);
    }

    #[test]
    fn svk_small_strain_consistency() {
        let m = compute_moduli(10.0, 0.3).unwrap();
        let (mu, lambda) = (m.mu, m.lambda());
        let k = match m.bulk { Bulk::Finite(k) => k, _ => panic!() };
        let e = 1e-6;
        let f = Matrix3::from_diagonal(&Vector3::new(1.0 + e, 1.0, 1.0));
        let (sigma, _, _) = svk_stress(&f, mu, lambda);
        let g = Matrix3::from_diagonal(&Vector3::new(e, 0.0, 0.0));
        let linear = linear_dev_stress(&g, mu) + Matrix3::identity() * (k * volumetric_strain(&g));
        assert!((sigma - linear).norm() <= 1e-5 * linear.norm());
    }

    #[test]
    fn svk_objectivity_random_rotations() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = Matrix3::new(1.2, 0.1, 0.0, -0.05, 0.9, 0.2, 0.0, 0.1, 1.1);
        let (sigma, _, _) = svk_stress(&f, 3.0, 2.0);
        for _ in 0..10 {
            let r = random_rotation(&mut rng);
            let (sigma_r, _, _) = svk_stress(&(r * f), 3.0, 2.0);
            let expect = r * sigma * r.transpose();
            assert!((sigma_r - expect).norm() <= 1e-10 * expect.norm());
        }
    }

    #[test]
    fn neo_hookean_small_strain_limit() {
        // For tiny displacement gradients the hyperelastic split matches the
        // linear elastic stress built from the same moduli.
        let m = compute_moduli(17.0, 0.3).unwrap();
        let k = match m.bulk { Bulk::Finite(k) => k, _ => panic!() };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let mut g = Matrix3::zeros();
            for i in 0..3 {
                for j in 0..3 {
                    g[(i, j)] = rng.gen_range(-1.0..1.0) * 1e-5;
                }
            }
            let (f, j) = updated_lagrangian_f(&g).unwrap();
            let fft = f * f.transpose();
            let hyper = neo_hookean_dev_stress(&fft, j, m.mu).unwrap()
                + Matrix3::identity() * simo_taylor_pressure(j, k).unwrap();
            let linear = linear_dev_stress(&g, m.mu)
                + Matrix3::identity() * (k * volumetric_strain(&g));
            assert!((hyper - linear).norm() <= 1e-3 * linear.norm());
        }
    }

    #[test]
    fn split_completeness() {
        let f = Matrix3::new(1.2, 0.1, 0.0, -0.05, 0.9, 0.2, 0.0, 0.1, 1.1);
        let (sigma, p, dev) = svk_stress(&f, 3.0, 2.0);
        let rebuilt = Matrix3::identity() * p + dev;
        assert!((rebuilt - sigma).norm() <= 1e-14 * sigma.norm());
        assert!(dev.trace().abs() <= 1e-13 * sigma.norm());
    }

    #[test]
    fn density_update() {
        assert_eq!(update_density(1000.0, 1.0), 1000.0);
        assert_eq!(update_density(1000.0, 2.0), 500.0);
        for j in [0.5, 0.9, 1.7] {
            assert_relative_eq!(update_density(3.0, j) * j, 3.0, max_relative = 1e-14);
        }
    }

    pub(super) fn random_rotation(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
        let axis = Vector3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        )
        .normalize();
        let angle: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle)
            .matrix()
            .clone_owned()
    }
}
