//! Sparse linear solves: direct LU for desk-scale systems and restarted
//! GMRES with an ILU(0) preconditioner as the iterative alternative.

use crate::error::{Result, SolidynError};
use crate::fem::LinearSystem;
use nalgebra::DVector;

#[derive(Debug, Clone, PartialEq)]
pub enum LinearSolverConfig {
    Direct,
    Iterative { tol: f64, max_iter: usize, restart: usize },
}

/// Compressed sparse row matrix with duplicate triplets summed.
#[derive(Debug, Clone)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col: Vec<usize>,
    pub val: Vec<f64>,
}

impl Csr {
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Self {
        let mut entries: Vec<(usize, usize, f64)> = triplets.to_vec();
        entries.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col = Vec::with_capacity(entries.len());
        let mut val = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for &(i, j, v) in &entries {
            if last == Some((i, j)) {
                *val.last_mut().unwrap() += v;
            } else {
                col.push(j);
                val.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self { n, row_ptr, col, val }
    }

    pub fn matvec(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.n);
        for i in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.val[k] * x[self.col[k]];
            }
            y[i] = s;
        }
        y
    }
}

/// Solve the assembled system after Dirichlet application.
///
/// Rows are symmetrically equilibrated first: displacement and pressure
/// equations live on vastly different scales (stiffness vs inverse bulk
/// modulus), and without balancing the factorization loses most of its
/// accuracy to roundoff.
pub fn solve_linear_system(system: &LinearSystem, config: &LinearSolverConfig) -> Result<DVector<f64>> {
    let mut a = Csr::from_triplets(system.n, &system.triplets);
    let scale = equilibrate(&mut a);
    let b = DVector::from_fn(system.n, |i, _| system.rhs[i] * scale[i]);
    let mut x = match config {
        LinearSolverConfig::Direct => solve_direct(&a, &b)?,
        LinearSolverConfig::Iterative { tol, max_iter, restart } => {
            let ilu = Ilu0::new(&a)?;
            gmres(&a, &b, &ilu, *tol, *max_iter, *restart)?
        }
    };
    for i in 0..system.n {
        x[i] *= scale[i];
    }
    Ok(x)
}

/// Scale A <- S A S with s_i = 1 / sqrt(max_j |a_ij|); returns s. Symmetric
/// equilibration preserves structural symmetry, and solving S A S y = S b
/// with x = S y reproduces the original solution.
fn equilibrate(a: &mut Csr) -> Vec<f64> {
    let mut s = vec![1.0f64; a.n];
    for i in 0..a.n {
        let mut m = 0.0f64;
        for k in a.row_ptr[i]..a.row_ptr[i + 1] {
            m = m.max(a.val[k].abs());
        }
        if m > 0.0 {
            s[i] = 1.0 / m.sqrt();
        }
    }
    for i in 0..a.n {
        for k in a.row_ptr[i]..a.row_ptr[i + 1] {
            a.val[k] *= s[i] * s[a.col[k]];
        }
    }
    s
}

fn solve_direct(a: &Csr, b: &DVector<f64>) -> Result<DVector<f64>> {
    use faer::prelude::*;
    use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
    use faer::sparse::{SparseColMat, Triplet};

    let mut trips = Vec::with_capacity(a.val.len());
    for i in 0..a.n {
        for k in a.row_ptr[i]..a.row_ptr[i + 1] {
            trips.push(Triplet::new(i, a.col[k], a.val[k]));
        }
    }
    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(a.n, a.n, &trips)
        .map_err(|e| SolidynError::LinearSolver(format!("matrix build failed: {e:?}")))?;
    let symbolic = SymbolicLu::try_new(mat.symbolic())
        .map_err(|e| SolidynError::LinearSolver(format!("symbolic factorization failed: {e:?}")))?;
    let lu = Lu::try_new_with_symbolic(symbolic, mat.rb())
        .map_err(|e| SolidynError::LinearSolver(format!("numeric factorization failed: {e:?}")))?;
    let mut x = Mat::<f64>::zeros(a.n, 1);
    for i in 0..a.n {
        x[(i, 0)] = b[i];
    }
    lu.solve_in_place(x.as_mut());
    let out = DVector::from_fn(a.n, |i, _| x[(i, 0)]);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(SolidynError::LinearSolver("non-finite solution (singular matrix?)".into()));
    }
    Ok(out)
}

/// ILU(0): incomplete LU on the sparsity pattern of A, stored in-place in a
/// copy of the CSR values. Unit lower diagonal is implicit.
struct Ilu0 {
    a: Csr,
    diag: Vec<usize>,
}

impl Ilu0 {
    fn new(a: &Csr) -> Result<Self> {
        let n = a.n;
        let mut f = a.clone();
        let mut diag = vec![usize::MAX; n];
        for i in 0..n {
            for k in f.row_ptr[i]..f.row_ptr[i + 1] {
                if f.col[k] == i {
                    diag[i] = k;
                }
            }
            if diag[i] == usize::MAX {
                return Err(SolidynError::LinearSolver(format!("ILU(0): empty diagonal at row {i}")));
            }
        }
        // IKJ variant restricted to the existing pattern.
        let mut colmap = vec![usize::MAX; n];
        for i in 0..n {
            let (start, end) = (f.row_ptr[i], f.row_ptr[i + 1]);
            for k in start..end {
                colmap[f.col[k]] = k;
            }
            for kk in start..end {
                let k = f.col[kk];
                if k >= i {
                    break;
                }
                let piv = f.val[diag[k]];
                if piv == 0.0 {
                    return Err(SolidynError::LinearSolver(format!("ILU(0): zero pivot at row {k}")));
                }
                let factor = f.val[kk] / piv;
                f.val[kk] = factor;
                for kj in diag[k] + 1..f.row_ptr[k + 1] {
                    let j = f.col[kj];
                    let slot = colmap[j];
                    if slot != usize::MAX {
                        f.val[slot] -= factor * f.val[kj];
                    }
                }
            }
            for k in start..end {
                colmap[f.col[k]] = usize::MAX;
            }
        }
        Ok(Self { a: f, diag })
    }

    fn apply(&self, r: &DVector<f64>) -> DVector<f64> {
        let n = self.a.n;
        let mut y = DVector::zeros(n);
        for i in 0..n {
            let mut s = r[i];
            for k in self.a.row_ptr[i]..self.diag[i] {
                s -= self.a.val[k] * y[self.a.col[k]];
            }
            y[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in self.diag[i] + 1..self.a.row_ptr[i + 1] {
                s -= self.a.val[k] * y[self.a.col[k]];
            }
            y[i] = s / self.a.val[self.diag[i]];
        }
        y
    }
}

/// Left-preconditioned restarted GMRES with Givens rotations.
fn gmres(
    a: &Csr,
    b: &DVector<f64>,
    prec: &Ilu0,
    tol: f64,
    max_iter: usize,
    restart: usize,
) -> Result<DVector<f64>> {
    let n = a.n;
    let m = restart.max(1);
    let mut x = DVector::zeros(n);
    let b_prec_norm = prec.apply(b).norm().max(f64::MIN_POSITIVE);
    let mut total_iters = 0;
    let mut achieved = f64::INFINITY;

    while total_iters < max_iter {
        let r = prec.apply(&(b - a.matvec(&x)));
        let beta = r.norm();
        achieved = beta / b_prec_norm;
        if achieved <= tol {
            return Ok(x);
        }
        let mut v: Vec<DVector<f64>> = vec![r / beta];
        let mut h = vec![vec![0.0f64; 0]; 0];
        let mut cs: Vec<f64> = Vec::new();
        let mut sn: Vec<f64> = Vec::new();
        let mut g = vec![beta];
        let mut k_used = 0;

        for k in 0..m {
            if total_iters >= max_iter {
                break;
            }
            total_iters += 1;
            let mut w = prec.apply(&a.matvec(&v[k]));
            let mut hk = vec![0.0; k + 2];
            for (i, vi) in v.iter().enumerate() {
                hk[i] = w.dot(vi);
                w -= hk[i] * vi;
            }
            hk[k + 1] = w.norm();
            if hk[k + 1] > 1e-300 {
                v.push(&w / hk[k + 1]);
            }
            // Apply accumulated rotations, then form a new one.
            for i in 0..k {
                let t = cs[i] * hk[i] + sn[i] * hk[i + 1];
                hk[i + 1] = -sn[i] * hk[i] + cs[i] * hk[i + 1];
                hk[i] = t;
            }
            let denom = (hk[k] * hk[k] + hk[k + 1] * hk[k + 1]).sqrt();
            let (c, s) = if denom == 0.0 { (1.0, 0.0) } else { (hk[k] / denom, hk[k + 1] / denom) };
            cs.push(c);
            sn.push(s);
            hk[k] = c * hk[k] + s * hk[k + 1];
            hk[k + 1] = 0.0;
            h.push(hk);
            g.push(-s * g[k]);
            g[k] *= c;
            k_used = k + 1;
            achieved = g[k + 1].abs() / b_prec_norm;
            if achieved <= tol {
                break;
            }
            if v.len() <= k + 1 {
                break; // happy breakdown
            }
        }

        // Back substitution on the triangular Hessenberg system.
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[j][i] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (i, yi) in y.iter().enumerate() {
            x += *yi * &v[i];
        }
        if achieved <= tol {
            return Ok(x);
        }
    }
    if achieved <= tol {
        Ok(x)
    } else {
        Err(SolidynError::LinearSolver(format!(
            "GMRES stalled after {total_iters} iterations, relative residual {achieved:.3e}"
        )))
    }
}
