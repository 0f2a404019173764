//! Dense matrix helpers, symmetric eigenvalue routines and polytopic Jacobian
//! inclusions.
//!
//! Every constant matrix in the toolkit is a [`Matrix`] (a dense `f64`
//! `nalgebra::DMatrix`). Lyapunov-type matrices are carried as
//! [`SymmetricMatrix`], which is validated and symmetrized on construction.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// State-derivative callback: writes `f(x)` into `out`.
pub type Dynamics = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// Relative tolerance used to accept a matrix as symmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;

pub fn ensure_finite(m: &Matrix, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidMatrix(format!("{what} has non-finite entries")))
    }
}

pub fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// `(M + Mᵀ) / 2`.
pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// A real symmetric matrix, stored in canonically symmetrized form.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix(Matrix);

impl SymmetricMatrix {
    /// Accepts `m` when it is square, finite and symmetric up to
    /// `1e-12 · (1 + max|m|)`; the stored copy is exactly symmetric.
    pub fn new(m: Matrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::ShapeError(format!(
                "symmetric matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        ensure_finite(&m, "symmetric matrix")?;
        let tol = SYMMETRY_TOL * (1.0 + max_abs(&m));
        let asym = max_abs(&(&m - m.transpose()));
        if asym > tol {
            return Err(Error::InvalidMatrix(format!(
                "asymmetry {asym:.3e} exceeds tolerance {tol:.3e}"
            )));
        }
        Ok(Self(symmetrize(&m)))
    }

    /// Symmetrizes `m` without checking how asymmetric it was.
    pub fn from_symmetrized(m: &Matrix) -> Result<Self> {
        Self::new(symmetrize(m))
    }

    pub fn identity(dim: usize) -> Self {
        Self(Matrix::identity(dim, dim))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.0.clone())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues().last().copied().unwrap_or(0.0)
    }

    pub fn is_positive_definite(&self) -> bool {
        self.0.clone().cholesky().is_some()
    }

    /// `xᵀ M x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for j in 0..n {
            let mut row = 0.0;
            for i in 0..n {
                row += self.0[(i, j)] * x[i];
            }
            acc += row * x[j];
        }
        acc
    }
}

/// Smallest eigenvalue of a symmetric matrix (the matrix is symmetrized
/// first; asymmetry beyond round-off is rejected).
pub fn min_eigenvalue(m: &Matrix) -> Result<f64> {
    Ok(SymmetricMatrix::new(m.clone())?.min_eigenvalue())
}

pub fn max_eigenvalue(m: &Matrix) -> Result<f64> {
    Ok(SymmetricMatrix::new(m.clone())?.max_eigenvalue())
}

/// Largest real part over the eigenvalues of a square matrix.
pub fn spectral_abscissa(a: &Matrix) -> f64 {
    a.complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn is_hurwitz(a: &Matrix) -> bool {
    spectral_abscissa(a) < 0.0
}

/// Spectral norm (largest singular value).
pub fn spectral_norm(a: &Matrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone()
        .singular_values()
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// `y = M x` on plain slices.
pub fn gemv(m: &Matrix, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(m.ncols(), x.len());
    debug_assert_eq!(m.nrows(), y.len());
    y.iter_mut().for_each(|v| *v = 0.0);
    for (j, &xj) in x.iter().enumerate() {
        if xj == 0.0 {
            continue;
        }
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += m[(i, j)] * xj;
        }
    }
}

/// `y += M x` on plain slices.
pub fn gemv_add(m: &Matrix, x: &[f64], y: &mut [f64]) {
    for (j, &xj) in x.iter().enumerate() {
        if xj == 0.0 {
            continue;
        }
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += m[(i, j)] * xj;
        }
    }
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn norm2_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Maximum number of inclusion directions (2^16 vertices).
pub const MAX_DIRECTIONS: usize = 16;

/// Affine parameter-varying cover of a state-dependent Jacobian:
/// `A(ρ) = base + Σ ρⱼ · directions[j]` with `ρⱼ ∈ [loⱼ, hiⱼ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParametricJacobian {
    base: Matrix,
    directions: Vec<Matrix>,
    bounds: Vec<(f64, f64)>,
}

impl ParametricJacobian {
    pub fn new(base: Matrix, directions: Vec<Matrix>, bounds: Vec<(f64, f64)>) -> Result<Self> {
        if !base.is_square() {
            return Err(Error::ShapeError("Jacobian base must be square".into()));
        }
        ensure_finite(&base, "Jacobian base")?;
        if directions.len() != bounds.len() {
            return Err(Error::ShapeError(format!(
                "{} directions but {} bounds",
                directions.len(),
                bounds.len()
            )));
        }
        for (j, d) in directions.iter().enumerate() {
            if d.shape() != base.shape() {
                return Err(Error::ShapeError(format!(
                    "direction {j} is {}x{}, base is {}x{}",
                    d.nrows(),
                    d.ncols(),
                    base.nrows(),
                    base.ncols()
                )));
            }
            ensure_finite(d, "Jacobian direction")?;
        }
        for (j, &(lo, hi)) in bounds.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(Error::InvalidArgument(format!(
                    "direction {j} has invalid bounds [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self {
            base,
            directions,
            bounds,
        })
    }

    /// Constant Jacobian (the LTI case).
    pub fn constant(a: Matrix) -> Result<Self> {
        Self::new(a, Vec::new(), Vec::new())
    }

    pub fn dim(&self) -> usize {
        self.base.nrows()
    }

    pub fn base(&self) -> &Matrix {
        &self.base
    }

    pub fn directions(&self) -> &[Matrix] {
        &self.directions
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn num_directions(&self) -> usize {
        self.directions.len()
    }

    /// Evaluates `A(ρ)`.
    pub fn at(&self, rho: &[f64]) -> Result<Matrix> {
        if rho.len() != self.directions.len() {
            return Err(Error::ShapeError(format!(
                "expected {} parameters, got {}",
                self.directions.len(),
                rho.len()
            )));
        }
        let mut a = self.base.clone();
        for (d, &r) in self.directions.iter().zip(rho) {
            a += d * r;
        }
        Ok(a)
    }

    /// Parameter values at every corner of the box, lexicographic order
    /// (first direction most significant, `lo` before `hi`).
    pub fn corners(&self) -> Result<Vec<Vec<f64>>> {
        let q = self.directions.len();
        if q > MAX_DIRECTIONS {
            return Err(Error::TooManyVertices(q));
        }
        Ok((0..1usize << q)
            .map(|idx| {
                (0..q)
                    .map(|j| {
                        let bit = (idx >> (q - 1 - j)) & 1;
                        if bit == 0 {
                            self.bounds[j].0
                        } else {
                            self.bounds[j].1
                        }
                    })
                    .collect()
            })
            .collect())
    }

    /// `A(ρ)` at every box corner; `2^q` matrices.
    pub fn vertices(&self) -> Result<Vec<Matrix>> {
        self.corners()?.iter().map(|rho| self.at(rho)).collect()
    }
}

/// `jacobian_vertices` as a free function.
pub fn jacobian_vertices(pj: &ParametricJacobian) -> Result<Vec<Matrix>> {
    pj.vertices()
}

/// Central-difference Jacobian with step `1e-6 · (1 + |xᵢ|)`.
pub fn finite_difference_jacobian<F: Fn(&[f64], &mut [f64]) + ?Sized>(f: &F, x: &[f64]) -> Matrix {
    let n = x.len();
    let mut jac = Matrix::zeros(n, n);
    let mut xp = x.to_vec();
    let mut fp = vec![0.0; n];
    let mut fm = vec![0.0; n];
    for i in 0..n {
        let h = 1e-6 * (1.0 + x[i].abs());
        xp[i] = x[i] + h;
        f(&xp, &mut fp);
        xp[i] = x[i] - h;
        f(&xp, &mut fm);
        xp[i] = x[i];
        for r in 0..n {
            jac[(r, i)] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    jac
}

#[derive(Debug, Clone, PartialEq)]
pub struct InclusionViolation {
    pub sample: usize,
    pub state: Vec<f64>,
    /// Least-squares parameter fit for the sampled Jacobian.
    pub rho: Vec<f64>,
    /// Frobenius residual of the best fit.
    pub residual: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct InclusionReport {
    pub checked: usize,
    pub violations: Vec<InclusionViolation>,
}

impl InclusionReport {
    pub fn is_sound(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Verifies, sample by sample, that the finite-difference Jacobian of `f`
/// equals `A(ρ)` for some `ρ` inside the box.
pub fn check_inclusion<F: Fn(&[f64], &mut [f64]) + ?Sized>(
    pj: &ParametricJacobian,
    f: &F,
    samples: &[Vec<f64>],
) -> InclusionReport {
    let q = pj.num_directions();
    let n = pj.dim();
    // Gram matrix of the directions under the Frobenius inner product.
    let mut gram = Matrix::zeros(q, q);
    for a in 0..q {
        for b in 0..q {
            gram[(a, b)] = pj.directions[a].dot(&pj.directions[b]);
        }
    }
    let gram_inv = if q == 0 {
        Matrix::zeros(0, 0)
    } else {
        gram.pseudo_inverse(1e-14).unwrap_or_else(|_| Matrix::zeros(q, q))
    };

    let mut report = InclusionReport::default();
    for (idx, x) in samples.iter().enumerate() {
        report.checked += 1;
        if x.len() != n {
            report.violations.push(InclusionViolation {
                sample: idx,
                state: x.clone(),
                rho: Vec::new(),
                residual: f64::INFINITY,
                reason: format!("state has dimension {}, expected {n}", x.len()),
            });
            continue;
        }
        let jac = finite_difference_jacobian(f, x);
        let target = &jac - &pj.base;
        let rhs = Vector::from_iterator(q, pj.directions.iter().map(|d| d.dot(&target)));
        let rho = &gram_inv * rhs;
        let mut fit = pj.base.clone();
        for (d, r) in pj.directions.iter().zip(rho.iter()) {
            fit += d * *r;
        }
        let residual = (&jac - &fit).norm();
        let tol = 1e-5 * (1.0 + jac.norm());
        let rho: Vec<f64> = rho.iter().copied().collect();
        let slack = 1e-7;
        let out_of_box = rho
            .iter()
            .zip(&pj.bounds)
            .position(|(r, &(lo, hi))| *r < lo - slack || *r > hi + slack);
        let reason = if residual > tol {
            Some(format!("residual {residual:.3e} exceeds {tol:.3e}"))
        } else {
            out_of_box.map(|j| {
                format!(
                    "rho[{j}] = {:.6} outside [{}, {}]",
                    rho[j], pj.bounds[j].0, pj.bounds[j].1
                )
            })
        };
        if let Some(reason) = reason {
            report.violations.push(InclusionViolation {
                sample: idx,
                state: x.clone(),
                rho,
                residual,
                reason,
            });
        }
    }
    report
}
