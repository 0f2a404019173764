//! Gain certificates and direct gain computations from the vertex LMIs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, ParametricJacobian, SymmetricMatrix};
use crate::plant::NonlinearPlant;
use crate::sdp::{bisect_gain, solve, AffExpr, Feasible, SdpProblem, SignHint, SolveStatus, SolverOptions};

use super::lmi::{l2minus_lmi, l2plus_lmi};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CertificateKind {
    /// Upper bound on the incremental L2 gain, storage `V⁺ = ΔxᵀPΔx`, `P ≻ 0`.
    L2PlusUpper,
    /// Lower bound on the incremental L2 gain, storage `V⁻ = ΔxᵀQΔx`, `Q ≺ 0`.
    L2MinusLower,
}

/// A quadratic storage matrix together with the squared gain it certifies.
#[derive(Debug, Clone, PartialEq)]
pub struct GainCertificate {
    kind: CertificateKind,
    lyapunov: SymmetricMatrix,
    gamma_sq: f64,
}

impl GainCertificate {
    pub fn new(kind: CertificateKind, lyapunov: SymmetricMatrix, gamma_sq: f64) -> Result<Self> {
        if !gamma_sq.is_finite() || gamma_sq < 0.0 {
            return Err(Error::InvalidArgument(format!("gamma_sq must be finite and ≥ 0, got {gamma_sq}")));
        }
        let ok = match kind {
            CertificateKind::L2PlusUpper => lyapunov.min_eigenvalue() > 0.0,
            CertificateKind::L2MinusLower => lyapunov.max_eigenvalue() < 0.0,
        };
        if !ok {
            return Err(Error::InvalidMatrix(format!("storage matrix has the wrong sign for {kind:?}")));
        }
        Ok(Self {
            kind,
            lyapunov,
            gamma_sq,
        })
    }

    pub fn kind(&self) -> CertificateKind {
        self.kind
    }

    pub fn lyapunov(&self) -> &SymmetricMatrix {
        &self.lyapunov
    }

    pub fn gamma_sq(&self) -> f64 {
        self.gamma_sq
    }

    /// The (non-squared) gain `√γ`.
    pub fn gain(&self) -> f64 {
        self.gamma_sq.sqrt()
    }

    /// Storage value `Δxᵀ · lyapunov · Δx` for `Δx = x1 − x2`.
    pub fn storage(&self, x1: &[f64], x2: &[f64]) -> f64 {
        let dx: Vec<f64> = x1.iter().zip(x2).map(|(a, b)| a - b).collect();
        self.lyapunov.quadratic_form(&dx)
    }
}

/// Controller, observer and watermark gains of one design.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopMatrices {
    pub k: Matrix,
    pub l: Matrix,
    pub g: Matrix,
    pub epsilon: f64,
}

impl LoopMatrices {
    pub fn new(k: Matrix, l: Matrix, g: Matrix, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!("epsilon must be > 0, got {epsilon}")));
        }
        let m = k.nrows();
        if g.shape() != (m, m) {
            return Err(Error::ShapeError(format!("G must be {m}x{m}, got {}x{}", g.nrows(), g.ncols())));
        }
        if l.nrows() != k.ncols() {
            return Err(Error::ShapeError("K and L disagree on the state dimension".into()));
        }
        Ok(Self { k, l, g, epsilon })
    }

    /// Checks dimensions against a plant.
    pub fn check(&self, plant: &NonlinearPlant) -> Result<()> {
        let (n, m, p) = (plant.n(), plant.m(), plant.p());
        if self.k.shape() != (m, n) || self.l.shape() != (n, p) || self.g.shape() != (m, m) {
            return Err(Error::ShapeError(format!(
                "loop matrices K {}x{}, L {}x{}, G {}x{} do not fit n={n}, m={m}, p={p}",
                self.k.nrows(),
                self.k.ncols(),
                self.l.nrows(),
                self.l.ncols(),
                self.g.nrows(),
                self.g.ncols()
            )));
        }
        Ok(())
    }
}

fn certificate_from(
    sol: &crate::sdp::SdpSolution,
    x: &crate::sdp::Var,
    gamma: f64,
    kind: CertificateKind,
) -> Result<GainCertificate> {
    let lyap = SymmetricMatrix::from_symmetrized(&sol.value(x))?;
    GainCertificate::new(kind, lyap, gamma.max(0.0))
}

fn failure(status: SolveStatus) -> Error {
    Error::SolverFailure { iteration: 0, status: status.to_string() }
}

/// Smallest squared incremental L2⁺ gain certified by the vertex LMIs.
pub fn l2plus_gain(
    pj: &ParametricJacobian,
    b: &Matrix,
    c: &Matrix,
    d: &Matrix,
    options: &SolverOptions,
) -> Result<GainCertificate> {
    let mut prob = SdpProblem::new();
    let p = prob.symmetric("P", pj.dim(), SignHint::PositiveDefinite)?;
    let g = prob.scalar("gamma_sq")?;
    prob.add_constraints(l2plus_lmi(pj, b, c, d, &p.expr(), &g.expr())?)?;
    prob.minimize(g.expr())?;
    let sol = solve(&prob, options)?;
    if !sol.is_optimal() {
        return Err(failure(sol.status));
    }
    certificate_from(&sol, &p, sol.scalar(&g), CertificateKind::L2PlusUpper)
}

/// Largest squared incremental L2⁻ gain certified by the vertex LMIs.
/// Without a direct channel (`D = 0`) the only certifiable level is 0.
pub fn l2minus_gain(
    pj: &ParametricJacobian,
    b: &Matrix,
    c: &Matrix,
    d: &Matrix,
    options: &SolverOptions,
) -> Result<GainCertificate> {
    let mut prob = SdpProblem::new();
    let q = prob.symmetric("Q", pj.dim(), SignHint::NegativeDefinite)?;
    let g = prob.scalar("gamma_sq")?;
    prob.add_constraints(l2minus_lmi(pj, b, c, d, &q.expr(), &g.expr())?)?;
    prob.maximize(g.expr())?;
    let sol = solve(&prob, options)?;
    if !sol.is_optimal() {
        return Err(failure(sol.status));
    }
    let gamma = if d.iter().all(|v| *v == 0.0) { 0.0 } else { sol.scalar(&g) };
    certificate_from(&sol, &q, gamma, CertificateKind::L2MinusLower)
}

/// Feasibility of the L2⁺ LMIs at a fixed level `gamma_sq`.
pub fn l2plus_feasible(
    pj: &ParametricJacobian,
    b: &Matrix,
    c: &Matrix,
    d: &Matrix,
    gamma_sq: f64,
    options: &SolverOptions,
) -> Result<bool> {
    let mut prob = SdpProblem::new();
    let p = prob.symmetric("P", pj.dim(), SignHint::PositiveDefinite)?;
    prob.add_constraints(l2plus_lmi(pj, b, c, d, &p.expr(), &AffExpr::scalar(gamma_sq))?)?;
    Ok(solve(&prob, options)?.is_optimal())
}

/// Feasibility of the L2⁻ LMIs at a fixed level `gamma_sq`.
pub fn l2minus_feasible(
    pj: &ParametricJacobian,
    b: &Matrix,
    c: &Matrix,
    d: &Matrix,
    gamma_sq: f64,
    options: &SolverOptions,
) -> Result<bool> {
    let mut prob = SdpProblem::new();
    let q = prob.symmetric("Q", pj.dim(), SignHint::NegativeDefinite)?;
    prob.add_constraints(l2minus_lmi(pj, b, c, d, &q.expr(), &AffExpr::scalar(gamma_sq))?)?;
    Ok(solve(&prob, options)?.is_optimal())
}

/// L2⁺ level located by bisection over `[lo, hi]` on fixed-level feasibility.
#[allow(clippy::too_many_arguments)]
pub fn l2plus_gain_bisect(
    pj: &ParametricJacobian,
    b: &Matrix,
    c: &Matrix,
    d: &Matrix,
    lo: f64,
    hi: f64,
    tol: f64,
    options: &SolverOptions,
) -> Result<f64> {
    bisect_gain(|g| l2plus_feasible(pj, b, c, d, g, options), lo, hi, tol, Feasible::Above)
}

/// L2⁻ level located by bisection over `[lo, hi]` on fixed-level feasibility.
#[allow(clippy::too_many_arguments)]
pub fn l2minus_gain_bisect(
    pj: &ParametricJacobian,
    b: &Matrix,
    c: &Matrix,
    d: &Matrix,
    lo: f64,
    hi: f64,
    tol: f64,
    options: &SolverOptions,
) -> Result<f64> {
    bisect_gain(|g| l2minus_feasible(pj, b, c, d, g, options), lo, hi, tol, Feasible::Below)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: f64) -> Matrix {
        Matrix::from_element(1, 1, v)
    }

    fn scalar_pj() -> ParametricJacobian {
        ParametricJacobian::constant(s(-1.0)).unwrap()
    }

    #[test]
    fn scalar_plus_gain_is_four() {
        let cert = l2plus_gain(&scalar_pj(), &s(1.0), &s(1.0), &s(1.0), &SolverOptions::default()).unwrap();
        assert!((cert.gamma_sq() - 4.0).abs() < 1e-3, "{}", cert.gamma_sq());
        assert!(cert.lyapunov().is_positive_definite());
    }

    #[test]
    fn scalar_minus_gain_is_one() {
        let cert = l2minus_gain(&scalar_pj(), &s(1.0), &s(1.0), &s(1.0), &SolverOptions::default()).unwrap();
        assert!((cert.gamma_sq() - 1.0).abs() < 1e-3, "{}", cert.gamma_sq());
        assert!(cert.lyapunov().max_eigenvalue() < 0.0);
    }

    #[test]
    fn minus_gain_without_direct_channel_is_zero() {
        let cert = l2minus_gain(&scalar_pj(), &s(1.0), &s(1.0), &s(0.0), &SolverOptions::default()).unwrap();
        assert_eq!(cert.gamma_sq(), 0.0);
    }

    #[test]
    fn bisection_agrees_with_direct_solve() {
        let o = SolverOptions::default();
        let g = l2plus_gain_bisect(&scalar_pj(), &s(1.0), &s(1.0), &s(1.0), 0.0, 10.0, 1e-3, &o).unwrap();
        assert!((g - 4.0).abs() < 2e-3, "{g}");
        let g = l2minus_gain_bisect(&scalar_pj(), &s(1.0), &s(1.0), &s(1.0), 0.0, 10.0, 1e-3, &o).unwrap();
        assert!((g - 1.0).abs() < 2e-3, "{g}");
    }

    #[test]
    fn certificate_sign_checked() {
        let r = GainCertificate::new(CertificateKind::L2PlusUpper, SymmetricMatrix::identity(1), 1.0);
        assert!(r.is_ok());
        let r = GainCertificate::new(CertificateKind::L2MinusLower, SymmetricMatrix::identity(1), 1.0);
        assert!(r.is_err());
    }
}
