//! Vertex LMIs for incremental L2 gains, watermark detection gain,
//! performance loss and δISS of controller/observer.
//!
//! Every builder takes its decision quantities as [`AffExpr`]s, so the same
//! code serves for solving (variables) and for numeric re-checks (constants).
//! Products of two variable expressions are rejected with `NotAffine`.

use crate::error::{Error, Result};
use crate::linalg::{Matrix, ParametricJacobian};
use crate::sdp::{AffExpr, AffineLmiConstraint, BlockBuilder};

pub(crate) fn cst(m: &Matrix) -> AffExpr {
    AffExpr::constant(m.clone())
}

fn check_dims(pj: &ParametricJacobian, b: &Matrix, c: &Matrix, d: &Matrix) -> Result<(usize, usize, usize)> {
    let n = pj.dim();
    let (m, p) = (b.ncols(), c.nrows());
    if b.nrows() != n || c.ncols() != n || d.shape() != (p, m) {
        return Err(Error::ShapeError(format!(
            "inconsistent plant matrices: n={n}, B {}x{}, C {}x{}, D {}x{}",
            b.nrows(),
            b.ncols(),
            c.nrows(),
            c.ncols(),
            d.nrows(),
            d.ncols()
        )));
    }
    Ok((n, m, p))
}

fn expect_shape(e: &AffExpr, shape: (usize, usize), what: &str) -> Result<()> {
    if e.shape() != shape {
        return Err(Error::ShapeError(format!(
            "{what} must be {}x{}, got {}x{}",
            shape.0,
            shape.1,
            e.nrows(),
            e.ncols()
        )));
    }
    Ok(())
}

/// `AᵀX + XA`.
pub(crate) fn lyap(a: &Matrix, x: &AffExpr) -> Result<AffExpr> {
    x.rmul(a)?.sym2()
}

/// `AX + XAᵀ`.
pub(crate) fn lyap_dual(a: &Matrix, x: &AffExpr) -> Result<AffExpr> {
    x.lmul(a)?.sym2()
}

/// Upper-gain vertex LMIs:
/// `[AᵀP+PA+CᵀC, PB+CᵀD; ⋆, DᵀD−γI] ⪯ 0` at every vertex.
pub fn l2plus_lmi(
    pj: &ParametricJacobian,
    b: &Matrix,
    c: &Matrix,
    d: &Matrix,
    p: &AffExpr,
    gamma_sq: &AffExpr,
) -> Result<Vec<AffineLmiConstraint>> {
    storage_lmi(pj, b, c, d, p, gamma_sq, true)
}

/// Lower-gain vertex LMIs:
/// `[AᵀQ+QA+CᵀC, QB+CᵀD; ⋆, DᵀD−γI] ⪰ 0` at every vertex.
pub fn l2minus_lmi(
    pj: &ParametricJacobian,
    b: &Matrix,
    c: &Matrix,
    d: &Matrix,
    q: &AffExpr,
    gamma_sq: &AffExpr,
) -> Result<Vec<AffineLmiConstraint>> {
    storage_lmi(pj, b, c, d, q, gamma_sq, false)
}

fn storage_lmi(
    pj: &ParametricJacobian,
    b: &Matrix,
    c: &Matrix,
    d: &Matrix,
    x: &AffExpr,
    gamma_sq: &AffExpr,
    upper: bool,
) -> Result<Vec<AffineLmiConstraint>> {
    let (n, m, _) = check_dims(pj, b, c, d)?;
    expect_shape(x, (n, n), "Lyapunov matrix")?;
    expect_shape(gamma_sq, (1, 1), "gain")?;
    let ctc = cst(&(c.transpose() * c));
    let off = x.rmul(b)?.try_add(&cst(&(c.transpose() * d)))?;
    let corner = cst(&(d.transpose() * d)).try_sub(&gamma_sq.times_identity(m)?)?;
    pj.vertices()?
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let mut bb = BlockBuilder::new(&[n, m]);
            bb.set(0, 0, lyap(a, x)?.try_add(&ctc)?)?;
            bb.set(0, 1, off.clone())?;
            bb.set(1, 1, corner.clone())?;
            if upper {
                AffineLmiConstraint::nsd(bb.build(), format!("l2plus vertex {i}"))
            } else {
                AffineLmiConstraint::psd(bb.build(), format!("l2minus vertex {i}"))
            }
        })
        .collect()
}

/// Detection-side LMI of the watermarked observer channel (`ξ → ŷ`), PSD at
/// every vertex:
/// `M₁₁ = A_clᵀQ + QA_cl + C_kᵀC_k` with `A_cl = A − BK − L(C − DK)`,
/// `C_k = C − DK`; off-diagonal `Q(B − LD)G + C_kᵀDG`; corner `GᵀDᵀDG − βI`.
#[allow(clippy::too_many_arguments)]
pub fn watermark_l2minus_lmi(
    pj: &ParametricJacobian,
    b: &Matrix,
    c: &Matrix,
    d: &Matrix,
    k: &Matrix,
    l: &Matrix,
    q: &AffExpr,
    g: &AffExpr,
    beta: &AffExpr,
) -> Result<Vec<AffineLmiConstraint>> {
    let (n, m, p) = check_dims(pj, b, c, d)?;
    if k.shape() != (m, n) || l.shape() != (n, p) {
        return Err(Error::ShapeError("K must be m×n and L n×p".into()));
    }
    expect_shape(q, (n, n), "Q")?;
    expect_shape(g, (m, m), "G")?;
    expect_shape(beta, (1, 1), "beta")?;
    let ck = c - d * k;
    let blg = b - l * d;
    let dg = g.lmul(d)?;
    let off = q.mul(&g.lmul(&blg)?)?.try_add(&dg.lmul(&ck.transpose())?)?;
    let corner = dg.transpose().mul(&dg)?.try_sub(&beta.times_identity(m)?)?;
    let ctc = cst(&(ck.transpose() * &ck));
    pj.vertices()?
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let acl = a - b * k - l * &ck;
            let mut bb = BlockBuilder::new(&[n, m]);
            bb.set(0, 0, lyap(&acl, q)?.try_add(&ctc)?)?;
            bb.set(0, 1, off.clone())?;
            bb.set(1, 1, corner.clone())?;
            AffineLmiConstraint::psd(bb.build(), format!("watermark l2minus vertex {i}"))
        })
        .collect()
}

/// Performance-loss LMI of the approximated loop (`ξ → y′`), NSD per vertex,
/// with `K` and `P_s` given separately (one of them must be constant).
#[allow(clippy::too_many_arguments)]
pub fn perf_l2plus_lmi(
    pj: &ParametricJacobian,
    b: &Matrix,
    c: &Matrix,
    d: &Matrix,
    k: &AffExpr,
    ps: &AffExpr,
    g: &AffExpr,
    alpha: f64,
    eps: f64,
) -> Result<Vec<AffineLmiConstraint>> {
    let kp = k.mul(ps)?;
    perf_l2plus_lmi_kp(pj, b, c, d, ps, &kp, g, alpha, eps)
}

/// Same as [`perf_l2plus_lmi`] with the product `Y = K·P_s` supplied as its
/// own expression (the change of variables that makes `K` and `P_s` jointly
/// affine):
/// `[AP+PAᵀ−BY−YᵀBᵀ+εP, BG, PCᵀ−YᵀDᵀ; ⋆, −αI, (DG)ᵀ; ⋆, ⋆, −I] ⪯ 0`.
#[allow(clippy::too_many_arguments)]
pub fn perf_l2plus_lmi_kp(
    pj: &ParametricJacobian,
    b: &Matrix,
    c: &Matrix,
    d: &Matrix,
    ps: &AffExpr,
    kp: &AffExpr,
    g: &AffExpr,
    alpha: f64,
    eps: f64,
) -> Result<Vec<AffineLmiConstraint>> {
    let (n, m, p) = check_dims(pj, b, c, d)?;
    expect_shape(ps, (n, n), "P_s")?;
    expect_shape(kp, (m, n), "K·P_s")?;
    expect_shape(g, (m, m), "G")?;
    let bkp = kp.lmul(b)?.sym2()?;
    let base = bkp.scale(-1.0).try_add(&ps.scale(eps))?;
    let r21 = g.lmul(b)?.transpose();
    let r31 = ps.lmul(c)?.try_sub(&kp.lmul(d)?)?;
    let r32 = g.lmul(d)?;
    pj.vertices()?
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let mut bb = BlockBuilder::new(&[n, m, p]);
            bb.set(0, 0, lyap_dual(a, ps)?.try_add(&base)?)?;
            bb.set(1, 0, r21.clone())?;
            bb.set(1, 1, AffExpr::constant(Matrix::identity(m, m) * -alpha))?;
            bb.set(2, 0, r31.clone())?;
            bb.set(2, 1, r32.clone())?;
            bb.set(2, 2, AffExpr::constant(-Matrix::identity(p, p)))?;
            AffineLmiConstraint::nsd(bb.build(), format!("perf l2plus vertex {i}"))
        })
        .collect()
}

/// Observer δISS condition `AᵀR + RA − CᵀLᵀR − RLC ⪯ −ε₁R` per vertex.
pub fn observer_iss_lmi(
    pj: &ParametricJacobian,
    c: &Matrix,
    r: &AffExpr,
    l: &AffExpr,
    eps1: f64,
) -> Result<Vec<AffineLmiConstraint>> {
    let w = r.mul(l)?;
    observer_iss_lmi_w(pj, c, r, &w, eps1)
}

/// Observer condition with `W = R·L` as its own expression.
pub fn observer_iss_lmi_w(
    pj: &ParametricJacobian,
    c: &Matrix,
    r: &AffExpr,
    w: &AffExpr,
    eps1: f64,
) -> Result<Vec<AffineLmiConstraint>> {
    let n = pj.dim();
    if c.ncols() != n {
        return Err(Error::ShapeError("C must have n columns".into()));
    }
    expect_shape(r, (n, n), "R")?;
    expect_shape(w, (n, c.nrows()), "R·L")?;
    if eps1 <= 0.0 {
        return Err(Error::InvalidArgument("eps1 must be positive".into()));
    }
    let base = w.rmul(c)?.sym2()?.scale(-1.0).try_add(&r.scale(eps1))?;
    pj.vertices()?
        .iter()
        .enumerate()
        .map(|(i, a)| AffineLmiConstraint::nsd(lyap(a, r)?.try_add(&base)?, format!("observer iss vertex {i}")))
        .collect()
}

/// Controller δISS condition `AS + SAᵀ − BKS − SKᵀBᵀ ⪯ −ε₂S` per vertex.
pub fn ctrl_iss_lmi(
    pj: &ParametricJacobian,
    b: &Matrix,
    k: &AffExpr,
    s: &AffExpr,
    eps2: f64,
) -> Result<Vec<AffineLmiConstraint>> {
    let n = pj.dim();
    if b.nrows() != n {
        return Err(Error::ShapeError("B must have n rows".into()));
    }
    expect_shape(s, (n, n), "S")?;
    expect_shape(k, (b.ncols(), n), "K")?;
    if eps2 <= 0.0 {
        return Err(Error::InvalidArgument("eps2 must be positive".into()));
    }
    let ks = k.mul(s)?;
    let base = ks.lmul(b)?.sym2()?.scale(-1.0).try_add(&s.scale(eps2))?;
    pj.vertices()?
        .iter()
        .enumerate()
        .map(|(i, a)| AffineLmiConstraint::nsd(lyap_dual(a, s)?.try_add(&base)?, format!("ctrl iss vertex {i}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::min_eigenvalue;

    fn s(v: f64) -> Matrix {
        Matrix::from_element(1, 1, v)
    }

    fn scalar_pj() -> ParametricJacobian {
        ParametricJacobian::constant(s(-1.0)).unwrap()
    }

    #[test]
    fn l2plus_block_at_p2_gamma4() {
        let cs = l2plus_lmi(&scalar_pj(), &s(1.0), &s(1.0), &s(1.0), &cst(&s(2.0)), &AffExpr::scalar(4.0)).unwrap();
        let m = cs[0].expr.eval(&[]);
        assert_eq!(m, Matrix::from_row_slice(2, 2, &[-3.0, 3.0, 3.0, -3.0]));
        let ev = crate::linalg::SymmetricMatrix::new(m).unwrap().eigenvalues();
        assert!((ev[0] + 6.0).abs() < 1e-12 && ev[1].abs() < 1e-12);
    }

    #[test]
    fn l2minus_block_at_q_minus1() {
        for (gamma, ok) in [(0.5, true), (1.0, true), (1.2, false)] {
            let cs = l2minus_lmi(&scalar_pj(), &s(1.0), &s(1.0), &s(1.0), &cst(&s(-1.0)), &AffExpr::scalar(gamma)).unwrap();
            let m = cs[0].expr.eval(&[]);
            assert_eq!(m, Matrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0 - gamma]));
            assert_eq!(min_eigenvalue(&m).unwrap() >= -1e-12, ok);
        }
    }

    #[test]
    fn watermark_lmi_reduces_to_l2minus() {
        let q = cst(&s(-0.7));
        let a = watermark_l2minus_lmi(&scalar_pj(), &s(1.0), &s(1.0), &s(1.0), &s(0.0), &s(0.0), &q, &cst(&s(1.0)), &AffExpr::scalar(0.3)).unwrap();
        let b = l2minus_lmi(&scalar_pj(), &s(1.0), &s(1.0), &s(1.0), &q, &AffExpr::scalar(0.3)).unwrap();
        assert_eq!(a[0].expr.eval(&[]), b[0].expr.eval(&[]));
    }

    #[test]
    fn bilinear_watermark_rejected() {
        let q = AffExpr::term(0, s(1.0));
        let g = AffExpr::term(1, s(1.0));
        let r = watermark_l2minus_lmi(&scalar_pj(), &s(1.0), &s(1.0), &s(1.0), &s(0.0), &s(0.0), &q, &g, &AffExpr::scalar(0.0));
        assert!(matches!(r, Err(Error::NotAffine(_))));
    }

    #[test]
    fn perf_lmi_rejects_joint_k_ps() {
        let k = AffExpr::term(0, s(1.0));
        let p = AffExpr::term(1, s(1.0));
        let r = perf_l2plus_lmi(&scalar_pj(), &s(1.0), &s(1.0), &s(1.0), &k, &p, &cst(&s(1.0)), 4.0, 1e-3);
        assert!(matches!(r, Err(Error::NotAffine(_))));
    }
}
