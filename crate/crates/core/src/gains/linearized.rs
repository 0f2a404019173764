//! Anchor linearizations used by the iterative design loops.
//!
//! Each bilinear condition is replaced by an LMI that is affine in the
//! decision variables once numeric anchors (the previous iterate) are fixed.
//! Quadratic terms `XᵀX` are replaced by their tangent
//! `XᵀX₀ + X₀ᵀX − X₀ᵀX₀ = XᵀX − (X − X₀)ᵀ(X − X₀)`, so the linearized
//! condition implies the original one and coincides with it at the anchors.
//!
//! The `*_expanded` functions evaluate the exact (un-linearized) block
//! matrices numerically; their Schur complements are the original
//! conditions, which is what the anchor and dominance checks compare against.

use crate::error::{Error, Result};
use crate::linalg::{Matrix, ParametricJacobian};
use crate::sdp::{AffExpr, AffineLmiConstraint, BlockBuilder};

use super::lmi::{cst, lyap, lyap_dual};

/// `XᵀX₀ + X₀ᵀX − X₀ᵀX₀`.
fn lin_gram(x: &AffExpr, x0: &Matrix) -> Result<AffExpr> {
    x.transpose().rmul(x0)?.sym2()?.try_sub(&cst(&(x0.transpose() * x0)))
}

/// `XX₀ᵀ + X₀Xᵀ − X₀X₀ᵀ`.
fn lin_outer(x: &AffExpr, x0: &Matrix) -> Result<AffExpr> {
    x.rmul(&x0.transpose())?.sym2()?.try_sub(&cst(&(x0 * x0.transpose())))
}

fn eye(n: usize) -> Matrix {
    Matrix::identity(n, n)
}

fn ieye(n: usize) -> AffExpr {
    AffExpr::identity(n)
}

fn dims(pj: &ParametricJacobian, b: &Matrix, c: &Matrix, d: &Matrix) -> Result<(usize, usize, usize)> {
    let n = pj.dim();
    let (m, p) = (b.ncols(), c.nrows());
    if b.nrows() != n || c.ncols() != n || d.shape() != (p, m) {
        return Err(Error::ShapeError("inconsistent plant matrices".into()));
    }
    Ok((n, m, p))
}

/// Assembles a symmetric block matrix of constants (lower blocks given).
fn assemble(sizes: &[usize], blocks: &[((usize, usize), Matrix)]) -> Result<Matrix> {
    let mut bb = BlockBuilder::new(sizes);
    for ((i, j), m) in blocks {
        bb.set(*i, *j, cst(m))?;
    }
    Ok(bb.build().eval(&[]))
}

// ---------------------------------------------------------------------------
// Detection-side LMI, K and L fixed (watermark gain only).

/// Linearization of the detection LMI around `(Q₀, G₀)` with `K, L` fixed;
/// PSD per vertex:
/// `[M′₁₁, C_kᵀDG, −Q; ⋆, M′₂₂, ((B−LD)G)ᵀ; ⋆, ⋆, I] ⪰ 0`,
/// `M′₁₁ = QQ₀ + Q₀Q − Q₀Q₀ + A_clᵀQ + QA_cl + C_kᵀC_k`,
/// `M′₂₂ = GᵀΦG₀ + G₀ᵀΦG − G₀ᵀΦG₀ − βI`, `Φ = (B−LD)ᵀ(B−LD) + DᵀD`.
#[allow(clippy::too_many_arguments)]
pub fn linearized_prop7(
    pj: &ParametricJacobian,
    b: &Matrix,
    c: &Matrix,
    d: &Matrix,
    k: &Matrix,
    l: &Matrix,
    q0: &Matrix,
    g0: &Matrix,
    q: &AffExpr,
    g: &AffExpr,
    beta: &AffExpr,
) -> Result<Vec<AffineLmiConstraint>> {
    let (n, m, _) = dims(pj, b, c, d)?;
    let ck = c - d * k;
    let bld = b - l * d;
    let phi = bld.transpose() * &bld + d.transpose() * d;
    let g0p = &phi * g0;
    let m22 = g
        .transpose()
        .rmul(&g0p)?
        .sym2()?
        .try_sub(&cst(&(g0.transpose() * &g0p)))?
        .try_sub(&beta.times_identity(m)?)?;
    let quad_q = lin_gram(q, q0)?;
    let r21 = g.lmul(d)?.transpose().rmul(&ck)?;
    let r32 = g.lmul(&bld)?;
    let ctc = cst(&(ck.transpose() * &ck));
    pj.vertices()?
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let acl = a - b * k - l * &ck;
            let mut bb = BlockBuilder::new(&[n, m, n]);
            bb.set(0, 0, quad_q.try_add(&lyap(&acl, q)?)?.try_add(&ctc)?)?;
            bb.set(1, 0, r21.clone())?;
            bb.set(1, 1, m22.clone())?;
            bb.set(2, 0, q.scale(-1.0))?;
            bb.set(2, 1, r32.clone())?;
            bb.set(2, 2, ieye(n))?;
            AffineLmiConstraint::psd(bb.build(), format!("fixed-gain detection vertex {i}"))
        })
        .collect()
}

/// Exact 3×3-block matrix whose Schur complement over the trailing `I` is
/// the detection LMI; equals [`linearized_prop7`] plus
/// `diag((Q−Q₀)², (G−G₀)ᵀΦ(G−G₀), 0)`.
#[allow(clippy::too_many_arguments)]
pub fn prop7_expanded(
    a: &Matrix,
    b: &Matrix,
    c: &Matrix,
    d: &Matrix,
    k: &Matrix,
    l: &Matrix,
    q: &Matrix,
    g: &Matrix,
    beta: f64,
) -> Result<Matrix> {
    let (n, m) = (a.nrows(), b.ncols());
    let ck = c - d * k;
    let bld = b - l * d;
    let acl = a - b * k - l * &ck;
    let phi = bld.transpose() * &bld + d.transpose() * d;
    let m11 = q * q + acl.transpose() * q + q * &acl + ck.transpose() * &ck;
    let m22 = g.transpose() * &phi * g - eye(m) * beta;
    assemble(
        &[n, m, n],
        &[
            ((0, 0), m11),
            ((1, 0), (d * g).transpose() * &ck),
            ((1, 1), m22),
            ((2, 0), -q),
            ((2, 1), &bld * g),
            ((2, 2), eye(n)),
        ],
    )
}

/// Numeric detection matrix (the un-expanded 2×2-block condition).
#[allow(clippy::too_many_arguments)]
pub fn detection_matrix(
    a: &Matrix,
    b: &Matrix,
    c: &Matrix,
    d: &Matrix,
    k: &Matrix,
    l: &Matrix,
    q: &Matrix,
    g: &Matrix,
    beta: f64,
) -> Result<Matrix> {
    let (n, m) = (a.nrows(), b.ncols());
    let ck = c - d * k;
    let acl = a - b * k - l * &ck;
    let dg = d * g;
    assemble(
        &[n, m],
        &[
            ((0, 0), acl.transpose() * q + q * &acl + ck.transpose() * &ck),
            ((1, 0), (q * (b - l * d) * g + ck.transpose() * &dg).transpose()),
            ((1, 1), dg.transpose() * &dg - eye(m) * beta),
        ],
    )
}

// ---------------------------------------------------------------------------
// Detection-side LMI with K, L, G all free (the 11-block matrix Ξ).

/// Which version of the 11-block detection matrix to assemble.
///
/// At the anchors, the Schur complement of the matrix as printed in the
/// source derivation reproduces the detection LMI except for the output term
/// `(C − DK)ᵀ(C − DK)` in the leading block. `Corrected` restores that term
/// (with its `K`-quadratic part linearized), which makes the anchor identity
/// exact; `AsPrinted` omits it. Both are sufficient conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum XiForm {
    #[default]
    Corrected,
    AsPrinted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct XiAnchors {
    pub q0: Matrix,
    pub k0: Matrix,
    pub l0: Matrix,
    pub g0: Matrix,
}

/// Expressions for the decision quantities of the 11-block matrix.
pub struct XiVars<'a> {
    pub q: &'a AffExpr,
    pub k: &'a AffExpr,
    pub l: &'a AffExpr,
    pub g: &'a AffExpr,
    pub beta: &'a AffExpr,
}

/// Block sizes `[n, m, n, n, n, p, p, n, p, n, n]`.
pub fn xi_block_sizes(n: usize, m: usize, p: usize) -> [usize; 11] {
    [n, m, n, n, n, p, p, n, p, n, n]
}

/// The 11-block matrix `Ξ ⪰ 0` per vertex, affine in `(Q, K, L, G, β)`.
pub fn linearized_prop8(
    pj: &ParametricJacobian,
    b: &Matrix,
    c: &Matrix,
    d: &Matrix,
    anchors: &XiAnchors,
    vars: &XiVars<'_>,
    form: XiForm,
) -> Result<Vec<AffineLmiConstraint>> {
    let (n, m, p) = dims(pj, b, c, d)?;
    let XiAnchors { q0, k0, l0, g0 } = anchors;
    let XiVars { q, k, l, g, beta } = *vars;
    if q0.shape() != (n, n) || k0.shape() != (m, n) || l0.shape() != (n, p) || g0.shape() != (m, m) {
        return Err(Error::ShapeError("anchor shapes inconsistent with plant".into()));
    }
    let bk = k.lmul(b)?;
    let dk = k.lmul(d)?;
    let lc = l.rmul(c)?;
    let dg = g.lmul(d)?;
    let bg = g.lmul(b)?;
    let ql0 = q0 * l0;

    // Vertex-independent part of M″₁₁.
    let mut m11 = lin_gram(&bk, &(b * k0))?
        .try_add(&lin_gram(q, q0)?.scale(9.0))?
        .try_add(&lin_gram(&lc, &(l0 * c))?)?
        .try_add(&lin_gram(&dk, &(d * k0))?.scale(2.0))?
        .try_sub(&cst(&(&ql0 * ql0.transpose() * 2.0)))?
        .try_add(&lin_gram(l, l0)?.lmul(&ql0)?.rmul(&ql0.transpose())?)?;
    if form == XiForm::Corrected {
        let ctd = c.transpose() * d;
        m11 = m11
            .try_add(&cst(&(c.transpose() * c)))?
            .try_sub(&k.lmul(&ctd)?.sym2()?)?
            .try_add(&lin_gram(&dk, &(d * k0))?)?;
    }
    let m22 = lin_gram(&dg, &(d * g0))?
        .scale(3.0)
        .try_add(&lin_gram(&bg, &(b * g0))?)?
        .try_sub(&beta.times_identity(m)?)?;
    let m77 = ieye(p).try_add(&lin_gram(l, l0)?)?;
    let r11_1 = q.scale(2.0).try_sub(&l.rmul(&ql0.transpose())?)?;

    let sizes = xi_block_sizes(n, m, p);
    pj.vertices()?
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let mut bb = BlockBuilder::new(&sizes);
            bb.set(0, 0, m11.try_add(&lyap(a, q)?)?)?;
            bb.set(1, 0, dg.transpose().rmul(c)?)?;
            bb.set(1, 1, m22.clone())?;
            bb.set(2, 0, q.try_add(&lc)?)?;
            bb.set(2, 2, ieye(n))?;
            bb.set(3, 0, q.try_add(&bk)?)?;
            bb.set(3, 3, ieye(n))?;
            bb.set(4, 0, q.scale(-1.0))?;
            bb.set(4, 1, bg.clone())?;
            bb.set(4, 4, ieye(n))?;
            bb.set(5, 0, dk.clone())?;
            bb.set(5, 1, dg.clone())?;
            bb.set(5, 5, ieye(p))?;
            bb.set(6, 0, dk.scale(-1.0))?;
            bb.set(6, 6, m77.clone())?;
            bb.set(7, 0, q.clone())?;
            bb.set(7, 6, l.scale(-1.0))?;
            bb.set(7, 7, ieye(n))?;
            bb.set(8, 1, dg.clone())?;
            bb.set(8, 8, m77.clone())?;
            bb.set(9, 0, q.clone())?;
            bb.set(9, 8, l.scale(-1.0))?;
            bb.set(9, 9, ieye(n))?;
            bb.set(10, 0, r11_1.clone())?;
            bb.set(10, 10, ieye(n))?;
            AffineLmiConstraint::psd(bb.build(), format!("xi vertex {i}"))
        })
        .collect()
}

/// Numeric 11-block matrix at vertex `a` with every tangent-linearized Gram
/// term `X₀ᵀX + XᵀX₀ − X₀ᵀX₀` replaced by the exact `XᵀX`; the terms fixed
/// by the anchors (`Q₀L₀`) are kept. Equals [`linearized_prop8`] plus a sum
/// of PSD squares on the diagonal blocks.
#[allow(clippy::too_many_arguments)]
pub fn prop8_expanded(
    a: &Matrix,
    b: &Matrix,
    c: &Matrix,
    d: &Matrix,
    anchors: &XiAnchors,
    q: &Matrix,
    k: &Matrix,
    l: &Matrix,
    g: &Matrix,
    beta: f64,
    form: XiForm,
) -> Result<Matrix> {
    let (n, m, p) = (a.nrows(), b.ncols(), c.nrows());
    let gram = |x: &Matrix| x.transpose() * x;
    let ql0 = &anchors.q0 * &anchors.l0;
    let (bk, dk, lc, dg, bg) = (b * k, d * k, l * c, d * g, b * g);
    let mut m11 = gram(&bk) + gram(q) * 9.0 + gram(&lc) + gram(&dk) * 2.0 - &ql0 * ql0.transpose() * 2.0
        + &ql0 * gram(l) * ql0.transpose()
        + a.transpose() * q
        + q * a;
    if form == XiForm::Corrected {
        let ctdk = c.transpose() * &dk;
        m11 += c.transpose() * c - &ctdk - ctdk.transpose() + gram(&dk);
    }
    let m22 = gram(&dg) * 3.0 + gram(&bg) - eye(m) * beta;
    let m77 = eye(p) + gram(l);
    assemble(
        &xi_block_sizes(n, m, p),
        &[
            ((0, 0), m11),
            ((1, 0), dg.transpose() * c),
            ((1, 1), m22),
            ((2, 0), q + &lc),
            ((2, 2), eye(n)),
            ((3, 0), q + &bk),
            ((3, 3), eye(n)),
            ((4, 0), -q),
            ((4, 1), bg),
            ((4, 4), eye(n)),
            ((5, 0), dk.clone()),
            ((5, 1), dg.clone()),
            ((5, 5), eye(p)),
            ((6, 0), -&dk),
            ((6, 6), m77.clone()),
            ((7, 0), q.clone()),
            ((7, 6), -l),
            ((7, 7), eye(n)),
            ((8, 1), dg),
            ((8, 8), m77),
            ((9, 0), q.clone()),
            ((9, 8), -l),
            ((9, 9), eye(n)),
            ((10, 0), q * 2.0 - l * ql0.transpose()),
            ((10, 10), eye(n)),
        ],
    )
}

/// Schur complement of a symmetric matrix onto its leading `k×k` block.
pub fn leading_schur_complement(m: &Matrix, k: usize) -> Result<Matrix> {
    let n = m.nrows();
    let a = m.view((0, 0), (k, k)).into_owned();
    let b = m.view((0, k), (k, n - k)).into_owned();
    let dm = m.view((k, k), (n - k, n - k)).into_owned();
    let chol = dm
        .cholesky()
        .ok_or_else(|| Error::InvalidMatrix("trailing block is not positive definite".into()))?;
    Ok(&a - &b * chol.solve(&b.transpose()))
}

// ---------------------------------------------------------------------------
// Performance-side LMI with K free.

/// Linearization of the performance LMI around `(P_s0, K₀)`; NSD per vertex
/// with blocks `[n, m, p, n, n]`:
/// `N′₁₁ = AP + PAᵀ − 2(PP₀ + P₀P − P₀P₀) − (BK(BK₀)ᵀ + BK₀(BK)ᵀ − BK₀(BK₀)ᵀ) + εP`,
/// `N′₃₃ = −I − (DK(DK₀)ᵀ + DK₀(DK)ᵀ − DK₀(DK₀)ᵀ)`, couplings `BG`, `PCᵀ`,
/// `(DG)ᵀ`, `P − BK`, `P`, `−DK`.
#[allow(clippy::too_many_arguments)]
pub fn linearized_prop9(
    pj: &ParametricJacobian,
    b: &Matrix,
    c: &Matrix,
    d: &Matrix,
    ps0: &Matrix,
    k0: &Matrix,
    ps: &AffExpr,
    k: &AffExpr,
    g: &AffExpr,
    alpha: f64,
    eps: f64,
) -> Result<Vec<AffineLmiConstraint>> {
    let (n, m, p) = dims(pj, b, c, d)?;
    let bk = k.lmul(b)?;
    let dk = k.lmul(d)?;
    let base = lin_gram(ps, ps0)?
        .scale(-2.0)
        .try_sub(&lin_outer(&bk, &(b * k0))?)?
        .try_add(&ps.scale(eps))?;
    let n33 = ieye(p).scale(-1.0).try_sub(&lin_outer(&dk, &(d * k0))?)?;
    pj.vertices()?
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let mut bb = BlockBuilder::new(&[n, m, p, n, n]);
            bb.set(0, 0, lyap_dual(a, ps)?.try_add(&base)?)?;
            bb.set(1, 0, g.lmul(b)?.transpose())?;
            bb.set(1, 1, AffExpr::constant(eye(m) * -alpha))?;
            bb.set(2, 0, ps.lmul(c)?)?;
            bb.set(2, 1, g.lmul(d)?)?;
            bb.set(2, 2, n33.clone())?;
            bb.set(3, 0, ps.try_sub(&bk)?.transpose())?;
            bb.set(3, 3, ieye(n).scale(-1.0))?;
            bb.set(4, 0, ps.clone())?;
            bb.set(4, 2, dk.scale(-1.0).transpose())?;
            bb.set(4, 4, ieye(n).scale(-1.0))?;
            AffineLmiConstraint::nsd(bb.build(), format!("performance vertex {i}"))
        })
        .collect()
}

/// Exact 5×5-block counterpart of [`linearized_prop9`] (anchor-free).
#[allow(clippy::too_many_arguments)]
pub fn prop9_expanded(
    a: &Matrix,
    b: &Matrix,
    c: &Matrix,
    d: &Matrix,
    ps: &Matrix,
    k: &Matrix,
    g: &Matrix,
    alpha: f64,
    eps: f64,
) -> Result<Matrix> {
    let (n, m, p) = (a.nrows(), b.ncols(), c.nrows());
    let bk = b * k;
    let dk = d * k;
    let n11 = a * ps + ps * a.transpose() - ps * ps * 2.0 - &bk * bk.transpose() + ps * eps;
    let n33 = -eye(p) - &dk * dk.transpose();
    assemble(
        &[n, m, p, n, n],
        &[
            ((0, 0), n11),
            ((1, 0), (b * g).transpose()),
            ((1, 1), eye(m) * -alpha),
            ((2, 0), c * ps),
            ((2, 1), d * g),
            ((2, 2), n33),
            ((3, 0), (ps - &bk).transpose()),
            ((3, 3), -eye(n)),
            ((4, 0), ps.clone()),
            ((4, 2), -dk.transpose()),
            ((4, 4), -eye(n)),
        ],
    )
}

/// Numeric performance matrix (the un-expanded 3×3-block condition).
#[allow(clippy::too_many_arguments)]
pub fn performance_matrix(
    a: &Matrix,
    b: &Matrix,
    c: &Matrix,
    d: &Matrix,
    ps: &Matrix,
    k: &Matrix,
    g: &Matrix,
    alpha: f64,
    eps: f64,
) -> Result<Matrix> {
    let (n, m, p) = (a.nrows(), b.ncols(), c.nrows());
    let bkp = b * k * ps;
    let n11 = a * ps + ps * a.transpose() - &bkp - bkp.transpose() + ps * eps;
    assemble(
        &[n, m, p],
        &[
            ((0, 0), n11),
            ((1, 0), (b * g).transpose()),
            ((1, 1), eye(m) * -alpha),
            ((2, 0), c * ps - d * k * ps),
            ((2, 1), d * g),
            ((2, 2), -eye(p)),
        ],
    )
}

// ---------------------------------------------------------------------------
// Observer δISS condition with L free.

/// Linearization of the observer condition around `(R₀, L₀)`; NSD per vertex:
/// `[U₁₁, R − (LC)ᵀ; ⋆, −I] ⪯ 0` with
/// `U₁₁ = AᵀR + RA − (R₀R + RR₀ − R₀R₀) − ((L₀C)ᵀLC + (LC)ᵀL₀C − (L₀C)ᵀL₀C) + ε₁R`.
pub fn linearized_prop10(
    pj: &ParametricJacobian,
    c: &Matrix,
    r0: &Matrix,
    l0: &Matrix,
    r: &AffExpr,
    l: &AffExpr,
    eps1: f64,
) -> Result<Vec<AffineLmiConstraint>> {
    let n = pj.dim();
    if c.ncols() != n || l0.shape() != (n, c.nrows()) || r0.shape() != (n, n) {
        return Err(Error::ShapeError("inconsistent observer shapes".into()));
    }
    let lc = l.rmul(c)?;
    let base = lin_gram(r, r0)?
        .scale(-1.0)
        .try_sub(&lin_gram(&lc, &(l0 * c))?)?
        .try_add(&r.scale(eps1))?;
    let off = r.try_sub(&lc)?;
    pj.vertices()?
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let mut bb = BlockBuilder::new(&[n, n]);
            bb.set(0, 0, lyap(a, r)?.try_add(&base)?)?;
            bb.set(1, 0, off.clone())?;
            bb.set(1, 1, ieye(n).scale(-1.0))?;
            AffineLmiConstraint::nsd(bb.build(), format!("observer vertex {i}"))
        })
        .collect()
}

/// Exact 2×2-block counterpart of [`linearized_prop10`] (anchor-free).
pub fn prop10_expanded(a: &Matrix, c: &Matrix, r: &Matrix, l: &Matrix, eps1: f64) -> Result<Matrix> {
    let n = a.nrows();
    let lc = l * c;
    let u11 = a.transpose() * r + r * a - r * r - lc.transpose() * &lc + r * eps1;
    assemble(&[n, n], &[((0, 0), u11), ((1, 0), r - &lc), ((1, 1), -eye(n))])
}

/// Numeric observer condition `AᵀR + RA − CᵀLᵀR − RLC + ε₁R` (must be ⪯ 0).
pub fn observer_matrix(a: &Matrix, c: &Matrix, r: &Matrix, l: &Matrix, eps1: f64) -> Matrix {
    let rlc = r * l * c;
    a.transpose() * r + r * a - &rlc - rlc.transpose() + r * eps1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;

    fn s(v: f64) -> Matrix {
        Matrix::from_element(1, 1, v)
    }

    #[test]
    fn fixed_gain_detection_gap_is_exact_on_scalar_instance() {
        let pj = ParametricJacobian::constant(s(-1.0)).unwrap();
        let (b, c, d, k, l) = (s(1.0), s(1.0), s(1.0), s(0.0), s(0.0));
        let (q0, g0) = (s(-0.8), s(1.1));
        let (q, g, beta) = (s(-0.5), s(1.4), 0.3);
        let lin = linearized_prop7(&pj, &b, &c, &d, &k, &l, &q0, &g0, &cst(&q), &cst(&g), &AffExpr::scalar(beta)).unwrap();
        let lin = lin[0].expr.eval(&[]);
        let exp = prop7_expanded(&s(-1.0), &b, &c, &d, &k, &l, &q, &g, beta).unwrap();
        let gap = exp - lin;
        // Φ = 1 + 1 = 2.
        assert!((gap[(0, 0)] - 0.09).abs() < 1e-14);
        assert!((gap[(1, 1)] - 2.0 * 0.09).abs() < 1e-14);
        assert!(max_abs(&gap) - 0.18 < 1e-14);
    }

    #[test]
    fn observer_anchor_schur_is_observer_condition() {
        let a = Matrix::from_row_slice(2, 2, &[-1.0, 0.3, 0.0, -2.0]);
        let pj = ParametricJacobian::constant(a.clone()).unwrap();
        let c = Matrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let r0 = Matrix::from_row_slice(2, 2, &[2.0, 0.1, 0.1, 1.0]);
        let l0 = Matrix::from_row_slice(2, 1, &[0.4, -0.2]);
        let lin = linearized_prop10(&pj, &c, &r0, &l0, &cst(&r0), &cst(&l0), 0.1).unwrap();
        let m = lin[0].expr.eval(&[]);
        // Schur over −I: U₁₁ + XᵀX with X = R − LC.
        let s = -leading_schur_complement(&(-m), 2).unwrap();
        let want = observer_matrix(&a, &c, &r0, &l0, 0.1);
        assert!(max_abs(&(s - want)) < 1e-12);
    }

    #[test]
    fn performance_anchor_schur_is_performance_condition() {
        let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -1.0]);
        let pj = ParametricJacobian::constant(a.clone()).unwrap();
        let b = Matrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let c = Matrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let d = s(0.5);
        let ps0 = Matrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.7]);
        let k0 = Matrix::from_row_slice(1, 2, &[0.3, 0.9]);
        let g = s(0.8);
        let lin = linearized_prop9(&pj, &b, &c, &d, &ps0, &k0, &cst(&ps0), &cst(&k0), &cst(&g), 4.0, 1e-3).unwrap();
        let m = lin[0].expr.eval(&[]);
        let sc = -leading_schur_complement(&(-m), 4).unwrap();
        let want = performance_matrix(&a, &b, &c, &d, &ps0, &k0, &g, 4.0, 1e-3).unwrap();
        assert!(max_abs(&(sc - want)) < 1e-12);
    }

    #[test]
    fn xi_sizes_for_robot_dims() {
        assert_eq!(xi_block_sizes(4, 1, 1).iter().sum::<usize>(), 32);
    }

    #[test]
    fn xi_forms_differ_by_output_term_at_anchor() {
        let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -1.5]);
        let pj = ParametricJacobian::constant(a.clone()).unwrap();
        let b = Matrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let c = Matrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let d = s(1.0);
        let an = XiAnchors {
            q0: Matrix::from_row_slice(2, 2, &[-1.0, 0.1, 0.1, -0.5]),
            k0: Matrix::from_row_slice(1, 2, &[0.5, 0.2]),
            l0: Matrix::from_row_slice(2, 1, &[0.3, 0.6]),
            g0: s(1.2),
        };
        let (q, k, l, g) = (cst(&an.q0), cst(&an.k0), cst(&an.l0), cst(&an.g0));
        let beta = AffExpr::scalar(0.2);
        let vars = XiVars { q: &q, k: &k, l: &l, g: &g, beta: &beta };
        let corr = linearized_prop8(&pj, &b, &c, &d, &an, &vars, XiForm::Corrected).unwrap()[0].expr.eval(&[]);
        let printed = linearized_prop8(&pj, &b, &c, &d, &an, &vars, XiForm::AsPrinted).unwrap()[0].expr.eval(&[]);
        let ck = &c - &d * &an.k0;
        let diff = (&corr - &printed).view((0, 0), (2, 2)).into_owned();
        assert!(max_abs(&(diff - ck.transpose() * &ck)) < 1e-12);
        let sc = leading_schur_complement(&corr, 3).unwrap();
        let exact = detection_matrix(&a, &b, &c, &d, &an.k0, &an.l0, &an.q0, &an.g0, 0.2).unwrap();
        assert!(max_abs(&(sc - exact)) < 1e-10);
    }

    #[test]
    fn joint_detection_expanded_matches_at_anchor_and_dominates_nearby() {
        let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -1.5]);
        let pj = ParametricJacobian::constant(a.clone()).unwrap();
        let b = Matrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let c = Matrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let d = s(1.0);
        let an = XiAnchors {
            q0: Matrix::from_row_slice(2, 2, &[-1.0, 0.1, 0.1, -0.5]),
            k0: Matrix::from_row_slice(1, 2, &[0.5, 0.2]),
            l0: Matrix::from_row_slice(2, 1, &[0.3, 0.6]),
            g0: s(1.2),
        };
        let beta = AffExpr::scalar(0.2);
        let at = |q: &Matrix, k: &Matrix, l: &Matrix, g: &Matrix| {
            let (q, k, l, g) = (cst(q), cst(k), cst(l), cst(g));
            let vars = XiVars { q: &q, k: &k, l: &l, g: &g, beta: &beta };
            linearized_prop8(&pj, &b, &c, &d, &an, &vars, XiForm::Corrected).unwrap()[0].expr.eval(&[])
        };
        let exp = |q: &Matrix, k: &Matrix, l: &Matrix, g: &Matrix| {
            prop8_expanded(&a, &b, &c, &d, &an, q, k, l, g, 0.2, XiForm::Corrected).unwrap()
        };
        assert!(max_abs(&(at(&an.q0, &an.k0, &an.l0, &an.g0) - exp(&an.q0, &an.k0, &an.l0, &an.g0))) < 1e-12);
        let q = &an.q0 + Matrix::from_row_slice(2, 2, &[0.3, -0.2, -0.2, 0.1]);
        let k = &an.k0 + Matrix::from_row_slice(1, 2, &[-0.4, 0.7]);
        let l = &an.l0 + Matrix::from_row_slice(2, 1, &[0.2, -0.5]);
        let g = s(0.4);
        let gap = exp(&q, &k, &l, &g) - at(&q, &k, &l, &g);
        assert!(crate::linalg::min_eigenvalue(&gap).unwrap() > -1e-12);
    }
}
