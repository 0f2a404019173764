//! Iterative LMI design of the watermark gain `G`, alone or jointly with the
//! controller gain `K` and observer gain `L`, maximizing the detection-side
//! lower gain `β` under the performance-loss budget `α`.
//!
//! Each iteration re-linearizes the bilinear conditions around the previous
//! solution, which stays feasible for the next problem, so the `β` sequence
//! is nondecreasing up to solver tolerance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gains::{
    detection_matrix, performance_matrix, linearized_prop10, linearized_prop7, linearized_prop8, linearized_prop9, observer_iss_lmi_w,
    observer_matrix, perf_l2plus_lmi, perf_l2plus_lmi_kp, watermark_l2minus_lmi, CertificateKind, GainCertificate,
    LoopMatrices, XiAnchors, XiForm, XiVars,
};
use crate::linalg::{is_hurwitz, max_eigenvalue, min_eigenvalue, spectral_norm, Matrix, SymmetricMatrix};
use crate::plant::NonlinearPlant;
use crate::sdp::{solve, AffExpr, BlockBuilder, SdpProblem, SdpSolution, SignHint, SolveStatus, SolverOptions, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DesignMode {
    WatermarkOnly,
    CoDesign,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignOptions {
    pub solver: SolverOptions,
    /// Margin `ε` in the performance LMI.
    pub epsilon: f64,
    /// Observer decay margin `ε₁`.
    pub eps1: f64,
    /// Relative `β` change below which an iteration counts as stalled;
    /// three stalled iterations in a row mark convergence.
    pub conv_tol: f64,
    pub xi_form: XiForm,
}

impl Default for DesignOptions {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            epsilon: 1e-3,
            eps1: 0.1,
            conv_tol: 1e-5,
            xi_form: XiForm::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub index: usize,
    pub beta: f64,
    pub status: SolveStatus,
    /// Smallest constraint eigenvalue at the returned point.
    pub margin: f64,
    /// Smallest constraint eigenvalue of this iteration's problem at the
    /// previous iterate; non-negative up to tolerance by construction.
    pub anchor_margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignReport {
    pub mode: DesignMode,
    pub alpha: f64,
    /// Entry 0 is the bootstrap level; entries `1..` are the iterations.
    pub iterations: Vec<IterationRecord>,
    pub gains: LoopMatrices,
    /// Lower-gain certificate of the watermark-to-estimate channel; its level
    /// is recomputed from the exact (non-linearized) condition.
    pub detection: GainCertificate,
    /// Upper-gain certificate `(P_s⁻¹, α)` of the watermark-to-output channel.
    pub performance: GainCertificate,
    pub ps: SymmetricMatrix,
    /// Observer storage matrix (co-design only).
    pub r: Option<SymmetricMatrix>,
    pub converged: bool,
    /// Iteration index and status when the loop stopped on a solver failure.
    pub terminated: Option<(usize, SolveStatus)>,
}

impl DesignReport {
    pub fn betas(&self) -> Vec<f64> {
        self.iterations.iter().map(|r| r.beta).collect()
    }

    pub fn final_beta(&self) -> f64 {
        self.iterations.last().map_or(f64::NAN, |r| r.beta)
    }
}

/// Largest `β` for which the exact detection LMI holds at fixed
/// `(Q, K, L, G)` on every vertex: the smallest eigenvalue of the Schur
/// complement of its leading block. `-∞` when the leading block is not
/// positive definite at some vertex.
#[allow(clippy::too_many_arguments)]
pub fn certified_beta(
    plant: &NonlinearPlant,
    k: &Matrix,
    l: &Matrix,
    q: &Matrix,
    g: &Matrix,
) -> Result<f64> {
    let (n, b, c, d) = (plant.n(), plant.b(), plant.c(), plant.d());
    let m = b.ncols();
    let mut best = f64::INFINITY;
    for a in plant.jacobian().vertices()? {
        let full = detection_matrix(&a, b, c, d, k, l, q, g, 0.0)?;
        let m11 = full.view((0, 0), (n, n)).into_owned();
        let m12 = full.view((0, n), (n, m)).into_owned();
        let m22 = full.view((n, n), (m, m)).into_owned();
        let Some(ch) = m11.cholesky() else {
            return Ok(f64::NEG_INFINITY);
        };
        let s = &m22 - m12.transpose() * ch.solve(&m12);
        best = best.min(min_eigenvalue(&crate::linalg::symmetrize(&s))?);
    }
    Ok(best)
}

/// Closed-loop stability at every vertex: `(A − BK Hurwitz, A − LC Hurwitz)`.
pub fn vertex_stability(plant: &NonlinearPlant, k: &Matrix, l: &Matrix) -> Result<(bool, bool)> {
    let (b, c) = (plant.b(), plant.c());
    let mut ctrl = true;
    let mut obs = true;
    for a in plant.jacobian().vertices()? {
        ctrl &= is_hurwitz(&(&a - b * k));
        obs &= is_hurwitz(&(&a - l * c));
    }
    Ok((ctrl, obs))
}

/// Largest eigenvalue of the exact performance LMI over the vertices
/// (non-positive when `(P_s, K, G)` certifies the budget `α`).
pub fn performance_residual(
    plant: &NonlinearPlant,
    ps: &Matrix,
    k: &Matrix,
    g: &Matrix,
    alpha: f64,
    eps: f64,
) -> Result<f64> {
    let mut worst = f64::NEG_INFINITY;
    for a in plant.jacobian().vertices()? {
        let e = performance_matrix(&a, plant.b(), plant.c(), plant.d(), ps, k, g, alpha, eps)?;
        worst = worst.max(max_eigenvalue(&e)?);
    }
    Ok(worst)
}

/// Largest eigenvalue of the observer decay condition over the vertices.
pub fn observer_residual(plant: &NonlinearPlant, r: &Matrix, l: &Matrix, eps1: f64) -> Result<f64> {
    let mut worst = f64::NEG_INFINITY;
    for a in plant.jacobian().vertices()? {
        worst = worst.max(max_eigenvalue(&observer_matrix(&a, plant.c(), r, l, eps1))?);
    }
    Ok(worst)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!("alpha must be > 0, got {alpha}")));
    }
    Ok(())
}

fn sym(m: &Matrix) -> Result<SymmetricMatrix> {
    SymmetricMatrix::from_symmetrized(m)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    plant: &NonlinearPlant,
    mode: DesignMode,
    alpha: f64,
    iterations: Vec<IterationRecord>,
    gains: LoopMatrices,
    q: &Matrix,
    ps: &Matrix,
    r: Option<&Matrix>,
    terminated: Option<(usize, SolveStatus)>,
    conv_tol: f64,
) -> Result<DesignReport> {
    let beta = certified_beta(plant, &gains.k, &gains.l, q, &gains.g)?;
    let detection = GainCertificate::new(CertificateKind::L2MinusLower, sym(q)?, beta.max(0.0))?;
    let ps_inv = ps
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidMatrix("P_s is singular".into()))?;
    let performance = GainCertificate::new(CertificateKind::L2PlusUpper, sym(&ps_inv)?, alpha)?;
    let converged = is_converged(&iterations, conv_tol);
    Ok(DesignReport {
        mode,
        alpha,
        iterations,
        gains,
        detection,
        performance,
        ps: sym(ps)?,
        r: r.map(sym).transpose()?,
        converged,
        terminated,
    })
}

fn is_converged(its: &[IterationRecord], tol: f64) -> bool {
    if its.len() < 4 {
        return false;
    }
    its.windows(2)
        .rev()
        .take(3)
        .all(|w| (w[1].beta - w[0].beta).abs() <= tol * w[1].beta.abs().max(1.0))
}

fn record(index: usize, sol: &SdpSolution, beta: f64, anchor_margin: f64) -> IterationRecord {
    IterationRecord {
        index,
        beta,
        status: sol.status,
        margin: sol.margin,
        anchor_margin,
    }
}

/// Watermark-gain design with `K`, `L` fixed: each iteration maximizes `β`
/// over `(G, Q, P_s)` subject to the performance LMI and the detection LMI
/// linearized around the previous `(G, Q)`.
///
/// `q_init` defaults to `−I/‖A₀‖`; when the first problem is not solvable
/// the start is rescaled by 10 and by 0.1 before giving up.
#[allow(clippy::too_many_arguments)]
pub fn algorithm1(
    plant: &NonlinearPlant,
    k: &Matrix,
    l: &Matrix,
    g_init: &Matrix,
    q_init: Option<&SymmetricMatrix>,
    alpha: f64,
    iterations: usize,
    opts: &DesignOptions,
) -> Result<DesignReport> {
    check_alpha(alpha)?;
    let gains = LoopMatrices::new(k.clone(), l.clone(), g_init.clone(), opts.epsilon)?;
    gains.check(plant)?;
    let (n, m) = (plant.n(), plant.m());
    let (pj, b, c, d) = (plant.jacobian(), plant.b(), plant.c(), plant.d());
    let base_q = match q_init {
        Some(q) => {
            if q.max_eigenvalue() >= 0.0 {
                return Err(Error::InvalidMatrix("Q_init must be negative definite".into()));
            }
            q.as_matrix().clone()
        }
        None => Matrix::identity(n, n) * (-1.0 / spectral_norm(pj.base()).max(1e-12)),
    };

    let mut prob = SdpProblem::new();
    let qv = prob.symmetric("Q", n, SignHint::NegativeDefinite)?;
    let gv = prob.matrix("G", m, m)?;
    let bv = prob.scalar("beta")?;
    let psv = prob.symmetric("Ps", n, SignHint::PositiveDefinite)?;
    let perf = perf_l2plus_lmi(pj, b, c, d, &AffExpr::constant(k.clone()), &psv.expr(), &gv.expr(), alpha, opts.epsilon)?;

    let build = |q0: &Matrix, g0: &Matrix| -> Result<SdpProblem> {
        let mut p = prob.clone();
        p.add_constraints(perf.clone())?;
        p.add_constraints(linearized_prop7(pj, b, c, d, k, l, q0, g0, &qv.expr(), &gv.expr(), &bv.expr())?)?;
        p.maximize(bv.expr())?;
        Ok(p)
    };

    // Bootstrap: first solvable start among the Q_init candidates.
    let mut boot = None;
    for scale in [1.0, 10.0, 0.1] {
        let q0 = &base_q * scale;
        let beta0 = certified_beta(plant, k, l, &q0, g_init)?;
        let p = build(&q0, g_init)?;
        let mut x = vec![0.0; p.num_coords()];
        qv.write(&q0, &mut x)?;
        gv.write(g_init, &mut x)?;
        bv.write(&Matrix::from_element(1, 1, if beta0.is_finite() { beta0 - 1.0 } else { -1.0 }), &mut x)?;
        let mut so = opts.solver.clone();
        so.initial_point = Some(x);
        let sol = solve(&p, &so)?;
        if sol.is_optimal() {
            boot = Some((q0, beta0, sol));
            break;
        }
    }
    let Some((q0, beta0, first)) = boot else {
        return Err(Error::InitInfeasible(
            "watermark design problem is not solvable at the initial anchors".into(),
        ));
    };

    let mut records = vec![IterationRecord {
        index: 0,
        // −∞ when the initial storage certifies no level.
        beta: beta0,
        status: SolveStatus::Optimal,
        margin: f64::NAN,
        anchor_margin: f64::NAN,
    }];
    let mut q_cur = q0;
    let mut g_cur = g_init.clone();
    let mut ps_cur = Matrix::identity(n, n);
    let mut terminated = None;
    let mut pending = Some(first);
    let mut x_prev: Option<Vec<f64>> = None;

    for i in 1..=iterations {
        let p = build(&q_cur, &g_cur)?;
        let anchor_margin = x_prev.as_ref().map_or(f64::NAN, |x| p.margin(x, opts.solver.strict_margin));
        let sol = match pending.take() {
            Some(s) => s,
            None => {
                let mut so = opts.solver.clone();
                so.initial_point = x_prev.clone();
                solve(&p, &so)?
            }
        };
        if !sol.is_optimal() {
            records.push(record(i, &sol, f64::NAN, anchor_margin));
            terminated = Some((i, sol.status));
            break;
        }
        let beta = sol.scalar(&bv);
        records.push(record(i, &sol, beta, anchor_margin));
        q_cur = crate::linalg::symmetrize(&sol.value(&qv));
        g_cur = sol.value(&gv);
        ps_cur = crate::linalg::symmetrize(&sol.value(&psv));
        x_prev = Some(sol.x.clone());
        if is_converged(&records[1..], opts.conv_tol) {
            break;
        }
    }
    if x_prev.is_none() {
        // N = 0: keep the bootstrap gains and recover a performance storage.
        ps_cur = bootstrap_ps(plant, k, &g_cur, alpha, opts)?;
    }
    let gains = LoopMatrices::new(k.clone(), l.clone(), g_cur, opts.epsilon)?;
    finish(
        plant,
        DesignMode::WatermarkOnly,
        alpha,
        records,
        gains,
        &q_cur,
        &ps_cur,
        None,
        terminated,
        opts.conv_tol,
    )
}

fn bootstrap_ps(plant: &NonlinearPlant, k: &Matrix, g: &Matrix, alpha: f64, opts: &DesignOptions) -> Result<Matrix> {
    let mut p = SdpProblem::new();
    let ps = p.symmetric("Ps", plant.n(), SignHint::PositiveDefinite)?;
    p.add_constraints(perf_l2plus_lmi(
        plant.jacobian(),
        plant.b(),
        plant.c(),
        plant.d(),
        &AffExpr::constant(k.clone()),
        &ps.expr(),
        &AffExpr::constant(g.clone()),
        alpha,
        opts.epsilon,
    )?)?;
    let sol = solve(&p, &opts.solver)?;
    if !sol.is_optimal() {
        return Err(Error::InitInfeasible("performance budget infeasible for the given gains".into()));
    }
    Ok(crate::linalg::symmetrize(&sol.value(&ps)))
}

/// Adds `κ` with `[κI, Y; Yᵀ, I] ⪰ 0`, i.e. `YYᵀ ⪯ κI`.
fn norm_bound(prob: &mut SdpProblem, y: &AffExpr, name: &str) -> Result<Var> {
    let (r, c) = y.shape();
    let kappa = prob.scalar(name)?;
    let mut bb = BlockBuilder::new(&[r, c]);
    bb.set(0, 0, kappa.expr().times_identity(r)?)?;
    bb.set(0, 1, y.clone())?;
    bb.set(1, 1, AffExpr::identity(c))?;
    prob.psd(bb.build(), &format!("{name} bound"))?;
    Ok(kappa)
}

/// Lower bounds tried on `P_s` in the controller bootstrap; the LMI is not
/// homogeneous in `P_s`, so a tight normalization may be infeasible.
const BOOTSTRAP_FLOORS: [f64; 4] = [1.0, 1e-1, 1e-2, 1e-3];

/// Bootstrap of the co-design: `(K, P_s)` from the performance LMI at
/// `G_init` (change of variables `Y = K·P_s`) and `(L, R)` from the observer
/// decay condition (`W = R·L`). Both problems normalize the storage from
/// below (`P_s ⪰ cI`, `R ⪰ I`) and minimize a bound on `‖Y‖` resp. `‖W‖`,
/// which keeps the gains moderate.
pub fn bootstrap_gains(
    plant: &NonlinearPlant,
    g_init: &Matrix,
    alpha: f64,
    opts: &DesignOptions,
) -> Result<(Matrix, Matrix, Matrix, Matrix)> {
    let (n, m, p) = (plant.n(), plant.m(), plant.p());
    let (pj, b, c, d) = (plant.jacobian(), plant.b(), plant.c(), plant.d());

    let mut controller = None;
    let mut last = SolveStatus::Infeasible;
    for floor in BOOTSTRAP_FLOORS {
        let mut pk = SdpProblem::new();
        let ps = pk.symmetric("Ps", n, SignHint::PositiveDefinite)?;
        let y = pk.matrix("Y", m, n)?;
        pk.add_constraints(perf_l2plus_lmi_kp(
            pj,
            b,
            c,
            d,
            &ps.expr(),
            &y.expr(),
            &AffExpr::constant(g_init.clone()),
            alpha,
            opts.epsilon,
        )?)?;
        pk.psd(ps.expr().try_sub(&AffExpr::identity(n).scale(floor))?, "Ps floor")?;
        let kappa = norm_bound(&mut pk, &y.expr(), "kappa")?;
        pk.minimize(kappa.expr())?;
        let sol = solve(&pk, &opts.solver)?;
        if sol.is_optimal() {
            controller = Some((crate::linalg::symmetrize(&sol.value(&ps)), sol.value(&y)));
            break;
        }
        last = sol.status;
    }
    let Some((ps_v, y_v)) = controller else {
        return Err(Error::InitInfeasible(format!("controller bootstrap: {last}")));
    };
    let ps_inv = ps_v
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidMatrix("P_s is singular".into()))?;
    let k = y_v * ps_inv;

    let mut po = SdpProblem::new();
    let r = po.symmetric("R", n, SignHint::PositiveDefinite)?;
    let w = po.matrix("W", n, p)?;
    po.add_constraints(observer_iss_lmi_w(pj, c, &r.expr(), &w.expr(), opts.eps1)?)?;
    po.psd(r.expr().try_sub(&AffExpr::identity(n))?, "R floor")?;
    let eta = norm_bound(&mut po, &w.expr(), "eta")?;
    po.minimize(eta.expr())?;
    let sol = solve(&po, &opts.solver)?;
    if !sol.is_optimal() {
        return Err(Error::InitInfeasible(format!("observer bootstrap: {}", sol.status)));
    }
    let r_v = crate::linalg::symmetrize(&sol.value(&r));
    let l = r_v
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidMatrix("R is singular".into()))?
        * sol.value(&w);
    Ok((k, ps_v, l, r_v))
}

/// Joint design of `(K, L, G)`: bootstrap, a detection storage `Q` at level
/// `β₀`, then `iterations` re-linearized solves maximizing `β` subject to the
/// 11-block detection condition and the linearized performance and observer
/// conditions.
pub fn algorithm2(
    plant: &NonlinearPlant,
    g_init: &Matrix,
    alpha: f64,
    beta0: f64,
    iterations: usize,
    opts: &DesignOptions,
) -> Result<DesignReport> {
    check_alpha(alpha)?;
    let (n, m, p) = (plant.n(), plant.m(), plant.p());
    if g_init.shape() != (m, m) {
        return Err(Error::ShapeError(format!("G_init must be {m}x{m}")));
    }
    let (pj, b, c, d) = (plant.jacobian(), plant.b(), plant.c(), plant.d());
    let (k0, ps0, l0, r0) = bootstrap_gains(plant, g_init, alpha, opts)?;

    // Detection storage at the bootstrap gains and level β₀.
    let mut pq = SdpProblem::new();
    let qb = pq.symmetric("Q", n, SignHint::NegativeDefinite)?;
    pq.add_constraints(watermark_l2minus_lmi(
        pj,
        b,
        c,
        d,
        &k0,
        &l0,
        &qb.expr(),
        &AffExpr::constant(g_init.clone()),
        &AffExpr::scalar(beta0),
    )?)?;
    let sol = solve(&pq, &opts.solver)?;
    if !sol.is_optimal() {
        return Err(Error::InitInfeasible(format!(
            "detection condition infeasible at beta0 = {beta0} with the bootstrap gains ({})",
            sol.status
        )));
    }
    let q0 = crate::linalg::symmetrize(&sol.value(&qb));

    let mut base = SdpProblem::new();
    let qv = base.symmetric("Q", n, SignHint::NegativeDefinite)?;
    let kv = base.matrix("K", m, n)?;
    let lv = base.matrix("L", n, p)?;
    let gv = base.matrix("G", m, m)?;
    let bv = base.scalar("beta")?;
    let psv = base.symmetric("Ps", n, SignHint::PositiveDefinite)?;
    let rv = base.symmetric("R", n, SignHint::PositiveDefinite)?;
    let (qe, ke, le, ge, be, pse, re) =
        (qv.expr(), kv.expr(), lv.expr(), gv.expr(), bv.expr(), psv.expr(), rv.expr());

    struct Anchor {
        q: Matrix,
        k: Matrix,
        l: Matrix,
        g: Matrix,
        ps: Matrix,
        r: Matrix,
        beta: f64,
    }
    let build = |a: &Anchor| -> Result<SdpProblem> {
        let mut pr = base.clone();
        let anchors = XiAnchors {
            q0: a.q.clone(),
            k0: a.k.clone(),
            l0: a.l.clone(),
            g0: a.g.clone(),
        };
        let vars = XiVars {
            q: &qe,
            k: &ke,
            l: &le,
            g: &ge,
            beta: &be,
        };
        pr.add_constraints(linearized_prop8(pj, b, c, d, &anchors, &vars, opts.xi_form)?)?;
        pr.add_constraints(linearized_prop9(pj, b, c, d, &a.ps, &a.k, &pse, &ke, &ge, alpha, opts.epsilon)?)?;
        pr.add_constraints(linearized_prop10(pj, c, &a.r, &a.l, &re, &le, opts.eps1)?)?;
        pr.maximize(be.clone())?;
        Ok(pr)
    };
    let point = |a: &Anchor, len: usize| -> Result<Vec<f64>> {
        let mut x = vec![0.0; len];
        qv.write(&a.q, &mut x)?;
        kv.write(&a.k, &mut x)?;
        lv.write(&a.l, &mut x)?;
        gv.write(&a.g, &mut x)?;
        bv.write(&Matrix::from_element(1, 1, a.beta), &mut x)?;
        psv.write(&a.ps, &mut x)?;
        rv.write(&a.r, &mut x)?;
        Ok(x)
    };

    let mut cur = Anchor {
        q: q0,
        k: k0,
        l: l0,
        g: g_init.clone(),
        ps: ps0,
        r: r0,
        beta: beta0,
    };
    let mut records = vec![IterationRecord {
        index: 0,
        beta: beta0,
        status: SolveStatus::Optimal,
        margin: sol.margin,
        anchor_margin: f64::NAN,
    }];
    let mut terminated = None;
    for i in 1..=iterations {
        let pr = build(&cur)?;
        let x0 = point(&cur, pr.num_coords())?;
        let anchor_margin = pr.margin(&x0, opts.solver.strict_margin);
        let mut so = opts.solver.clone();
        so.initial_point = Some(x0);
        let sol = solve(&pr, &so)?;
        if !sol.is_optimal() {
            if i == 1 {
                return Err(Error::InitInfeasible(format!("first co-design iteration: {}", sol.status)));
            }
            records.push(record(i, &sol, f64::NAN, anchor_margin));
            terminated = Some((i, sol.status));
            break;
        }
        let beta = sol.scalar(&bv);
        records.push(record(i, &sol, beta, anchor_margin));
        cur = Anchor {
            q: crate::linalg::symmetrize(&sol.value(&qv)),
            k: sol.value(&kv),
            l: sol.value(&lv),
            g: sol.value(&gv),
            ps: crate::linalg::symmetrize(&sol.value(&psv)),
            r: crate::linalg::symmetrize(&sol.value(&rv)),
            beta,
        };
        if is_converged(&records[1..], opts.conv_tol) {
            break;
        }
    }
    let gains = LoopMatrices::new(cur.k.clone(), cur.l.clone(), cur.g.clone(), opts.epsilon)?;
    finish(
        plant,
        DesignMode::CoDesign,
        alpha,
        records,
        gains,
        &cur.q,
        &cur.ps,
        Some(&cur.r),
        terminated,
        opts.conv_tol,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: f64) -> Matrix {
        Matrix::from_element(1, 1, v)
    }

    #[test]
    fn scalar_watermark_design() {
        let plant = NonlinearPlant::linear(s(-1.0), s(1.0), s(1.0), s(1.0)).unwrap();
        let o = DesignOptions::default();
        let r = algorithm1(&plant, &s(0.0), &s(0.0), &s(0.5), None, 4.0, 20, &o).unwrap();
        let betas = r.betas();
        for w in betas[1..].windows(2) {
            assert!(w[1] >= w[0] - 1e-5, "{betas:?} {:?}", r.iterations);
        }
        assert!((r.final_beta() - 1.0).abs() < 1e-2, "{betas:?} {:?}", r.iterations);
        assert!((r.gains.g[(0, 0)].abs() - 1.0).abs() < 2e-2);
    }

    #[test]
    fn no_watermark_path_gives_zero_beta() {
        let plant = NonlinearPlant::linear(s(-1.0), s(0.0), s(1.0), s(0.0)).unwrap();
        let r = algorithm1(&plant, &s(0.0), &s(0.0), &s(1.0), None, 4.0, 5, &DesignOptions::default()).unwrap();
        assert!(r.final_beta().abs() < 1e-4, "{:?}", r.betas());
    }

    #[test]
    fn zero_iterations_keep_initial_gains() {
        let plant = NonlinearPlant::linear(s(-1.0), s(1.0), s(1.0), s(1.0)).unwrap();
        let r = algorithm1(&plant, &s(0.0), &s(0.0), &s(0.5), None, 4.0, 0, &DesignOptions::default()).unwrap();
        assert_eq!(r.iterations.len(), 1);
        assert_eq!(r.gains.g, s(0.5));
    }
}
