//! Primal-dual interior-point method for dense SDPs.
//!
//! Constraints are normalized to `F(x) = F₀ + Σ xₖ Fₖ ⪰ 0` and every
//! coordinate is confined to the box `|xᵢ| ≤ box_radius`, which keeps the
//! problem bounded and the Schur system nonsingular. A phase-I problem
//! (`min s` s.t. `F(x) + sI ⪰ 0`) decides feasibility and supplies a strictly
//! feasible start; phase II then maximizes the objective. Both phases use
//! HKM search directions with Mehrotra's predictor–corrector.

use nalgebra::Cholesky;

use crate::error::Result;
use crate::linalg::{Matrix, SymmetricMatrix};

use super::problem::{AffineLmiConstraint, SdpProblem, Var};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub feas_tol: f64,
    pub opt_tol: f64,
    /// Interior-point iteration budget per phase.
    pub max_iter: usize,
    pub box_radius: f64,
    /// Margin `μ` used for strict sign hints (`P ⪰ μI`).
    pub strict_margin: f64,
    /// Starting point for phase I (e.g. the previous iterate of an iterative
    /// design loop); clamped into the box.
    pub initial_point: Option<Vec<f64>>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-7,
            opt_tol: 1e-6,
            max_iter: 200,
            box_radius: 1e4,
            strict_margin: 1e-6,
            initial_point: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    IterationLimit,
    NumericalFailure,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "Optimal",
            SolveStatus::Infeasible => "Infeasible",
            SolveStatus::IterationLimit => "IterationLimit",
            SolveStatus::NumericalFailure => "NumericalFailure",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub status: SolveStatus,
    /// Flat coordinate assignment.
    pub x: Vec<f64>,
    pub objective: f64,
    /// Smallest eigenvalue over all normalized constraints (hints included).
    pub margin: f64,
    pub iterations: usize,
    /// Objective at every phase-II iterate.
    pub history: Vec<f64>,
}

impl SdpSolution {
    pub fn value(&self, v: &Var) -> Matrix {
        v.value(&self.x)
    }

    pub fn scalar(&self, v: &Var) -> f64 {
        v.value(&self.x)[(0, 0)]
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

#[derive(Clone)]
struct Block {
    f0: Matrix,
    coefs: Vec<(usize, Matrix)>,
}

impl Block {
    fn from_constraint(c: &AffineLmiConstraint) -> Self {
        let e = c.normalized();
        Self {
            f0: crate::linalg::symmetrize(e.constant_part()),
            coefs: e.terms().iter().map(|(&k, m)| (k, crate::linalg::symmetrize(m))).collect(),
        }
    }

    fn dim(&self) -> usize {
        self.f0.nrows()
    }

    fn eval(&self, x: &[f64]) -> Matrix {
        let mut f = self.f0.clone();
        for (k, m) in &self.coefs {
            let v = x[*k];
            if v != 0.0 {
                f += m * v;
            }
        }
        f
    }

    fn apply(&self, dx: &[f64]) -> Matrix {
        let d = self.dim();
        let mut f = Matrix::zeros(d, d);
        for (k, m) in &self.coefs {
            if dx[*k] != 0.0 {
                f += m * dx[*k];
            }
        }
        f
    }
}

/// Scalar constraint `b + a·x[k] ≥ 0` (the coordinate box).
#[derive(Clone, Copy)]
struct Row {
    k: usize,
    a: f64,
    b: f64,
}

impl Row {
    fn eval(&self, x: &[f64]) -> f64 {
        self.b + self.a * x[self.k]
    }
}

/// `max cᵀx` s.t. every block `⪰ 0` and every row `≥ 0`.
struct Program {
    n: usize,
    blocks: Vec<Block>,
    rows: Vec<Row>,
    c: Vec<f64>,
}

struct Iterate {
    x: Vec<f64>,
    s: Vec<Matrix>,
    z: Vec<Matrix>,
    sl: Vec<f64>,
    zl: Vec<f64>,
}

struct Direction {
    dx: Vec<f64>,
    ds: Vec<Matrix>,
    dz: Vec<Matrix>,
    dsl: Vec<f64>,
    dzl: Vec<f64>,
}

#[derive(Debug, PartialEq, Eq)]
enum Exit {
    Converged,
    EarlyStop,
    IterationLimit,
    Failure,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sym(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Largest `α ≤ 1/τ·…` keeping `S + α·dS ⪰ 0`, via the eigenvalues of
/// `L⁻¹ dS L⁻ᵀ`; `∞` when the direction never leaves the cone.
fn max_step(s: &Matrix, ds: &Matrix) -> Option<f64> {
    let l = Cholesky::new(s.clone())?.l();
    let a = l.solve_lower_triangular(ds)?;
    let w = l.solve_lower_triangular(&a.transpose())?;
    let lmin = SymmetricMatrix::from_symmetrized(&w).ok()?.min_eigenvalue();
    Some(if lmin < 0.0 { -1.0 / lmin } else { f64::INFINITY })
}

/// Solves `H·d = r` by Cholesky on the diagonally equilibrated system, with
/// a growing ridge when it is not numerically positive definite.
fn solve_spd(h: &Matrix, r: &[f64]) -> Option<Vec<f64>> {
    let n = h.nrows();
    let dinv: Vec<f64> = (0..n)
        .map(|i| {
            let d = h[(i, i)];
            if d > 0.0 && d.is_finite() {
                1.0 / d.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let hs = Matrix::from_fn(n, n, |i, j| h[(i, j)] * dinv[i] * dinv[j]);
    let rhs = Matrix::from_iterator(n, 1, r.iter().zip(&dinv).map(|(v, d)| v * d));
    let mut ridge = 0.0;
    for _ in 0..12 {
        let mut hr = hs.clone();
        for i in 0..n {
            hr[(i, i)] += ridge;
        }
        if let Some(ch) = Cholesky::new(hr) {
            let mut d = ch.solve(&rhs);
            // Iterative refinement against the unridged system.
            for _ in 0..2 {
                let res = &rhs - &hs * &d;
                d += ch.solve(&res);
            }
            if d.iter().all(|v| v.is_finite()) {
                return Some(d.iter().zip(&dinv).map(|(v, s)| v * s).collect());
            }
        }
        ridge = if ridge == 0.0 { 1e-14 } else { ridge * 100.0 };
    }
    None
}

struct Settings<'a> {
    max_iter: usize,
    feas_tol: f64,
    /// Gap target relative to `1 + |cᵀx|`.
    gap_tol: f64,
    stop: &'a dyn Fn(&[f64]) -> bool,
}

impl Program {
    fn cone_dim(&self) -> usize {
        self.blocks.iter().map(Block::dim).sum::<usize>() + self.rows.len()
    }

    fn scale(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.coefs.iter().map(|(_, m)| crate::linalg::max_abs(m)).fold(crate::linalg::max_abs(&b.f0), f64::max))
            .fold(0.0, f64::max)
    }

    /// Primal-feasible start at `x` (`S = F(x)` must be positive definite)
    /// with the dual variables on the central path at the level that best
    /// matches the objective.
    fn start(&self, x: Vec<f64>) -> Option<Iterate> {
        let s: Vec<Matrix> = self.blocks.iter().map(|b| b.eval(&x)).collect();
        let sinv: Vec<Matrix> = s.iter().map(|m| Cholesky::new(m.clone()).map(|c| c.inverse())).collect::<Option<_>>()?;
        let sl: Vec<f64> = self.rows.iter().map(|r| r.eval(&x)).collect();
        if sl.iter().any(|v| !(*v > 0.0)) {
            return None;
        }
        let mut g = vec![0.0; self.n];
        for (b, si) in self.blocks.iter().zip(&sinv) {
            for (k, m) in &b.coefs {
                g[*k] += m.dot(si);
            }
        }
        for (r, v) in self.rows.iter().zip(&sl) {
            g[r.k] += r.a / v;
        }
        let (gn, cn) = (dot(&g, &g).sqrt(), dot(&self.c, &self.c).sqrt());
        let mu = if gn > 0.0 && cn > 0.0 { (cn / gn).clamp(1e-6, 1e6) } else { 1.0 };
        Some(Iterate {
            z: sinv.iter().map(|m| m * mu).collect(),
            zl: sl.iter().map(|v| mu / v).collect(),
            x,
            s,
            sl,
        })
    }

    fn mu(&self, it: &Iterate) -> f64 {
        let g: f64 = it.s.iter().zip(&it.z).map(|(s, z)| s.dot(z)).sum::<f64>() + dot(&it.sl, &it.zl);
        g / self.cone_dim().max(1) as f64
    }

    /// Dual residual `c + Σ⟨Fₖ, Z⟩ + Σ aᵣ zᵣ`.
    fn dual_residual(&self, it: &Iterate) -> Vec<f64> {
        let mut r = self.c.clone();
        for (b, z) in self.blocks.iter().zip(&it.z) {
            for (k, m) in &b.coefs {
                r[*k] += m.dot(z);
            }
        }
        for (row, z) in self.rows.iter().zip(&it.zl) {
            r[row.k] += row.a * z;
        }
        r
    }

    fn run(&self, it: &mut Iterate, set: &Settings, mut on_iter: impl FnMut(&[f64])) -> (Exit, usize) {
        let n = self.n;
        let big = 1.0 + self.scale();
        let cnorm = 1.0 + dot(&self.c, &self.c).sqrt();
        // Last iterate meeting the reduced-accuracy test, with its index.
        let mut best: Option<(Vec<f64>, usize)> = None;
        for iter in 0..set.max_iter {
            on_iter(&it.x);
            if (set.stop)(&it.x) {
                return (Exit::EarlyStop, iter);
            }
            let rd: Vec<Matrix> = self.blocks.iter().zip(&it.s).map(|(b, s)| b.eval(&it.x) - s).collect();
            let rl: Vec<f64> = self.rows.iter().zip(&it.sl).map(|(r, s)| r.eval(&it.x) - s).collect();
            let rdual = self.dual_residual(it);
            let mu = self.mu(it);
            let pinf = rd.iter().map(|m| m.norm()).fold(0.0, f64::max).max(rl.iter().fold(0.0, |a, v| a.max(v.abs())));
            let dinf = dot(&rdual, &rdual).sqrt();
            let gap = mu * self.cone_dim() as f64;
            let pobj = dot(&self.c, &it.x);
            let primal_ok = pinf <= set.feas_tol * big;
            let rel_gap = gap / (1.0 + pobj.abs());
            if primal_ok && dinf <= set.feas_tol * cnorm && rel_gap <= set.gap_tol {
                return (Exit::Converged, iter);
            }
            // Variables confined to inactive constraints make the Schur
            // system singular near the optimum, which limits the attainable
            // dual accuracy; the primal iterate stays exactly feasible.
            if primal_ok && dinf <= REDUCED_DUAL_TOL * cnorm && rel_gap <= 10.0 * set.gap_tol {
                best = Some((it.x.clone(), iter));
            }
            if let Some((_, at)) = &best {
                if iter >= at + STALL_ITERS {
                    return self.give_up(it, best.take(), iter);
                }
            }

            // Schur complement M_kj = tr(F_k Z F_j S⁻¹) (+ row terms).
            let Some(sinv) = it.s.iter().map(|m| Cholesky::new(m.clone()).map(|c| c.inverse())).collect::<Option<Vec<_>>>()
            else {
                return self.give_up(it, best.take(), iter);
            };
            let mut m = Matrix::zeros(n, n);
            for (bi, b) in self.blocks.iter().enumerate() {
                let zb = &it.z[bi];
                let gs: Vec<Matrix> = b.coefs.iter().map(|(_, f)| zb * f * &sinv[bi]).collect();
                for (a, (ka, fa)) in b.coefs.iter().enumerate() {
                    for (bidx, (kb, _)) in b.coefs.iter().enumerate().skip(a) {
                        let v = fa.dot(&gs[bidx]);
                        m[(*ka, *kb)] += v;
                        if ka != kb {
                            m[(*kb, *ka)] += v;
                        }
                    }
                }
            }
            for (r, (s, z)) in self.rows.iter().zip(it.sl.iter().zip(&it.zl)) {
                m[(r.k, r.k)] += r.a * r.a * z / s;
            }
            // Z·Rd·S⁻¹ is common to both right-hand sides.
            let zrs: Vec<Matrix> = (0..self.blocks.len()).map(|i| &it.z[i] * &rd[i] * &sinv[i]).collect();

            let direction = |sigma_mu: f64, corr: Option<&Direction>| -> Option<Direction> {
                let mut rhs = self.c.clone();
                let corr_b: Vec<Option<Matrix>> = (0..self.blocks.len())
                    .map(|i| corr.map(|d| &d.dz[i] * &d.ds[i] * &sinv[i]))
                    .collect();
                for (i, b) in self.blocks.iter().enumerate() {
                    for (k, f) in &b.coefs {
                        let mut v = sigma_mu * f.dot(&sinv[i]) - f.dot(&zrs[i].transpose());
                        if let Some(cb) = &corr_b[i] {
                            v -= f.dot(&cb.transpose());
                        }
                        rhs[*k] += v;
                    }
                }
                for (j, r) in self.rows.iter().enumerate() {
                    let (s, z) = (it.sl[j], it.zl[j]);
                    let mut v = sigma_mu / s - z * rl[j] / s;
                    if let Some(d) = corr {
                        v -= d.dzl[j] * d.dsl[j] / s;
                    }
                    rhs[r.k] += r.a * v;
                }
                let dx = solve_spd(&m, &rhs)?;
                let mut ds = Vec::with_capacity(self.blocks.len());
                let mut dz = Vec::with_capacity(self.blocks.len());
                for (i, b) in self.blocks.iter().enumerate() {
                    let dsi = b.apply(&dx) + &rd[i];
                    let mut dzi = &sinv[i] * sigma_mu - &it.z[i] - sym(&(&it.z[i] * &dsi * &sinv[i]));
                    if let Some(cb) = &corr_b[i] {
                        dzi -= sym(cb);
                    }
                    ds.push(dsi);
                    dz.push(sym(&dzi));
                }
                let mut dsl = Vec::with_capacity(self.rows.len());
                let mut dzl = Vec::with_capacity(self.rows.len());
                for (j, r) in self.rows.iter().enumerate() {
                    let (s, z) = (it.sl[j], it.zl[j]);
                    let dsj = r.a * dx[r.k] + rl[j];
                    let mut dzj = sigma_mu / s - z - z * dsj / s;
                    if let Some(d) = corr {
                        dzj -= d.dzl[j] * d.dsl[j] / s;
                    }
                    dsl.push(dsj);
                    dzl.push(dzj);
                }
                Some(Direction { dx, ds, dz, dsl, dzl })
            };
            let steps = |d: &Direction| -> Option<(f64, f64)> {
                let mut ap = f64::INFINITY;
                let mut ad = f64::INFINITY;
                for i in 0..self.blocks.len() {
                    ap = ap.min(max_step(&it.s[i], &d.ds[i])?);
                    ad = ad.min(max_step(&it.z[i], &d.dz[i])?);
                }
                for j in 0..self.rows.len() {
                    if d.dsl[j] < 0.0 {
                        ap = ap.min(-it.sl[j] / d.dsl[j]);
                    }
                    if d.dzl[j] < 0.0 {
                        ad = ad.min(-it.zl[j] / d.dzl[j]);
                    }
                }
                Some((ap, ad))
            };

            let Some(pred) = direction(0.0, None) else {
                return self.give_up(it, best.take(), iter);
            };
            let Some((ap, ad)) = steps(&pred) else {
                return self.give_up(it, best.take(), iter);
            };
            let a = ap.min(ad).min(1.0);
            let (ap, ad) = (a, a);
            let mut mu_aff = 0.0;
            for i in 0..self.blocks.len() {
                mu_aff += (&it.s[i] + &pred.ds[i] * ap).dot(&(&it.z[i] + &pred.dz[i] * ad));
            }
            for j in 0..self.rows.len() {
                mu_aff += (it.sl[j] + ap * pred.dsl[j]) * (it.zl[j] + ad * pred.dzl[j]);
            }
            mu_aff /= self.cone_dim().max(1) as f64;
            let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);
            let Some(d) = direction(sigma * mu, Some(&pred)) else {
                return self.give_up(it, best.take(), iter);
            };
            let Some((ap, ad)) = steps(&d) else {
                return self.give_up(it, best.take(), iter);
            };
            // A common step length keeps the dual residual shrinking at the
            // same rate as the gap.
            let tau = 0.98;
            let alpha = (tau * ap.min(ad)).min(1.0);
            let (ap, ad) = (alpha, alpha);
            if !(ap > 1e-14 && ad > 1e-14) {
                return self.give_up(it, best.take(), iter);
            }
            for k in 0..n {
                it.x[k] += ap * d.dx[k];
            }
            for i in 0..self.blocks.len() {
                it.s[i] += &d.ds[i] * ap;
                it.z[i] += &d.dz[i] * ad;
            }
            for j in 0..self.rows.len() {
                it.sl[j] += ap * d.dsl[j];
                it.zl[j] += ad * d.dzl[j];
            }
            if it.x.iter().any(|v| !v.is_finite()) {
                return self.give_up(it, best.take(), iter);
            }
        }
        match best {
            Some(b) => self.give_up(it, Some(b), set.max_iter),
            None => (Exit::IterationLimit, set.max_iter),
        }
    }

    /// Falls back to the last reduced-accuracy iterate, if any.
    fn give_up(&self, it: &mut Iterate, best: Option<(Vec<f64>, usize)>, iter: usize) -> (Exit, usize) {
        match best {
            Some((x, _)) => {
                it.x = x;
                (Exit::Converged, iter)
            }
            None => (Exit::Failure, iter),
        }
    }
}

const REDUCED_DUAL_TOL: f64 = 1e-5;
const STALL_ITERS: usize = 5;

fn box_rows(n: usize, radius: f64) -> Vec<Row> {
    (0..n)
        .flat_map(|k| [Row { k, a: -1.0, b: radius }, Row { k, a: 1.0, b: radius }])
        .collect()
}

fn min_eig(blocks: &[Block], x: &[f64]) -> f64 {
    blocks
        .iter()
        .map(|b| {
            SymmetricMatrix::from_symmetrized(&b.eval(x))
                .map(|s| s.min_eigenvalue())
                .unwrap_or(f64::NEG_INFINITY)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Solves `problem`; see the module docs for the method.
pub fn solve(problem: &SdpProblem, options: &SolverOptions) -> Result<SdpSolution> {
    let n = problem.num_coords();
    let hints = problem.hint_constraints(options.strict_margin);
    let all: Vec<&AffineLmiConstraint> = problem.constraints().iter().chain(hints.iter()).collect();
    let mut blocks: Vec<Block> = all.iter().map(|c| Block::from_constraint(c)).collect();
    let radius = options.box_radius;
    let lim = 0.9 * radius;

    let mut x: Vec<f64> = match &options.initial_point {
        Some(p) if p.len() == n => p.clone(),
        _ => vec![0.0; n],
    };
    x.iter_mut().for_each(|v| *v = v.clamp(-lim, lim));

    let finish = |status: SolveStatus, x: Vec<f64>, iterations: usize, history: Vec<f64>| {
        let margin = problem.margin(&x, options.strict_margin);
        let objective = problem.objective_value(&x);
        SdpSolution {
            status,
            x,
            objective,
            margin,
            iterations,
            history,
        }
    };

    let program = Program {
        n,
        blocks: blocks.clone(),
        rows: box_rows(n, radius),
        c: problem.cost_vector(),
    };
    let scale = 1.0 + program.scale();
    let mut iterations = 0;
    let mut relax = 0.0;

    // Phase I: maximize −s subject to F(x) + sI ⪰ 0.
    if !(min_eig(&blocks, &x) > 1e-6 * scale) {
        let s0 = (-min_eig(&blocks, &x)).max(0.0) + 1.0;
        let ph1 = Program {
            n: n + 1,
            blocks: blocks
                .iter()
                .map(|b| {
                    let mut coefs = b.coefs.clone();
                    coefs.push((n, Matrix::identity(b.dim(), b.dim())));
                    Block { f0: b.f0.clone(), coefs }
                })
                .collect(),
            rows: box_rows(n + 1, radius.max(2.0 * s0)),
            c: {
                let mut c = vec![0.0; n + 1];
                c[n] = -1.0;
                c
            },
        };
        let mut xs = x.clone();
        xs.push(s0);
        let Some(mut it) = ph1.start(xs) else {
            return Ok(finish(SolveStatus::NumericalFailure, x, 0, Vec::new()));
        };
        let target = -1e-3 * scale;
        let stop = move |y: &[f64]| y[n] < target;
        let settings = Settings {
            max_iter: options.max_iter,
            feas_tol: options.feas_tol,
            gap_tol: 0.1 * options.feas_tol,
            stop: &stop,
        };
        let (exit, k) = ph1.run(&mut it, &settings, |_| {});
        iterations += k;
        let s = it.x[n];
        let mut xs = it.x;
        xs.truncate(n);
        match exit {
            Exit::EarlyStop => {}
            Exit::Converged if s < 0.0 => {}
            Exit::Converged if s < 0.5 * options.feas_tol => {
                // Feasible set with (numerically) empty interior: continue
                // on the constraints relaxed within feas_tol.
                relax = 0.9 * options.feas_tol;
            }
            Exit::Converged => return Ok(finish(SolveStatus::Infeasible, xs, iterations, Vec::new())),
            Exit::IterationLimit => return Ok(finish(SolveStatus::IterationLimit, xs, iterations, Vec::new())),
            Exit::Failure => return Ok(finish(SolveStatus::NumericalFailure, xs, iterations, Vec::new())),
        }
        x = xs;
    }
    if relax > 0.0 {
        for b in &mut blocks {
            let d = b.dim();
            b.f0 += Matrix::identity(d, d) * relax;
        }
    }
    if program.c.iter().all(|v| *v == 0.0) {
        return Ok(finish(SolveStatus::Optimal, x, iterations, Vec::new()));
    }

    // Phase II.
    let program = Program { blocks, ..program };
    let Some(mut it) = program.start(x.clone()) else {
        return Ok(finish(SolveStatus::NumericalFailure, x, iterations, Vec::new()));
    };
    let never = |_: &[f64]| false;
    let settings = Settings {
        max_iter: options.max_iter,
        feas_tol: options.feas_tol,
        gap_tol: 0.5 * options.opt_tol,
        stop: &never,
    };
    let mut history = Vec::new();
    let (exit, k) = program.run(&mut it, &settings, |y| history.push(problem.objective_value(y)));
    iterations += k;
    let status = match exit {
        Exit::Converged | Exit::EarlyStop => SolveStatus::Optimal,
        Exit::IterationLimit => SolveStatus::IterationLimit,
        Exit::Failure => SolveStatus::NumericalFailure,
    };
    let mut sol = finish(status, it.x, iterations, history);
    if sol.status == SolveStatus::Optimal && sol.margin < -options.feas_tol {
        sol.status = SolveStatus::NumericalFailure;
    }
    Ok(sol)
}
