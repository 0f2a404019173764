//! Trajectory-level checks of incremental dissipation inequalities.
//!
//! A pair of trajectories of the same system, driven by different inputs
//! from different initial states, must satisfy for every horizon `τ`
//!
//! - plus-kind:  `∫‖Δy‖² ≤ γ∫‖Δu‖² + Δx(0)ᵀPΔx(0)`
//! - minus-kind: `∫‖Δy‖² ≥ γ∫‖Δu‖² + Δx(0)ᵀQΔx(0)`

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{gemv_add, Dynamics, Matrix, ParametricJacobian};
use crate::parallel::{map_indexed, Execution};
use crate::plant::NonlinearPlant;

use super::certificate::{CertificateKind, GainCertificate, LoopMatrices};

fn shifted_plant(
    name: &str,
    plant: &NonlinearPlant,
    shift: Matrix,
    b: Matrix,
    c: Matrix,
    d: Matrix,
) -> Result<NonlinearPlant> {
    let pj = plant.jacobian();
    let pj = ParametricJacobian::new(pj.base() + &shift, pj.directions().to_vec(), pj.bounds().to_vec())?;
    let f0 = plant.dynamics_arc();
    let f: Arc<Dynamics> = Arc::new(move |x: &[f64], out: &mut [f64]| {
        f0(x, out);
        gemv_add(&shift, x, out);
    });
    NonlinearPlant::new(name, f, b, c, d, pj)
}

/// Watermark-to-estimate channel of the observer loop:
/// `ẋ = f(x) − BKx − L(C−DK)x + (B−LD)Gξ`, `y = (C−DK)x + DGξ`.
pub fn watermark_channel(plant: &NonlinearPlant, lm: &LoopMatrices) -> Result<NonlinearPlant> {
    lm.check(plant)?;
    let (b, c, d) = (plant.b(), plant.c(), plant.d());
    let ck = c - d * &lm.k;
    let shift = -(b * &lm.k) - &lm.l * &ck;
    shifted_plant("watermark-channel", plant, shift, (b - &lm.l * d) * &lm.g, ck, d * &lm.g)
}

/// Watermark-to-output channel of the state-feedback loop:
/// `ẋ = f(x) − BKx + BGξ`, `y = (C−DK)x + DGξ`.
pub fn performance_channel(plant: &NonlinearPlant, lm: &LoopMatrices) -> Result<NonlinearPlant> {
    lm.check(plant)?;
    let (b, c, d) = (plant.b(), plant.c(), plant.d());
    let shift = -(b * &lm.k);
    shifted_plant("performance-channel", plant, shift, b * &lm.g, c - d * &lm.k, d * &lm.g)
}

/// Sampled input/state/output record on a uniform grid (row-major, one
/// sample per row).
#[derive(Debug, Clone, PartialEq)]
pub struct IoTrajectory {
    pub step: f64,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub y: Vec<f64>,
}

impl IoTrajectory {
    pub fn len(&self) -> usize {
        self.x.len().checked_div(self.n).unwrap_or(self.u.len() / self.m.max(1))
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.x[k * self.n..(k + 1) * self.n]
    }

    pub fn input(&self, k: usize) -> &[f64] {
        &self.u[k * self.m..(k + 1) * self.m]
    }

    pub fn output(&self, k: usize) -> &[f64] {
        &self.y[k * self.p..(k + 1) * self.p]
    }
}

/// Integrates `ẋ = f(x) + Bu(t)`, `y = Cx + Du(t)` with classical RK4,
/// evaluating the input at the stage times.
pub fn simulate_io(
    sys: &NonlinearPlant,
    x0: &[f64],
    input: &(dyn Fn(f64, &mut [f64]) + Sync),
    step: f64,
    steps: usize,
) -> Result<IoTrajectory> {
    let (n, m, p) = (sys.n(), sys.m(), sys.p());
    if x0.len() != n {
        return Err(Error::ShapeError(format!("x0 has length {}, expected {n}", x0.len())));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidArgument(format!("step must be > 0, got {step}")));
    }
    let mut traj = IoTrajectory {
        step,
        n,
        m,
        p,
        x: Vec::with_capacity((steps + 1) * n),
        u: Vec::with_capacity((steps + 1) * m),
        y: Vec::with_capacity((steps + 1) * p),
    };
    let mut x = x0.to_vec();
    let mut u = vec![0.0; m];
    let mut y = vec![0.0; p];
    let rhs = |x: &[f64], u: &[f64], out: &mut [f64]| {
        sys.f(x, out);
        gemv_add(sys.b(), u, out);
    };
    let mut k = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut tmp = vec![0.0; n];
    let mut us = vec![0.0; m];
    for i in 0..=steps {
        let t = i as f64 * step;
        input(t, &mut u);
        sys.output(&x, &u, &mut y);
        traj.x.extend_from_slice(&x);
        traj.u.extend_from_slice(&u);
        traj.y.extend_from_slice(&y);
        if i == steps {
            break;
        }
        rhs(&x, &u, &mut k[0]);
        input(t + 0.5 * step, &mut us);
        for j in 0..n {
            tmp[j] = x[j] + 0.5 * step * k[0][j];
        }
        rhs(&tmp, &us, &mut k[1]);
        for j in 0..n {
            tmp[j] = x[j] + 0.5 * step * k[1][j];
        }
        rhs(&tmp, &us, &mut k[2]);
        input(t + step, &mut us);
        for j in 0..n {
            tmp[j] = x[j] + step * k[2][j];
        }
        rhs(&tmp, &us, &mut k[3]);
        for j in 0..n {
            x[j] += step / 6.0 * (k[0][j] + 2.0 * k[1][j] + 2.0 * k[2][j] + k[3][j]);
        }
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !norm.is_finite() || norm > 1e12 {
            return Err(Error::DivergenceDetected { time: t + step, norm });
        }
    }
    Ok(traj)
}

/// Random sum-of-sinusoids inputs: `u_j(t) = Σ a sin(ωt + φ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SineInput {
    /// Per input channel, `(amplitude, frequency, phase)` triples.
    pub components: Vec<Vec<(f64, f64, f64)>>,
}

impl SineInput {
    pub fn random(rng: &mut impl Rng, m: usize, terms: usize, amplitude: f64, max_freq: f64) -> Self {
        let components = (0..m)
            .map(|_| {
                (0..terms)
                    .map(|_| {
                        (
                            rng.random_range(-amplitude..=amplitude),
                            rng.random_range(0.05 * max_freq..=max_freq),
                            rng.random_range(0.0..std::f64::consts::TAU),
                        )
                    })
                    .collect()
            })
            .collect();
        Self { components }
    }

    pub fn eval(&self, t: f64, out: &mut [f64]) {
        for (o, comps) in out.iter_mut().zip(&self.components) {
            *o = comps.iter().map(|&(a, w, ph)| a * (w * t + ph).sin()).sum();
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairOptions {
    pub count: usize,
    pub seed: u64,
    pub step: f64,
    pub horizon: f64,
    /// Initial states are drawn uniformly from `center ± x0_radius`.
    pub center: Vec<f64>,
    pub x0_radius: f64,
    pub amplitude: f64,
    pub max_freq: f64,
    pub sine_terms: usize,
    pub execution: Execution,
}

impl PairOptions {
    pub fn new(n: usize) -> Self {
        Self {
            count: 100,
            seed: 0,
            step: 1e-3,
            horizon: 10.0,
            center: vec![0.0; n],
            x0_radius: 1.0,
            amplitude: 1.0,
            max_freq: 5.0,
            sine_terms: 3,
            execution: Execution::default(),
        }
    }
}

/// Simulates `count` independent trajectory pairs; pair `i` draws from a
/// generator seeded with `seed + i`.
pub fn random_trajectory_pairs(sys: &NonlinearPlant, opts: &PairOptions) -> Result<Vec<(IoTrajectory, IoTrajectory)>> {
    let n = sys.n();
    if opts.center.len() != n {
        return Err(Error::ShapeError(format!("center has length {}, expected {n}", opts.center.len())));
    }
    let steps = (opts.horizon / opts.step).round() as usize;
    map_indexed(opts.count, opts.execution, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(i as u64));
        let mut one = || {
            let x0: Vec<f64> = opts
                .center
                .iter()
                .map(|c| c + rng.random_range(-opts.x0_radius..=opts.x0_radius))
                .collect();
            let u = SineInput::random(&mut rng, sys.m(), opts.sine_terms, opts.amplitude, opts.max_freq);
            (x0, u)
        };
        let (x1, u1) = one();
        let (x2, u2) = one();
        let a = simulate_io(sys, &x1, &|t, o| u1.eval(t, o), opts.step, steps)?;
        let b = simulate_io(sys, &x2, &|t, o| u2.eval(t, o), opts.step, steps)?;
        Ok((a, b))
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DissipationReport {
    pub pairs: usize,
    /// Minimum slack over all pairs and horizons (non-negative when the
    /// inequality holds).
    pub worst_slack: f64,
    pub worst_pair: Option<usize>,
    /// Worst slack of each pair.
    pub per_pair: Vec<f64>,
}

impl DissipationReport {
    /// Number of pairs whose worst slack falls below `-tol`.
    pub fn violations(&self, tol: f64) -> usize {
        self.per_pair.iter().filter(|s| **s < -tol).count()
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.worst_slack >= -tol
    }
}

fn diff_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn pair_slack(cert: &GainCertificate, a: &IoTrajectory, b: &IoTrajectory) -> Result<f64> {
    if a.step != b.step || a.len() != b.len() || (a.n, a.m, a.p) != (b.n, b.m, b.p) {
        return Err(Error::ShapeError("trajectory pair is not on a common grid".into()));
    }
    if cert.lyapunov().dim() != a.n {
        return Err(Error::ShapeError(format!(
            "certificate has dimension {}, trajectories have n = {}",
            cert.lyapunov().dim(),
            a.n
        )));
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let v0 = cert.storage(a.state(0), b.state(0));
    let g = cert.gamma_sq();
    let sign = match cert.kind() {
        CertificateKind::L2PlusUpper => 1.0,
        CertificateKind::L2MinusLower => -1.0,
    };
    // plus: γ∫Δu² + V(0) − ∫Δy²;  minus: ∫Δy² − γ∫Δu² − V(0)
    let integrand = |k: usize| g * diff_sq(a.input(k), b.input(k)) - diff_sq(a.output(k), b.output(k));
    let mut acc = 0.0;
    let mut prev = integrand(0);
    let mut worst = sign * v0;
    for k in 1..a.len() {
        let cur = integrand(k);
        acc += 0.5 * a.step * (prev + cur);
        prev = cur;
        worst = worst.min(sign * (acc + v0));
    }
    Ok(worst)
}

/// Worst slack of the certificate's dissipation inequality over every pair
/// and every horizon on the sampling grid.
pub fn verify_dissipation(
    cert: &GainCertificate,
    pairs: &[(IoTrajectory, IoTrajectory)],
    exec: Execution,
) -> Result<DissipationReport> {
    let per_pair: Vec<f64> = map_indexed(pairs.len(), exec, |i| pair_slack(cert, &pairs[i].0, &pairs[i].1))
        .into_iter()
        .collect::<Result<_>>()?;
    let worst_pair = (0..per_pair.len()).reduce(|i, j| if per_pair[j] < per_pair[i] { j } else { i });
    Ok(DissipationReport {
        pairs: pairs.len(),
        worst_slack: worst_pair.map_or(0.0, |i| per_pair[i]),
        worst_pair,
        per_pair,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::SymmetricMatrix;

    fn s(v: f64) -> Matrix {
        Matrix::from_element(1, 1, v)
    }

    fn scalar() -> NonlinearPlant {
        NonlinearPlant::linear(s(-1.0), s(1.0), s(1.0), s(1.0)).unwrap()
    }

    fn cert(kind: CertificateKind, v: f64, g: f64) -> GainCertificate {
        GainCertificate::new(kind, SymmetricMatrix::new(s(v)).unwrap(), g).unwrap()
    }

    #[test]
    fn identical_pair_has_zero_slack() {
        let sys = scalar();
        let u = |t: f64, o: &mut [f64]| o[0] = t.sin();
        let a = simulate_io(&sys, &[0.5], &u, 1e-3, 1000).unwrap();
        let r = verify_dissipation(&cert(CertificateKind::L2MinusLower, -1.0, 1.0), &[(a.clone(), a)], Execution::Sequential).unwrap();
        assert_eq!(r.worst_slack, 0.0);
    }

    #[test]
    fn rk4_matches_closed_form() {
        let sys = scalar();
        let a = simulate_io(&sys, &[1.0], &|_, o: &mut [f64]| o[0] = 0.0, 1e-3, 1000).unwrap();
        assert!((a.state(1000)[0] - (-1f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn minus_certificate_holds_and_inflated_one_fails() {
        let sys = scalar();
        let mut o = PairOptions::new(1);
        o.count = 20;
        o.horizon = 5.0;
        let pairs = random_trajectory_pairs(&sys, &o).unwrap();
        let good = verify_dissipation(&cert(CertificateKind::L2MinusLower, -1.0, 1.0), &pairs, Execution::Sequential).unwrap();
        assert!(good.passes(1e-6), "{}", good.worst_slack);
        let bad = verify_dissipation(&cert(CertificateKind::L2MinusLower, -1.0, 2.0), &pairs, Execution::Sequential).unwrap();
        assert!(bad.violations(1e-6) > 0);
    }

    #[test]
    fn plus_certificate_holds() {
        let sys = scalar();
        let mut o = PairOptions::new(1);
        o.count = 20;
        o.horizon = 5.0;
        let pairs = random_trajectory_pairs(&sys, &o).unwrap();
        let r = verify_dissipation(&cert(CertificateKind::L2PlusUpper, 2.0, 4.0), &pairs, Execution::Parallel).unwrap();
        assert!(r.passes(1e-6), "{}", r.worst_slack);
    }

    #[test]
    fn grid_mismatch_rejected() {
        let sys = scalar();
        let z = |_: f64, o: &mut [f64]| o[0] = 0.0;
        let a = simulate_io(&sys, &[0.0], &z, 1e-3, 10).unwrap();
        let b = simulate_io(&sys, &[0.0], &z, 1e-3, 11).unwrap();
        let r = verify_dissipation(&cert(CertificateKind::L2PlusUpper, 2.0, 4.0), &[(a, b)], Execution::Sequential);
        assert!(matches!(r, Err(Error::ShapeError(_))));
    }
}
