//! Single-link flexible-joint robot benchmark.
//!
//! The measured output has a direct feedthrough `D = 1`. The published
//! feedthrough is written as a 4-vector for a scalar output; only its first
//! entry is dimensionally meaningful, so it is used as the scalar `D`.

use std::sync::Arc;

use crate::linalg::{Dynamics, Matrix, ParametricJacobian};
use crate::plant::NonlinearPlant;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobotParameters {
    pub k: f64,
    pub m: f64,
    pub g: f64,
    pub d: f64,
    pub b: f64,
    pub f1: f64,
    pub f2: f64,
    pub j1: f64,
    pub j2: f64,
}

impl Default for RobotParameters {
    fn default() -> Self {
        Self {
            k: 0.4,
            m: 0.1,
            g: 9.81,
            d: 0.1,
            b: 2.0,
            f1: 0.1,
            f2: 0.7,
            j1: 0.15,
            j2: 0.2,
        }
    }
}

/// The robot with default parameters.
pub fn builtin_robot_model() -> NonlinearPlant {
    robot_model(RobotParameters::default())
}

/// Robot plant `ẋ = f(x) + Bu`, `y = x₁ + u`. The only nonlinearity is the
/// gravity term; its Jacobian `(mgd/J₂)·sin x₁` is covered by one direction
/// with `ρ ∈ [−1, 1]`.
pub fn robot_model(p: RobotParameters) -> NonlinearPlant {
    let RobotParameters { k, m, g, d, b, f1, f2, j1, j2 } = p;
    let grav = m * g * d / j2;
    let f: Arc<Dynamics> = Arc::new(move |x: &[f64], out: &mut [f64]| {
        out[0] = x[1];
        out[1] = -k / j2 * x[0] - grav * x[0].cos() - f2 / j2 * x[1] + k / (j2 * b) * x[2];
        out[2] = x[3];
        // The published model uses J₂ in the x₃ coefficient of this row.
        out[3] = k / (j1 * b) * x[0] - k / (j2 * b * b) * x[2] - f1 / j1 * x[3];
    });
    #[rustfmt::skip]
    let base = Matrix::from_row_slice(4, 4, &[
        0.0, 1.0, 0.0, 0.0,
        -k / j2, -f2 / j2, k / (j2 * b), 0.0,
        0.0, 0.0, 0.0, 1.0,
        k / (j1 * b), 0.0, -k / (j2 * b * b), -f1 / j1,
    ]);
    let mut dir = Matrix::zeros(4, 4);
    dir[(1, 0)] = grav;
    let pj = ParametricJacobian::new(base, vec![dir], vec![(-1.0, 1.0)]).expect("robot inclusion is well formed");
    let bm = Matrix::from_column_slice(4, 1, &[0.0, 0.0, 0.0, 1.0]);
    let cm = Matrix::from_row_slice(1, 4, &[1.0, 0.0, 0.0, 0.0]);
    let dm = Matrix::from_element(1, 1, 1.0);
    NonlinearPlant::new("single-link robot", f, bm, cm, dm, pj).expect("robot matrices are consistent")
}

/// Published bootstrap gains `(K₀, L₀, G₀)`.
pub fn published_initial_gains() -> (Matrix, Matrix, Matrix) {
    (
        Matrix::from_row_slice(1, 4, &[1.1525, 0.1535, 0.0755, 0.1651]),
        Matrix::from_column_slice(4, 1, &[0.3974, 3.8453, 0.2410, 0.9848]),
        Matrix::from_element(1, 1, 1.0),
    )
}

/// Published optimized gains `(K_opt, L_opt, G_opt)`.
pub fn published_optimized_gains() -> (Matrix, Matrix, Matrix) {
    (
        Matrix::from_row_slice(1, 4, &[1.1426, 0.4401, 0.0673, 0.1895]),
        Matrix::from_column_slice(4, 1, &[0.1623, 3.7539, 0.1596, 0.7642]),
        Matrix::from_element(1, 1, 1.33),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{check_inclusion, finite_difference_jacobian};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn drift_at_origin() {
        let r = builtin_robot_model();
        let mut out = [0.0; 4];
        r.f(&[0.0; 4], &mut out);
        assert_eq!(out[0], 0.0);
        assert!((out[1] + 0.4905).abs() < 1e-12);
        assert_eq!(&out[2..], &[0.0, 0.0]);
    }

    #[test]
    fn damping_entry_is_constant() {
        let r = builtin_robot_model();
        for x in [[0.0; 4], [1.0, -2.0, 0.5, 3.0]] {
            let j = finite_difference_jacobian(r.dynamics(), &x);
            assert!((j[(1, 1)] + 3.5).abs() < 1e-6);
        }
    }

    #[test]
    fn inclusion_is_sound() {
        let r = builtin_robot_model();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let samples: Vec<Vec<f64>> = (0..1000).map(|_| (0..4).map(|_| rng.random_range(-5.0..5.0)).collect()).collect();
        let rep = check_inclusion(r.jacobian(), r.dynamics(), &samples);
        assert!(rep.is_sound(), "{:?}", rep.violations.first());
    }
}
