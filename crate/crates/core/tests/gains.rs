use proptest::prelude::*;
use wmguard::gains::{
    l2minus_gain, l2plus_gain, random_trajectory_pairs, verify_dissipation, CertificateKind, GainCertificate,
    PairOptions,
};
use wmguard::parallel::Execution;
use wmguard::sdp::SolverOptions;
use wmguard::{Matrix, NonlinearPlant, ParametricJacobian, SymmetricMatrix};

fn s(v: f64) -> Matrix {
    Matrix::from_element(1, 1, v)
}

/// Squared gain extremes of `d + cb/(s − a)`: `|H|²` is monotone in `ω²`,
/// so they sit at `ω = 0` and `ω → ∞`.
fn scalar_extremes(a: f64, b: f64, c: f64, d: f64) -> (f64, f64) {
    let dc = (d - c * b / a).powi(2);
    let hf = d * d;
    (dc.max(hf), dc.min(hf))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// `d > 0` keeps the zero `a − cb/d` in the left half plane, where the
    /// negative-definite storage is not restrictive.
    #[test]
    fn scalar_lmi_gains_match_frequency_extremes(
        a in -3.0..-0.3f64,
        b in 0.3..2.0f64,
        c in 0.3..2.0f64,
        d in 0.3..1.5f64,
    ) {
        let pj = ParametricJacobian::constant(s(a)).unwrap();
        let opts = SolverOptions::default();
        let (sup, inf) = scalar_extremes(a, b, c, d);
        let plus = l2plus_gain(&pj, &s(b), &s(c), &s(d), &opts).unwrap();
        let minus = l2minus_gain(&pj, &s(b), &s(c), &s(d), &opts).unwrap();
        prop_assert!((plus.gamma_sq() - sup).abs() <= 1e-3 * (1.0 + sup), "{} vs {sup}", plus.gamma_sq());
        prop_assert!((minus.gamma_sq() - inf).abs() <= 1e-3 * (1.0 + inf), "{} vs {inf}", minus.gamma_sq());
    }

    /// With a right-half-plane zero the lower level may be conservative, but
    /// never above the true infimum.
    #[test]
    fn scalar_lmi_gains_are_sound(
        a in -3.0..-0.3f64,
        b in 0.3..2.0f64,
        c in 0.3..2.0f64,
        d in -1.5..-0.3f64,
    ) {
        let pj = ParametricJacobian::constant(s(a)).unwrap();
        let opts = SolverOptions::default();
        let (sup, inf) = scalar_extremes(a, b, c, d);
        let plus = l2plus_gain(&pj, &s(b), &s(c), &s(d), &opts).unwrap();
        let minus = l2minus_gain(&pj, &s(b), &s(c), &s(d), &opts).unwrap();
        prop_assert!(plus.gamma_sq() >= sup - 1e-3 * (1.0 + sup));
        prop_assert!(minus.gamma_sq() <= inf + 1e-3 * (1.0 + inf));
        prop_assert!(minus.gamma_sq() >= 0.0);
    }
}

fn two_state() -> NonlinearPlant {
    NonlinearPlant::linear(
        Matrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -1.2]),
        Matrix::from_row_slice(2, 1, &[0.0, 1.0]),
        Matrix::from_row_slice(1, 2, &[1.0, 0.3]),
        s(0.8),
    )
    .unwrap()
}

#[test]
fn certificates_dissipate_on_random_pairs() {
    let sys = two_state();
    let opts = SolverOptions::default();
    let mut po = PairOptions::new(2);
    po.count = 30;
    po.seed = 4;
    po.execution = Execution::Sequential;
    let pairs = random_trajectory_pairs(&sys, &po).unwrap();
    for cert in [
        l2plus_gain(sys.jacobian(), sys.b(), sys.c(), sys.d(), &opts).unwrap(),
        l2minus_gain(sys.jacobian(), sys.b(), sys.c(), sys.d(), &opts).unwrap(),
    ] {
        let rep = verify_dissipation(&cert, &pairs, Execution::Sequential).unwrap();
        assert!(rep.passes(1e-4), "{:?}: worst slack {}", cert.kind(), rep.worst_slack);
    }
}

#[test]
fn understated_gain_is_rejected() {
    // |H|² ∈ (1, 4] for every finite frequency, so a claimed upper level of 1
    // must be violated.
    let sys = NonlinearPlant::linear(s(-1.0), s(1.0), s(1.0), s(1.0)).unwrap();
    let cert = GainCertificate::new(CertificateKind::L2PlusUpper, SymmetricMatrix::identity(1), 1.0).unwrap();
    let mut po = PairOptions::new(1);
    po.count = 10;
    let pairs = random_trajectory_pairs(&sys, &po).unwrap();
    let rep = verify_dissipation(&cert, &pairs, Execution::Parallel).unwrap();
    assert!(!rep.passes(1e-4));
    assert!(rep.worst_slack < 0.0);
    assert_eq!(rep.pairs, 10);
}

#[test]
fn parallel_and_sequential_pairs_agree() {
    let sys = two_state();
    let mut po = PairOptions::new(2);
    po.count = 8;
    po.execution = Execution::Sequential;
    let a = random_trajectory_pairs(&sys, &po).unwrap();
    po.execution = Execution::Parallel;
    let b = random_trajectory_pairs(&sys, &po).unwrap();
    assert_eq!(a, b);
}
