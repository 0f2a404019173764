//! Frequency-domain gain oracle for LTI systems, used to cross-check LMI
//! gain levels.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::linalg::{spectral_abscissa, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GainKind {
    /// `sup_ω σ_max(H(jω))²`
    Sup,
    /// `inf_ω σ_min(H(jω))²` (zero when the system has fewer outputs than inputs)
    Inf,
}

/// `count` log-spaced frequencies over `[lo, hi]` rad/s.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    (0..count)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count.max(2) - 1) as f64))
        .collect()
}

/// The default grid: 2000 points over `[1e-3, 1e4]` rad/s.
pub fn default_grid() -> Vec<f64> {
    log_grid(1e-3, 1e4, 2000)
}

fn frequency_response(a: &Matrix, b: &Matrix, c: &Matrix, d: &Matrix, w: f64) -> Option<DMatrix<Complex<f64>>> {
    let n = a.nrows();
    let to_c = |m: &Matrix| m.map(|v| Complex::new(v, 0.0));
    let mut s = to_c(&(-a));
    for i in 0..n {
        s[(i, i)] += Complex::new(0.0, w);
    }
    let x = s.lu().solve(&to_c(b))?;
    Some(to_c(c) * x + to_c(d))
}

fn sv_value(h: &DMatrix<Complex<f64>>, kind: GainKind) -> f64 {
    if h.is_empty() {
        return 0.0;
    }
    let sv = h.clone().singular_values();
    match kind {
        GainKind::Sup => sv.iter().copied().fold(0.0, f64::max).powi(2),
        GainKind::Inf => {
            if h.nrows() < h.ncols() {
                0.0
            } else {
                sv.iter().copied().fold(f64::INFINITY, f64::min).powi(2)
            }
        }
    }
}

/// Squared sup/inf over frequency of the singular values of
/// `C(jωI − A)⁻¹B + D`, evaluated on `grid` plus `ω = 0` and the `ω → ∞`
/// limit, then refined by golden-section search around the best grid point.
pub fn lti_frequency_gain_oracle(
    a: &Matrix,
    b: &Matrix,
    c: &Matrix,
    d: &Matrix,
    kind: GainKind,
    grid: &[f64],
) -> Result<f64> {
    let n = a.nrows();
    if !a.is_square() || b.nrows() != n || c.ncols() != n || d.shape() != (c.nrows(), b.ncols()) {
        return Err(Error::ShapeError("inconsistent LTI matrices".into()));
    }
    let abscissa = spectral_abscissa(a);
    if n > 0 && abscissa >= 0.0 {
        return Err(Error::UnstableSystem(abscissa));
    }
    let value = |w: f64| -> Result<f64> {
        frequency_response(a, b, c, d, w)
            .map(|h| sv_value(&h, kind))
            .ok_or_else(|| Error::InvalidMatrix(format!("singular resolvent at ω = {w}")))
    };
    let better = |x: f64, y: f64| match kind {
        GainKind::Sup => x > y,
        GainKind::Inf => x < y,
    };

    let mut best = value(0.0)?;
    let at_inf = sv_value(&d.map(|v| Complex::new(v, 0.0)), kind);
    if better(at_inf, best) {
        best = at_inf;
    }
    let vals: Vec<f64> = grid.iter().map(|&w| value(w)).collect::<Result<_>>()?;
    let Some(idx) = (0..vals.len()).reduce(|i, j| if better(vals[j], vals[i]) { j } else { i }) else {
        return Ok(best);
    };
    if better(vals[idx], best) {
        best = vals[idx];
    }
    // Golden-section refinement in log ω between the neighbouring grid points.
    let lo = grid[idx.saturating_sub(1)].ln();
    let hi = grid[(idx + 1).min(grid.len() - 1)].ln();
    if hi > lo {
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let (mut x0, mut x1) = (lo, hi);
        let mut c1 = x1 - phi * (x1 - x0);
        let mut c2 = x0 + phi * (x1 - x0);
        let mut f1 = value(c1.exp())?;
        let mut f2 = value(c2.exp())?;
        for _ in 0..60 {
            if better(f1, f2) {
                x1 = c2;
                c2 = c1;
                f2 = f1;
                c1 = x1 - phi * (x1 - x0);
                f1 = value(c1.exp())?;
            } else {
                x0 = c1;
                c1 = c2;
                f1 = f2;
                c2 = x0 + phi * (x1 - x0);
                f2 = value(c2.exp())?;
            }
        }
        for f in [f1, f2] {
            if better(f, best) {
                best = f;
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: f64) -> Matrix {
        Matrix::from_element(1, 1, v)
    }

    #[test]
    fn scalar_sup_and_inf() {
        let g = default_grid();
        let sup = lti_frequency_gain_oracle(&s(-1.0), &s(1.0), &s(1.0), &s(1.0), GainKind::Sup, &g).unwrap();
        let inf = lti_frequency_gain_oracle(&s(-1.0), &s(1.0), &s(1.0), &s(1.0), GainKind::Inf, &g).unwrap();
        assert!((sup - 4.0).abs() < 1e-6);
        assert!((inf - 1.0).abs() < 1e-3);
    }

    #[test]
    fn strictly_proper_inf_is_zero() {
        let inf = lti_frequency_gain_oracle(&s(-1.0), &s(1.0), &s(1.0), &s(0.0), GainKind::Inf, &default_grid()).unwrap();
        assert!(inf.abs() < 1e-12);
    }

    #[test]
    fn resonant_peak_is_refined() {
        // ω_n = 1, ζ = 0.1: peak |H|² = 1/(4ζ²(1−ζ²)).
        let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -0.2]);
        let b = Matrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let c = Matrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let sup = lti_frequency_gain_oracle(&a, &b, &c, &s(0.0), GainKind::Sup, &default_grid()).unwrap();
        let want = 1.0 / (4.0 * 0.01 * 0.99);
        assert!((sup - want).abs() < 1e-8 * want, "{sup} vs {want}");
    }

    #[test]
    fn unstable_rejected() {
        let r = lti_frequency_gain_oracle(&s(1.0), &s(1.0), &s(1.0), &s(1.0), GainKind::Sup, &default_grid());
        assert!(matches!(r, Err(Error::UnstableSystem(_))));
    }
}
