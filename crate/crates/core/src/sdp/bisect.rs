//! Bisection on a monotone feasibility oracle.

use crate::error::{Error, Result};

/// Which side of the boundary is feasible.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feasible {
    /// Feasible for γ ≥ γ* (infimum problems such as an upper gain bound).
    Above,
    /// Feasible for γ ≤ γ* (supremum problems such as a lower gain bound).
    Below,
}

/// Locates the boundary of a monotone oracle within `tol`, returning the
/// last value confirmed feasible.
///
/// Uses `⌈log₂((hi−lo)/tol)⌉` probes. If every probe lands on the same side,
/// the bracket is verified with one extra call at the claimed endpoint.
pub fn bisect_gain(
    mut oracle: impl FnMut(f64) -> Result<bool>,
    lo: f64,
    hi: f64,
    tol: f64,
    side: Feasible,
) -> Result<f64> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi && tol > 0.0) {
        return Err(Error::BracketError(format!("invalid bracket [{lo}, {hi}] with tol {tol}")));
    }
    let probes = ((hi - lo) / tol).log2().ceil().max(0.0) as usize;
    let (mut a, mut b) = (lo, hi);
    let mut seen_feasible = false;
    let mut seen_infeasible = false;
    for _ in 0..probes {
        let mid = 0.5 * (a + b);
        let ok = oracle(mid)?;
        if ok {
            seen_feasible = true;
        } else {
            seen_infeasible = true;
        }
        match (side, ok) {
            (Feasible::Above, true) | (Feasible::Below, false) => b = mid,
            (Feasible::Above, false) | (Feasible::Below, true) => a = mid,
        }
    }
    let result = match side {
        Feasible::Above => b,
        Feasible::Below => a,
    };
    if !seen_feasible && !oracle(result)? {
        return Err(Error::BracketError(format!("no feasible value in [{lo}, {hi}]")));
    }
    if !seen_infeasible {
        let far = match side {
            Feasible::Above => lo,
            Feasible::Below => hi,
        };
        if probes == 0 || oracle(far)? {
            return Err(Error::BracketError(format!("no infeasible value in [{lo}, {hi}]")));
        }
    }
    Ok(result)
}
