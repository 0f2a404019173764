//! Plain-text dump of an [`SdpProblem`] for cross-checking with external
//! solvers.
//!
//! Layout: a header with the coordinate count and objective, then one record
//! per constraint listing the normalized (`⪰ 0`) constant matrix followed by
//! every nonzero coefficient matrix, each row on its own line.

use std::fmt::Write as _;
use std::io::Write;

use crate::error::Result;
use crate::linalg::Matrix;

use super::problem::{Objective, SdpProblem};

fn write_matrix(out: &mut String, m: &Matrix) {
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| format!("{:e}", m[(r, c)])).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
}

/// Renders the archive text, including sign-hint constraints.
pub fn render(problem: &SdpProblem, strict_margin: f64) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "coords {}", problem.num_coords());
    for v in problem.variables() {
        let r = v.var.coords();
        let _ = writeln!(out, "var {} {:?} {:?} {}..{}", v.name, v.var.kind(), v.hint, r.start, r.end);
    }
    let (kind, expr) = match problem.objective() {
        Objective::Feasibility => ("feasibility", None),
        Objective::Maximize(e) => ("maximize", Some(e)),
        Objective::Minimize(e) => ("minimize", Some(e)),
    };
    let _ = write!(out, "objective {kind}");
    if let Some(e) = expr {
        for (k, m) in e.terms() {
            let _ = write!(out, " {k}:{:e}", m[(0, 0)]);
        }
    }
    let _ = writeln!(out);
    let hints = problem.hint_constraints(strict_margin);
    for c in problem.constraints().iter().chain(hints.iter()) {
        let e = c.normalized();
        let _ = writeln!(out, "constraint {} dim {} terms {}", c.label.replace(' ', "_"), c.dim(), e.terms().len());
        let _ = writeln!(out, "F0");
        write_matrix(&mut out, e.constant_part());
        for (k, m) in e.terms() {
            let _ = writeln!(out, "F {k}");
            write_matrix(&mut out, m);
        }
    }
    out
}

pub fn write_archive(problem: &SdpProblem, strict_margin: f64, path: &std::path::Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(render(problem, strict_margin).as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::{AffExpr, SignHint};

    #[test]
    fn archive_lists_every_constraint() {
        let mut p = SdpProblem::new();
        let v = p.symmetric("P", 2, SignHint::PositiveDefinite).unwrap();
        p.nsd(&v.expr() + &AffExpr::identity(2), "c1").unwrap();
        p.minimize(AffExpr::term(0, Matrix::from_element(1, 1, 1.0))).unwrap();
        let text = render(&p, 1e-6);
        assert_eq!(text.matches("constraint ").count(), 2);
        assert!(text.starts_with("coords 3"));
        assert!(text.contains("objective minimize 0:1e0"));
    }
}
