//! Decision variables, constraints and objectives.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

use super::expr::AffExpr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Symmetric(usize),
    Rectangular(usize, usize),
    Scalar,
}

impl VarKind {
    pub fn coords(self) -> usize {
        match self {
            VarKind::Symmetric(n) => n * (n + 1) / 2,
            VarKind::Rectangular(r, c) => r * c,
            VarKind::Scalar => 1,
        }
    }

    pub fn shape(self) -> (usize, usize) {
        match self {
            VarKind::Symmetric(n) => (n, n),
            VarKind::Rectangular(r, c) => (r, c),
            VarKind::Scalar => (1, 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignHint {
    Free,
    PositiveDefinite,
    NegativeDefinite,
}

/// Handle to a decision variable inside one [`SdpProblem`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var {
    pub(crate) index: usize,
    pub(crate) offset: usize,
    pub(crate) kind: VarKind,
}

impl Var {
    pub fn kind(&self) -> VarKind {
        self.kind
    }

    pub fn shape(&self) -> (usize, usize) {
        self.kind.shape()
    }

    /// Coordinate range of this variable in the flat decision vector.
    pub fn coords(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.kind.coords()
    }

    /// Matrix expression of the variable.
    pub fn expr(&self) -> AffExpr {
        let (r, c) = self.shape();
        let mut terms = BTreeMap::new();
        let mut k = self.offset;
        match self.kind {
            VarKind::Symmetric(n) => {
                for j in 0..n {
                    for i in j..n {
                        let mut m = Matrix::zeros(n, n);
                        m[(i, j)] = 1.0;
                        m[(j, i)] = 1.0;
                        terms.insert(k, m);
                        k += 1;
                    }
                }
            }
            _ => {
                for j in 0..c {
                    for i in 0..r {
                        let mut m = Matrix::zeros(r, c);
                        m[(i, j)] = 1.0;
                        terms.insert(k, m);
                        k += 1;
                    }
                }
            }
        }
        AffExpr::from_parts(Matrix::zeros(r, c), terms)
    }

    /// Reads the variable's value from a flat assignment.
    pub fn value(&self, x: &[f64]) -> Matrix {
        let (r, c) = self.shape();
        let mut m = Matrix::zeros(r, c);
        let mut k = self.offset;
        match self.kind {
            VarKind::Symmetric(n) => {
                for j in 0..n {
                    for i in j..n {
                        m[(i, j)] = x[k];
                        m[(j, i)] = x[k];
                        k += 1;
                    }
                }
            }
            _ => {
                for j in 0..c {
                    for i in 0..r {
                        m[(i, j)] = x[k];
                        k += 1;
                    }
                }
            }
        }
        m
    }

    /// Writes a value into a flat assignment (symmetric values use the
    /// lower triangle).
    pub fn write(&self, value: &Matrix, x: &mut [f64]) -> Result<()> {
        if value.shape() != self.shape() {
            return Err(Error::ShapeError(format!(
                "value is {}x{}, variable is {}x{}",
                value.nrows(),
                value.ncols(),
                self.shape().0,
                self.shape().1
            )));
        }
        let mut k = self.offset;
        match self.kind {
            VarKind::Symmetric(n) => {
                for j in 0..n {
                    for i in j..n {
                        x[k] = 0.5 * (value[(i, j)] + value[(j, i)]);
                        k += 1;
                    }
                }
            }
            _ => {
                let (r, c) = self.shape();
                for j in 0..c {
                    for i in 0..r {
                        x[k] = value[(i, j)];
                        k += 1;
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    /// `expr ⪰ 0`
    Psd,
    /// `expr ⪯ 0`
    Nsd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffineLmiConstraint {
    pub sense: Sense,
    pub expr: AffExpr,
    pub label: String,
}

impl AffineLmiConstraint {
    pub fn new(sense: Sense, expr: AffExpr, label: impl Into<String>) -> Result<Self> {
        let label = label.into();
        if expr.nrows() != expr.ncols() {
            return Err(Error::ShapeError(format!(
                "constraint must be square, got {}x{}",
                expr.nrows(),
                expr.ncols()
            )));
        }
        let tol = 1e-9 * (1.0 + expr.scale_of());
        if expr.asymmetry() > tol {
            return Err(Error::ShapeError(format!(
                "constraint '{}' is not symmetric (asymmetry {:.3e})",
                label,
                expr.asymmetry()
            )));
        }
        let sym = expr.try_add(&expr.transpose())?.scale(0.5);
        Ok(Self {
            sense,
            expr: sym,
            label,
        })
    }

    pub fn psd(expr: AffExpr, label: impl Into<String>) -> Result<Self> {
        Self::new(Sense::Psd, expr, label)
    }

    pub fn nsd(expr: AffExpr, label: impl Into<String>) -> Result<Self> {
        Self::new(Sense::Nsd, expr, label)
    }

    pub fn dim(&self) -> usize {
        self.expr.nrows()
    }

    /// The constraint written as `F(x) ⪰ 0`.
    pub fn normalized(&self) -> AffExpr {
        match self.sense {
            Sense::Psd => self.expr.clone(),
            Sense::Nsd => self.expr.scale(-1.0),
        }
    }

    /// Signed margin: smallest eigenvalue of the normalized matrix at `x`.
    pub fn margin(&self, x: &[f64]) -> f64 {
        let m = self.normalized().eval(x);
        crate::linalg::SymmetricMatrix::from_symmetrized(&m)
            .map(|s| s.min_eigenvalue())
            .unwrap_or(f64::NEG_INFINITY)
    }

    /// Fixes some coordinates to numeric values, turning them into constants.
    pub fn substitute(&self, fixed: &BTreeMap<usize, f64>) -> Self {
        let mut constant = self.expr.constant_part().clone();
        let mut terms = BTreeMap::new();
        for (&k, m) in self.expr.terms() {
            match fixed.get(&k) {
                Some(v) => constant += m * *v,
                None => {
                    terms.insert(k, m.clone());
                }
            }
        }
        Self {
            sense: self.sense,
            expr: AffExpr::from_parts(constant, terms),
            label: self.label.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    Feasibility,
    /// Maximize a linear functional `cᵀx` given as a 1×1 expression.
    Maximize(AffExpr),
    Minimize(AffExpr),
}

#[derive(Debug, Clone)]
pub struct VarInfo {
    pub name: String,
    pub var: Var,
    pub hint: SignHint,
}

/// A dense SDP: maximize/minimize a linear objective subject to affine LMIs.
#[derive(Debug, Clone)]
pub struct SdpProblem {
    vars: Vec<VarInfo>,
    ncoords: usize,
    constraints: Vec<AffineLmiConstraint>,
    objective: Objective,
}

impl Default for SdpProblem {
    fn default() -> Self {
        Self::new()
    }
}

impl SdpProblem {
    pub fn new() -> Self {
        Self {
            vars: Vec::new(),
            ncoords: 0,
            constraints: Vec::new(),
            objective: Objective::Feasibility,
        }
    }

    pub fn add_var(&mut self, name: &str, kind: VarKind, hint: SignHint) -> Result<Var> {
        if self.vars.iter().any(|v| v.name == name) {
            return Err(Error::InvalidArgument(format!("duplicate variable name '{name}'")));
        }
        if hint != SignHint::Free && !matches!(kind, VarKind::Symmetric(_) | VarKind::Scalar) {
            return Err(Error::InvalidArgument(format!(
                "sign hint on non-symmetric variable '{name}'"
            )));
        }
        let var = Var {
            index: self.vars.len(),
            offset: self.ncoords,
            kind,
        };
        self.ncoords += kind.coords();
        self.vars.push(VarInfo {
            name: name.to_string(),
            var,
            hint,
        });
        Ok(var)
    }

    pub fn symmetric(&mut self, name: &str, dim: usize, hint: SignHint) -> Result<Var> {
        self.add_var(name, VarKind::Symmetric(dim), hint)
    }

    pub fn matrix(&mut self, name: &str, rows: usize, cols: usize) -> Result<Var> {
        self.add_var(name, VarKind::Rectangular(rows, cols), SignHint::Free)
    }

    pub fn scalar(&mut self, name: &str) -> Result<Var> {
        self.add_var(name, VarKind::Scalar, SignHint::Free)
    }

    pub fn variables(&self) -> &[VarInfo] {
        &self.vars
    }

    pub fn var(&self, name: &str) -> Option<Var> {
        self.vars.iter().find(|v| v.name == name).map(|v| v.var)
    }

    pub fn num_coords(&self) -> usize {
        self.ncoords
    }

    pub fn constraints(&self) -> &[AffineLmiConstraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn add_constraint(&mut self, c: AffineLmiConstraint) -> Result<()> {
        if let Some(k) = c.expr.max_coord() {
            if k >= self.ncoords {
                return Err(Error::ShapeError(format!(
                    "constraint '{}' references coordinate {k} beyond {}",
                    c.label, self.ncoords
                )));
            }
        }
        self.constraints.push(c);
        Ok(())
    }

    pub fn add_constraints(&mut self, cs: impl IntoIterator<Item = AffineLmiConstraint>) -> Result<()> {
        cs.into_iter().try_for_each(|c| self.add_constraint(c))
    }

    pub fn psd(&mut self, e: AffExpr, label: &str) -> Result<()> {
        self.add_constraint(AffineLmiConstraint::psd(e, label)?)
    }

    pub fn nsd(&mut self, e: AffExpr, label: &str) -> Result<()> {
        self.add_constraint(AffineLmiConstraint::nsd(e, label)?)
    }

    fn check_objective(&self, e: &AffExpr) -> Result<()> {
        if e.shape() != (1, 1) {
            return Err(Error::ShapeError("objective must be a 1x1 expression".into()));
        }
        if let Some(k) = e.max_coord() {
            if k >= self.ncoords {
                return Err(Error::ShapeError("objective references unknown coordinate".into()));
            }
        }
        Ok(())
    }

    pub fn maximize(&mut self, e: AffExpr) -> Result<()> {
        self.check_objective(&e)?;
        self.objective = Objective::Maximize(e);
        Ok(())
    }

    pub fn minimize(&mut self, e: AffExpr) -> Result<()> {
        self.check_objective(&e)?;
        self.objective = Objective::Minimize(e);
        Ok(())
    }

    /// Cost vector `c` such that the solver maximizes `cᵀx`.
    pub(crate) fn cost_vector(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.ncoords];
        let (e, sign) = match &self.objective {
            Objective::Feasibility => return c,
            Objective::Maximize(e) => (e, 1.0),
            Objective::Minimize(e) => (e, -1.0),
        };
        for (&k, m) in e.terms() {
            c[k] = sign * m[(0, 0)];
        }
        c
    }

    /// Objective value at a flat assignment (in the user's sense).
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        match &self.objective {
            Objective::Feasibility => 0.0,
            Objective::Maximize(e) | Objective::Minimize(e) => e.eval(x)[(0, 0)],
        }
    }

    /// Hint constraints (`P ⪰ μI`, `Q ⪯ −μI`) implied by the sign hints.
    pub fn hint_constraints(&self, mu: f64) -> Vec<AffineLmiConstraint> {
        self.vars
            .iter()
            .filter_map(|v| {
                let (n, _) = v.var.shape();
                let shift = AffExpr::constant(Matrix::identity(n, n) * mu);
                let e = v.var.expr();
                match v.hint {
                    SignHint::Free => None,
                    SignHint::PositiveDefinite => Some(AffineLmiConstraint {
                        sense: Sense::Psd,
                        expr: &e - &shift,
                        label: format!("{} > 0", v.name),
                    }),
                    SignHint::NegativeDefinite => Some(AffineLmiConstraint {
                        sense: Sense::Nsd,
                        expr: &e + &shift,
                        label: format!("{} < 0", v.name),
                    }),
                }
            })
            .collect()
    }

    /// Smallest signed margin over all constraints and hints at `x`.
    pub fn margin(&self, x: &[f64], mu: f64) -> f64 {
        self.constraints
            .iter()
            .chain(self.hint_constraints(mu).iter())
            .map(|c| c.margin(x))
            .fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_roundtrip() {
        let mut p = SdpProblem::new();
        let v = p.symmetric("P", 3, SignHint::PositiveDefinite).unwrap();
        assert_eq!(p.num_coords(), 6);
        let m = Matrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 5.0, 3.0, 5.0, 6.0]);
        let mut x = vec![0.0; 6];
        v.write(&m, &mut x).unwrap();
        assert_eq!(v.value(&x), m);
        assert_eq!(v.expr().eval(&x), m);
    }

    #[test]
    fn rectangular_roundtrip() {
        let mut p = SdpProblem::new();
        p.scalar("b").unwrap();
        let v = p.matrix("K", 2, 3).unwrap();
        let m = Matrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let mut x = vec![0.0; 7];
        v.write(&m, &mut x).unwrap();
        assert_eq!(v.expr().eval(&x), m);
        assert_eq!(x[0], 0.0);
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut p = SdpProblem::new();
        p.scalar("b").unwrap();
        assert!(p.scalar("b").is_err());
    }

    #[test]
    fn asymmetric_constraint_rejected() {
        let e = AffExpr::constant(Matrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]));
        assert!(AffineLmiConstraint::psd(e, "x").is_err());
    }
}
