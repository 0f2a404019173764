//! Affine matrix expressions over a flat vector of scalar decision coordinates.

use std::collections::BTreeMap;
use std::ops::{Add, Neg, Sub};

use crate::error::{Error, Result};
use crate::linalg::{max_abs, Matrix};

/// `constant + Σ x[k] · terms[k]`, every matrix of the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct AffExpr {
    constant: Matrix,
    terms: BTreeMap<usize, Matrix>,
}

impl AffExpr {
    pub fn constant(m: Matrix) -> Self {
        Self {
            constant: m,
            terms: BTreeMap::new(),
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::constant(Matrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Self::constant(Matrix::identity(n, n))
    }

    pub fn scalar(v: f64) -> Self {
        Self::constant(Matrix::from_element(1, 1, v))
    }

    /// Single-coordinate term `x[coord] · coef`.
    pub fn term(coord: usize, coef: Matrix) -> Self {
        let mut e = Self::zeros(coef.nrows(), coef.ncols());
        e.terms.insert(coord, coef);
        e
    }

    pub(crate) fn from_parts(constant: Matrix, terms: BTreeMap<usize, Matrix>) -> Self {
        Self { constant, terms }
    }

    pub fn nrows(&self) -> usize {
        self.constant.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.constant.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.constant.shape()
    }

    pub fn constant_part(&self) -> &Matrix {
        &self.constant
    }

    pub fn terms(&self) -> &BTreeMap<usize, Matrix> {
        &self.terms
    }

    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    /// Highest coordinate index referenced, if any.
    pub fn max_coord(&self) -> Option<usize> {
        self.terms.keys().next_back().copied()
    }

    fn map(&self, f: impl Fn(&Matrix) -> Matrix) -> Self {
        let mut out = Self::constant(f(&self.constant));
        for (&k, m) in &self.terms {
            let v = f(m);
            if v.iter().any(|x| *x != 0.0) {
                out.terms.insert(k, v);
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        self.map(|m| m.transpose())
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|m| m * s)
    }

    /// `M · self`.
    pub fn lmul(&self, m: &Matrix) -> Result<Self> {
        if m.ncols() != self.nrows() {
            return Err(Error::ShapeError(format!(
                "cannot left-multiply {}x{} by {}x{}",
                self.nrows(),
                self.ncols(),
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(self.map(|x| m * x))
    }

    /// `self · M`.
    pub fn rmul(&self, m: &Matrix) -> Result<Self> {
        if self.ncols() != m.nrows() {
            return Err(Error::ShapeError(format!(
                "cannot right-multiply {}x{} by {}x{}",
                self.nrows(),
                self.ncols(),
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(self.map(|x| x * m))
    }

    /// Product of two expressions; fails unless at least one is constant.
    pub fn mul(&self, rhs: &AffExpr) -> Result<Self> {
        match (self.is_constant(), rhs.is_constant()) {
            (true, _) => rhs.lmul(&self.constant),
            (_, true) => self.rmul(&rhs.constant),
            _ => Err(Error::NotAffine(format!(
                "product of two variable expressions ({}x{} · {}x{})",
                self.nrows(),
                self.ncols(),
                rhs.nrows(),
                rhs.ncols()
            ))),
        }
    }

    pub fn try_add(&self, rhs: &AffExpr) -> Result<Self> {
        self.combine(rhs, 1.0)
    }

    pub fn try_sub(&self, rhs: &AffExpr) -> Result<Self> {
        self.combine(rhs, -1.0)
    }

    fn combine(&self, rhs: &AffExpr, sign: f64) -> Result<Self> {
        if self.shape() != rhs.shape() {
            return Err(Error::ShapeError(format!(
                "cannot add {}x{} and {}x{}",
                self.nrows(),
                self.ncols(),
                rhs.nrows(),
                rhs.ncols()
            )));
        }
        let mut out = self.clone();
        out.constant += &rhs.constant * sign;
        for (&k, m) in &rhs.terms {
            match out.terms.get_mut(&k) {
                Some(acc) => *acc += m * sign,
                None => {
                    out.terms.insert(k, m * sign);
                }
            }
        }
        out.terms.retain(|_, m| m.iter().any(|x| *x != 0.0));
        Ok(out)
    }

    /// `s · Iₙ` for a 1×1 expression `s`.
    pub fn times_identity(&self, n: usize) -> Result<Self> {
        if self.shape() != (1, 1) {
            return Err(Error::ShapeError("times_identity needs a 1x1 expression".into()));
        }
        let id = Matrix::identity(n, n);
        Ok(self.map(|m| &id * m[(0, 0)]))
    }

    /// `self + selfᵀ`.
    pub fn sym2(&self) -> Result<Self> {
        self.try_add(&self.transpose())
    }

    /// Evaluates at a full coordinate vector.
    pub fn eval(&self, x: &[f64]) -> Matrix {
        let mut m = self.constant.clone();
        for (&k, c) in &self.terms {
            m += c * x[k];
        }
        m
    }

    /// Largest asymmetry over constant and coefficient matrices.
    pub fn asymmetry(&self) -> f64 {
        let a = |m: &Matrix| {
            if m.is_square() {
                max_abs(&(m - m.transpose()))
            } else {
                f64::INFINITY
            }
        };
        self.terms.values().map(a).fold(a(&self.constant), f64::max)
    }

    pub fn scale_of(&self) -> f64 {
        self.terms.values().map(max_abs).fold(max_abs(&self.constant), f64::max)
    }
}

impl Add for &AffExpr {
    type Output = AffExpr;
    /// Panics on shape mismatch; use `try_add` for fallible addition.
    fn add(self, rhs: &AffExpr) -> AffExpr {
        self.try_add(rhs).expect("shape mismatch in AffExpr addition")
    }
}

impl Sub for &AffExpr {
    type Output = AffExpr;
    fn sub(self, rhs: &AffExpr) -> AffExpr {
        self.try_sub(rhs).expect("shape mismatch in AffExpr subtraction")
    }
}

impl Neg for &AffExpr {
    type Output = AffExpr;
    fn neg(self) -> AffExpr {
        self.scale(-1.0)
    }
}

impl From<Matrix> for AffExpr {
    fn from(m: Matrix) -> Self {
        Self::constant(m)
    }
}

/// Assembles a symmetric block matrix from its lower-triangular blocks.
/// Unset blocks are zero; the upper triangle is filled by transposition.
#[derive(Debug, Clone)]
pub struct BlockBuilder {
    sizes: Vec<usize>,
    blocks: BTreeMap<(usize, usize), AffExpr>,
}

impl BlockBuilder {
    pub fn new(sizes: &[usize]) -> Self {
        Self {
            sizes: sizes.to_vec(),
            blocks: BTreeMap::new(),
        }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn dim(&self) -> usize {
        self.sizes.iter().sum()
    }

    /// Sets block `(i, j)`; with `i < j` the transpose is stored at `(j, i)`.
    pub fn set(&mut self, i: usize, j: usize, e: AffExpr) -> Result<&mut Self> {
        let (i, j, e) = if i >= j { (i, j, e) } else { (j, i, e.transpose()) };
        if i >= self.sizes.len() {
            return Err(Error::ShapeError(format!("block index {i} out of range")));
        }
        if e.shape() != (self.sizes[i], self.sizes[j]) {
            return Err(Error::ShapeError(format!(
                "block ({i},{j}) must be {}x{}, got {}x{}",
                self.sizes[i],
                self.sizes[j],
                e.nrows(),
                e.ncols()
            )));
        }
        self.blocks.insert((i, j), e);
        Ok(self)
    }

    pub fn build(&self) -> AffExpr {
        let n = self.dim();
        let mut offsets = Vec::with_capacity(self.sizes.len());
        let mut acc = 0;
        for s in &self.sizes {
            offsets.push(acc);
            acc += s;
        }
        let mut constant = Matrix::zeros(n, n);
        let mut terms: BTreeMap<usize, Matrix> = BTreeMap::new();
        let place = |dst: &mut Matrix, src: &Matrix, r0: usize, c0: usize, diag: bool| {
            for c in 0..src.ncols() {
                for r in 0..src.nrows() {
                    let v = src[(r, c)];
                    dst[(r0 + r, c0 + c)] = v;
                    if !diag {
                        dst[(c0 + c, r0 + r)] = v;
                    }
                }
            }
        };
        for (&(i, j), e) in &self.blocks {
            let diag = i == j;
            let (r0, c0) = (offsets[i], offsets[j]);
            let cst = if diag { crate::linalg::symmetrize(e.constant_part()) } else { e.constant_part().clone() };
            place(&mut constant, &cst, r0, c0, diag);
            for (&k, m) in e.terms() {
                let m = if diag { crate::linalg::symmetrize(m) } else { m.clone() };
                let dst = terms.entry(k).or_insert_with(|| Matrix::zeros(n, n));
                place(dst, &m, r0, c0, diag);
            }
        }
        AffExpr::from_parts(constant, terms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(r: usize, c: usize, v: &[f64]) -> Matrix {
        Matrix::from_row_slice(r, c, v)
    }

    #[test]
    fn bilinear_product_is_rejected() {
        let a = AffExpr::term(0, m(1, 1, &[1.0]));
        let b = AffExpr::term(1, m(1, 1, &[1.0]));
        assert!(matches!(a.mul(&b), Err(Error::NotAffine(_))));
        assert!(a.mul(&AffExpr::scalar(2.0)).is_ok());
    }

    #[test]
    fn add_cancels_terms() {
        let a = AffExpr::term(3, m(1, 1, &[2.0]));
        let z = &a - &a;
        assert!(z.is_constant());
    }

    #[test]
    fn eval_matches_manual() {
        let e = AffExpr::term(0, m(2, 2, &[1.0, 0.0, 0.0, 0.0]))
            .try_add(&AffExpr::term(1, m(2, 2, &[0.0, 1.0, 1.0, 0.0])))
            .unwrap()
            .try_add(&AffExpr::identity(2))
            .unwrap();
        assert_eq!(e.eval(&[2.0, 3.0]), m(2, 2, &[3.0, 3.0, 3.0, 1.0]));
    }

    #[test]
    fn block_builder_fills_upper_triangle() {
        let mut b = BlockBuilder::new(&[1, 2]);
        b.set(0, 0, AffExpr::scalar(1.0)).unwrap();
        b.set(1, 0, AffExpr::term(0, m(2, 1, &[1.0, 2.0]))).unwrap();
        let e = b.build();
        let v = e.eval(&[1.0]);
        assert_eq!(v, m(3, 3, &[1.0, 1.0, 2.0, 1.0, 0.0, 0.0, 2.0, 0.0, 0.0]));
        assert_eq!(e.asymmetry(), 0.0);
    }

    #[test]
    fn block_shape_checked() {
        let mut b = BlockBuilder::new(&[1, 2]);
        assert!(b.set(1, 0, AffExpr::scalar(1.0)).is_err());
    }
}
