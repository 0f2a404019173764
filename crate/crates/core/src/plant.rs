//! `ẋ = f(x) + Bu`, `y = Cx + Du`, with a polytopic cover of `∂f/∂x`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{ensure_finite, finite_difference_jacobian, gemv, gemv_add, Dynamics, Matrix, ParametricJacobian};

#[derive(Clone)]
pub struct NonlinearPlant {
    name: String,
    f: Arc<Dynamics>,
    b: Matrix,
    c: Matrix,
    d: Matrix,
    jacobian: ParametricJacobian,
}

impl fmt::Debug for NonlinearPlant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonlinearPlant")
            .field("name", &self.name)
            .field("n", &self.n())
            .field("m", &self.m())
            .field("p", &self.p())
            .finish_non_exhaustive()
    }
}

impl NonlinearPlant {
    pub fn new(
        name: impl Into<String>,
        f: Arc<Dynamics>,
        b: Matrix,
        c: Matrix,
        d: Matrix,
        jacobian: ParametricJacobian,
    ) -> Result<Self> {
        let n = jacobian.dim();
        for (what, m) in [("B", &b), ("C", &c), ("D", &d)] {
            ensure_finite(m, what)?;
        }
        if b.nrows() != n {
            return Err(Error::ShapeError(format!("B has {} rows, state dimension is {n}", b.nrows())));
        }
        if c.ncols() != n {
            return Err(Error::ShapeError(format!("C has {} columns, state dimension is {n}", c.ncols())));
        }
        if d.shape() != (c.nrows(), b.ncols()) {
            return Err(Error::ShapeError(format!(
                "D must be {}x{}, got {}x{}",
                c.nrows(),
                b.ncols(),
                d.nrows(),
                d.ncols()
            )));
        }
        Ok(Self {
            name: name.into(),
            f,
            b,
            c,
            d,
            jacobian,
        })
    }

    /// Linear plant `f(x) = A x` with a single-vertex inclusion.
    pub fn linear(a: Matrix, b: Matrix, c: Matrix, d: Matrix) -> Result<Self> {
        let pj = ParametricJacobian::constant(a.clone())?;
        let f: Arc<Dynamics> = Arc::new(move |x: &[f64], out: &mut [f64]| gemv(&a, x, out));
        Self::new("linear", f, b, c, d, pj)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.jacobian.dim()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn p(&self) -> usize {
        self.c.nrows()
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn c(&self) -> &Matrix {
        &self.c
    }

    pub fn d(&self) -> &Matrix {
        &self.d
    }

    pub fn jacobian(&self) -> &ParametricJacobian {
        &self.jacobian
    }

    pub fn dynamics(&self) -> &Dynamics {
        &*self.f
    }

    pub fn dynamics_arc(&self) -> Arc<Dynamics> {
        Arc::clone(&self.f)
    }

    /// Writes `f(x)` into `out`.
    pub fn f(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }

    /// `Cx + Du`.
    pub fn output(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        gemv(&self.c, x, out);
        gemv_add(&self.d, u, out);
    }

    /// Equilibrium of `ẋ = f(x) − BKx` by damped Newton from the origin.
    pub fn closed_loop_equilibrium(&self, k: &Matrix) -> Result<Vec<f64>> {
        let n = self.n();
        if k.shape() != (self.m(), n) {
            return Err(Error::ShapeError(format!("K must be {}x{n}", self.m())));
        }
        let bk = &self.b * k;
        let fcl = |x: &[f64], out: &mut [f64]| {
            (self.f)(x, out);
            let v = &bk * nalgebra::DVector::from_column_slice(x);
            for (o, vi) in out.iter_mut().zip(v.iter()) {
                *o -= vi;
            }
        };
        let mut x = vec![0.0; n];
        let mut r = vec![0.0; n];
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        for _ in 0..100 {
            fcl(&x, &mut r);
            let res = norm(&r);
            if res < 1e-13 {
                return Ok(x);
            }
            let jac = finite_difference_jacobian(&fcl, &x);
            let Some(dx) = jac.lu().solve(&nalgebra::DVector::from_iterator(n, r.iter().map(|v| -v))) else {
                break;
            };
            let mut step = 1.0;
            let mut trial = vec![0.0; n];
            let mut rt = vec![0.0; n];
            loop {
                for i in 0..n {
                    trial[i] = x[i] + step * dx[i];
                }
                fcl(&trial, &mut rt);
                if norm(&rt) < res || step < 1e-8 {
                    break;
                }
                step *= 0.5;
            }
            x.copy_from_slice(&trial);
        }
        fcl(&x, &mut r);
        if norm(&r) < 1e-9 {
            Ok(x)
        } else {
            Err(Error::InvalidArgument("closed-loop equilibrium not found".into()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_plant_shapes() {
        let p = NonlinearPlant::linear(
            Matrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]),
            Matrix::from_row_slice(2, 1, &[1.0, 0.0]),
            Matrix::from_row_slice(1, 2, &[1.0, 1.0]),
            Matrix::zeros(1, 1),
        )
        .unwrap();
        assert_eq!((p.n(), p.m(), p.p()), (2, 1, 1));
        let mut y = [0.0];
        p.output(&[1.0, 2.0], &[5.0], &mut y);
        assert_eq!(y[0], 3.0);
    }

    #[test]
    fn bad_d_shape() {
        let r = NonlinearPlant::linear(
            Matrix::identity(2, 2),
            Matrix::zeros(2, 1),
            Matrix::zeros(1, 2),
            Matrix::zeros(2, 2),
        );
        assert!(matches!(r, Err(Error::ShapeError(_))));
    }

    #[test]
    fn equilibrium_of_affine_plant() {
        // ẋ = −x + 1  →  x* = 1 with K = 0.
        let pj = ParametricJacobian::constant(Matrix::from_element(1, 1, -1.0)).unwrap();
        let f: Arc<Dynamics> = Arc::new(|x: &[f64], o: &mut [f64]| o[0] = 1.0 - x[0]);
        let p = NonlinearPlant::new("aff", f, Matrix::zeros(1, 1), Matrix::zeros(1, 1), Matrix::zeros(1, 1), pj).unwrap();
        let x = p.closed_loop_equilibrium(&Matrix::zeros(1, 1)).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-10);
    }
}
