//! Dense QP data `min ½xᵀQx + cᵀx  s.t.  Ax = b, Gx ≤ h`, its validation,
//! text I/O and the problem generators.

mod generate;
mod io;
mod sudoku;

pub use generate::{degenerate_suite, perturb, random_qp, PerturbSpec};
pub use io::{load, read_model, save, write_model};
pub use sudoku::{decode_grid, solve_sudoku, sudoku_qp, validate_grid, var_index, Given, SudokuOutcome};

use thiserror::Error;

use crate::linalg::{dot, Mat};
use crate::scalar::Real;

/// Relative tolerance for accepting a non-symmetric `Q`.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite entry in block {0}")]
    NonFiniteEntry(&'static str),
    #[error("Q is not symmetric (relative defect {0:e})")]
    AsymmetricQ(f64),
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),
    #[error("inconsistent givens: {0}")]
    InconsistentGivens(String),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `(Q, c, A, b, G, h)`
pub type QpParts<T> = (Mat<T>, Vec<T>, Mat<T>, Vec<T>, Mat<T>, Vec<T>);

/// An immutable convex QP in `Gx ≤ h` form.
#[derive(Debug, Clone, PartialEq)]
pub struct QpModel<T> {
    q: Mat<T>,
    c: Vec<T>,
    a: Mat<T>,
    b: Vec<T>,
    g: Mat<T>,
    h: Vec<T>,
}

impl<T: Real> QpModel<T> {
    /// Validates the blocks and symmetrizes `Q`.
    pub fn new(
        q: Mat<T>,
        c: Vec<T>,
        a: Mat<T>,
        b: Vec<T>,
        g: Mat<T>,
        h: Vec<T>,
    ) -> Result<Self, ModelError> {
        let mut model = Self { q, c, a, b, g, h };
        validate(&model)?;
        model.q.symmetrize();
        Ok(model)
    }

    /// Problem with no equality rows.
    pub fn without_equalities(q: Mat<T>, c: Vec<T>, g: Mat<T>, h: Vec<T>) -> Result<Self, ModelError> {
        let n = c.len();
        Self::new(q, c, Mat::zeros(0, n), Vec::new(), g, h)
    }

    /// Problem with no constraints at all.
    pub fn unconstrained(q: Mat<T>, c: Vec<T>) -> Result<Self, ModelError> {
        let n = c.len();
        Self::new(q, c, Mat::zeros(0, n), Vec::new(), Mat::zeros(0, n), Vec::new())
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.c.len()
    }
    #[inline]
    pub fn m(&self) -> usize {
        self.b.len()
    }
    #[inline]
    pub fn p(&self) -> usize {
        self.h.len()
    }
    pub fn q(&self) -> &Mat<T> {
        &self.q
    }
    pub fn c(&self) -> &[T] {
        &self.c
    }
    pub fn a(&self) -> &Mat<T> {
        &self.a
    }
    pub fn b(&self) -> &[T] {
        &self.b
    }
    pub fn g(&self) -> &Mat<T> {
        &self.g
    }
    pub fn h(&self) -> &[T] {
        &self.h
    }

    pub fn into_parts(self) -> QpParts<T> {
        (self.q, self.c, self.a, self.b, self.g, self.h)
    }

    /// `½xᵀQx + cᵀx`
    pub fn objective(&self, x: &[T]) -> T {
        T::lit(0.5) * dot(x, &self.q.mul_vec(x)) + dot(&self.c, x)
    }

    /// Largest violation of `Ax = b` and `Gx ≤ h` (zero when feasible).
    pub fn infeasibility(&self, x: &[T]) -> T {
        let mut worst = T::zero();
        for (ax, &bi) in self.a.mul_vec(x).iter().zip(&self.b) {
            worst = worst.max((*ax - bi).abs());
        }
        for (gx, &hi) in self.g.mul_vec(x).iter().zip(&self.h) {
            worst = worst.max(*gx - hi);
        }
        worst
    }

    /// Converts every entry to another scalar width.
    pub fn cast<U: Real>(&self) -> QpModel<U> {
        let m = |x: &Mat<T>| {
            Mat::from_vec(x.nrows(), x.ncols(), x.as_slice().iter().map(|v| U::lit(v.as_f64())).collect())
        };
        let v = |x: &[T]| x.iter().map(|v| U::lit(v.as_f64())).collect::<Vec<U>>();
        QpModel { q: m(&self.q), c: v(&self.c), a: m(&self.a), b: v(&self.b), g: m(&self.g), h: v(&self.h) }
    }
}

/// Checks every model invariant and reports the first violation.
pub fn validate<T: Real>(model: &QpModel<T>) -> Result<(), ModelError> {
    let n = model.c.len();
    let (m, p) = (model.b.len(), model.h.len());
    let shape = |name: &str, got: (usize, usize), want: (usize, usize)| {
        if got != want {
            Err(ModelError::DimensionMismatch(format!(
                "{name} is {}x{}, expected {}x{}",
                got.0, got.1, want.0, want.1
            )))
        } else {
            Ok(())
        }
    };
    shape("Q", model.q.shape(), (n, n))?;
    shape("A", model.a.shape(), (m, n))?;
    shape("G", model.g.shape(), (p, n))?;

    let finite = |name: &'static str, v: &[T]| {
        if v.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(ModelError::NonFiniteEntry(name))
        }
    };
    finite("Q", model.q.as_slice())?;
    finite("c", &model.c)?;
    finite("A", model.a.as_slice())?;
    finite("b", &model.b)?;
    finite("G", model.g.as_slice())?;
    finite("h", &model.h)?;

    let defect = model.q.symmetry_defect().as_f64();
    if defect > SYMMETRY_TOL {
        return Err(ModelError::AsymmetricQ(defect));
    }
    Ok(())
}
