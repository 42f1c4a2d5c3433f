//! Small dense linear-algebra kernel: row-major matrices, Cholesky, LU with
//! partial pivoting, and a Bunch-Kaufman symmetric-indefinite factorization.

use std::ops::{Index, IndexMut};

use thiserror::Error;

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum FactorError {
    #[error("matrix is not positive definite (pivot {index})")]
    NotPositiveDefinite { index: usize },
    #[error("matrix is singular to working precision (pivot {index})")]
    Singular { index: usize },
    #[error("matrix contains non-finite entries")]
    NonFinite,
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    /// Builds from row-major data. Panics when `data.len() != rows * cols`.
    pub fn from_row_slice(rows: usize, cols: usize, data: &[T]) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data length");
        Self { rows, cols, data: data.to_vec() }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data length");
        Self { rows, cols, data }
    }

    /// Builds from nested rows; every row must have `cols` entries.
    pub fn from_rows(cols: usize, rows: &[Vec<T>]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self { rows: rows.len(), cols, data }
    }

    pub fn from_diag(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> T {
        norm_inf(&self.data)
    }

    /// `y = self * x`
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.rows];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[T], y: &mut [T]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = dot(self.row(i), x);
        }
    }

    /// `y = selfᵀ * x`
    pub fn tr_mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.cols];
        self.tr_mul_vec_add(x, &mut y);
        y
    }

    /// `y += selfᵀ * x`
    pub fn tr_mul_vec_add(&self, x: &[T], y: &mut [T]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(y.len(), self.cols);
        for (i, &xi) in x.iter().enumerate() {
            if xi != T::zero() {
                axpy(xi, self.row(i), y);
            }
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimensions");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a != T::zero() {
                    axpy(a, other.row(k), out.row_mut(i));
                }
            }
        }
        out
    }

    /// Largest `|a_ij - a_ji|` divided by `max(1, max|a|)`. Zero for
    /// symmetric matrices; infinite for non-square ones.
    pub fn symmetry_defect(&self) -> T {
        if self.rows != self.cols {
            return T::infinity();
        }
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in i + 1..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst / T::one().max(self.max_abs())
    }

    /// Replaces the matrix by `(A + Aᵀ)/2`.
    pub fn symmetrize(&mut self) {
        let half = T::lit(0.5);
        for i in 0..self.rows {
            for j in i + 1..self.cols {
                let v = half * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = v;
                self[(j, i)] = v;
            }
        }
    }

    pub fn add_diag(&mut self, shift: T) {
        for i in 0..self.rows.min(self.cols) {
            self[(i, i)] += shift;
        }
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// `y += a * x`
#[inline]
pub fn axpy<T: Real>(a: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Infinity norm; zero for an empty slice.
#[inline]
pub fn norm_inf<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, x| acc.max(x.abs()))
}

#[inline]
pub fn norm2_sq<T: Real>(v: &[T]) -> T {
    dot(v, v)
}

pub fn sub<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

/// Lower-triangular Cholesky factor `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    l: Mat<T>,
}

impl<T: Real> Cholesky<T> {
    /// Factors the lower triangle of `a`; the upper triangle is ignored.
    pub fn factor(a: &Mat<T>) -> Result<Self, FactorError> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "Cholesky needs a square matrix");
        let mut l = Mat::zeros(n, n);
        for j in 0..n {
            let mut d = a[(j, j)];
            for k in 0..j {
                d -= l[(j, k)] * l[(j, k)];
            }
            if !d.is_finite() {
                return Err(FactorError::NonFinite);
            }
            if d <= T::zero() {
                return Err(FactorError::NotPositiveDefinite { index: j });
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in j + 1..n {
                let mut v = a[(i, j)];
                for k in 0..j {
                    v -= l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = v / d;
            }
        }
        Ok(Self { l })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn factor_l(&self) -> &Mat<T> {
        &self.l
    }

    pub fn solve_in_place(&self, b: &mut [T]) {
        let n = self.dim();
        assert_eq!(b.len(), n);
        for i in 0..n {
            let mut v = b[i];
            for k in 0..i {
                v -= self.l[(i, k)] * b[k];
            }
            b[i] = v / self.l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut v = b[i];
            for k in i + 1..n {
                v -= self.l[(k, i)] * b[k];
            }
            b[i] = v / self.l[(i, i)];
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

/// `P A = L U` with partial (row) pivoting. Solves with `A` and `Aᵀ`.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    lu: Mat<T>,
    perm: Vec<usize>,
}

impl<T: Real> Lu<T> {
    pub fn factor(a: &Mat<T>) -> Result<Self, FactorError> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "LU needs a square matrix");
        if !a.is_finite() {
            return Err(FactorError::NonFinite);
        }
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (piv, pmax) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .fold((k, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if pmax == T::zero() {
                return Err(FactorError::Singular { index: k });
            }
            if piv != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(piv, j)];
                    lu[(piv, j)] = tmp;
                }
                perm.swap(k, piv);
            }
            let d = lu[(k, k)];
            for i in k + 1..n {
                let f = lu[(i, k)] / d;
                lu[(i, k)] = f;
                if f != T::zero() {
                    for j in k + 1..n {
                        let u = lu[(k, j)];
                        lu[(i, j)] -= f * u;
                    }
                }
            }
        }
        Ok(Self { lu, perm })
    }

    /// Absolute values of the U diagonal.
    pub fn pivots(&self) -> Vec<T> {
        (0..self.lu.nrows()).map(|i| self.lu[(i, i)].abs()).collect()
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.lu.nrows();
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                let v = self.lu[(i, k)] * x[k];
                x[i] -= v;
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                let v = self.lu[(i, k)] * x[k];
                x[i] -= v;
            }
            x[i] /= self.lu[(i, i)];
        }
        x
    }

    /// Solves `Aᵀ x = b`.
    pub fn solve_transpose(&self, b: &[T]) -> Vec<T> {
        let n = self.lu.nrows();
        let mut w = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                let v = self.lu[(k, i)] * w[k];
                w[i] -= v;
            }
            w[i] /= self.lu[(i, i)];
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                let v = self.lu[(k, i)] * w[k];
                w[i] -= v;
            }
        }
        let mut x = vec![T::zero(); n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = w[i];
        }
        x
    }
}

#[derive(Debug, Clone, Copy)]
enum Pivot<T> {
    One(T),
    /// Symmetric 2x2 block `[[a, b], [b, c]]` occupying this and the next index.
    Two(T, T, T),
    /// Second half of a 2x2 block.
    Tail,
}

/// Bunch-Kaufman factorization `P A Pᵀ = L D Lᵀ` of a symmetric,
/// possibly indefinite matrix, with 1x1 and 2x2 pivots.
#[derive(Debug, Clone)]
pub struct Ldlt<T> {
    l: Mat<T>,
    pivots: Vec<Pivot<T>>,
    perm: Vec<usize>,
}

impl<T: Real> Ldlt<T> {
    pub fn factor(a: &Mat<T>) -> Result<Self, FactorError> {
        let n = a.nrows();
        assert_eq!(n, a.ncols(), "LDLT needs a square matrix");
        if !a.is_finite() {
            return Err(FactorError::NonFinite);
        }
        let alpha = (T::one() + T::lit(17.0).sqrt()) / T::lit(8.0);
        let mut w = a.clone();
        let mut l = Mat::identity(n);
        let mut perm: Vec<usize> = (0..n).collect();
        let mut pivots = Vec::with_capacity(n);
        let tiny = T::min_positive_value();

        let swap_sym = |w: &mut Mat<T>, l: &mut Mat<T>, perm: &mut Vec<usize>, k: usize, r: usize| {
            if k == r {
                return;
            }
            for j in 0..n {
                let t = w[(k, j)];
                w[(k, j)] = w[(r, j)];
                w[(r, j)] = t;
            }
            for i in 0..n {
                let t = w[(i, k)];
                w[(i, k)] = w[(i, r)];
                w[(i, r)] = t;
            }
            for j in 0..k {
                let t = l[(k, j)];
                l[(k, j)] = l[(r, j)];
                l[(r, j)] = t;
            }
            perm.swap(k, r);
        };

        let mut k = 0;
        while k < n {
            let akk = w[(k, k)].abs();
            let (r, lambda) = (k + 1..n)
                .map(|i| (i, w[(i, k)].abs()))
                .fold((k, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if akk.max(lambda) <= tiny {
                return Err(FactorError::Singular { index: k });
            }
            let two_by_two = if akk >= alpha * lambda {
                false
            } else {
                let sigma = (k..n)
                    .filter(|&j| j != r)
                    .fold(T::zero(), |acc, j| acc.max(w[(r, j)].abs()));
                if akk * sigma >= alpha * lambda * lambda {
                    false
                } else if w[(r, r)].abs() >= alpha * sigma {
                    swap_sym(&mut w, &mut l, &mut perm, k, r);
                    false
                } else {
                    swap_sym(&mut w, &mut l, &mut perm, k + 1, r);
                    true
                }
            };

            if !two_by_two {
                let d = w[(k, k)];
                for i in k + 1..n {
                    l[(i, k)] = w[(i, k)] / d;
                }
                for i in k + 1..n {
                    let li = l[(i, k)];
                    if li == T::zero() {
                        continue;
                    }
                    for j in k + 1..=i {
                        let v = li * w[(j, k)];
                        w[(i, j)] -= v;
                        w[(j, i)] = w[(i, j)];
                    }
                }
                pivots.push(Pivot::One(d));
                k += 1;
            } else {
                let (a11, a21, a22) = (w[(k, k)], w[(k + 1, k)], w[(k + 1, k + 1)]);
                let det = a11 * a22 - a21 * a21;
                if det.abs() <= tiny {
                    return Err(FactorError::Singular { index: k });
                }
                for i in k + 2..n {
                    let (u, v) = (w[(i, k)], w[(i, k + 1)]);
                    l[(i, k)] = (u * a22 - v * a21) / det;
                    l[(i, k + 1)] = (v * a11 - u * a21) / det;
                }
                for i in k + 2..n {
                    let (li0, li1) = (l[(i, k)], l[(i, k + 1)]);
                    for j in k + 2..=i {
                        let v = li0 * w[(j, k)] + li1 * w[(j, k + 1)];
                        w[(i, j)] -= v;
                        w[(j, i)] = w[(i, j)];
                    }
                }
                pivots.push(Pivot::Two(a11, a21, a22));
                pivots.push(Pivot::Tail);
                k += 2;
            }
        }
        Ok(Self { l, pivots, perm })
    }

    /// Number of negative eigenvalues of `D` (the inertia's negative part).
    pub fn negative_count(&self) -> usize {
        let mut count = 0;
        for p in &self.pivots {
            match *p {
                Pivot::One(d) if d < T::zero() => count += 1,
                Pivot::Two(a, b, c) => {
                    let det = a * c - b * b;
                    if det < T::zero() {
                        count += 1;
                    } else if a + c < T::zero() {
                        count += 2;
                    }
                }
                _ => {}
            }
        }
        count
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.l.nrows();
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                let v = self.l[(i, k)] * x[k];
                x[i] -= v;
            }
        }
        let mut i = 0;
        while i < n {
            match self.pivots[i] {
                Pivot::One(d) => {
                    x[i] /= d;
                    i += 1;
                }
                Pivot::Two(a, b2, c) => {
                    let det = a * c - b2 * b2;
                    let (u, v) = (x[i], x[i + 1]);
                    x[i] = (c * u - b2 * v) / det;
                    x[i + 1] = (a * v - b2 * u) / det;
                    i += 2;
                }
                Pivot::Tail => unreachable!("tail pivots are consumed by their block"),
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                let v = self.l[(k, i)] * x[k];
                x[i] -= v;
            }
        }
        let mut out = vec![T::zero(); n];
        for (i, &p) in self.perm.iter().enumerate() {
            out[p] = x[i];
        }
        out
    }
}
