//! Sudoku as a strictly convex QP over the one-hot cube `x[(i·N + j)·N + k]`
//! (cell `(i, j)` holds digit `k + 1`).

use std::collections::HashSet;

use super::{ModelError, QpModel};
use crate::linalg::Mat;
use crate::scalar::Real;
use crate::solver::{solve, SolverParams, Status};

/// A fixed cell; `digit` is 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Given {
    pub row: usize,
    pub col: usize,
    pub digit: usize,
}

impl Given {
    pub fn new(row: usize, col: usize, digit: usize) -> Self {
        Self { row, col, digit }
    }
}

#[inline]
pub fn var_index(n: usize, row: usize, col: usize, digit0: usize) -> usize {
    (row * n + col) * n + digit0
}

fn check_givens(n_block: usize, givens: &[Given]) -> Result<(), ModelError> {
    let n = n_block * n_block;
    let mut cells = HashSet::new();
    let mut rows = HashSet::new();
    let mut cols = HashSet::new();
    let mut blocks = HashSet::new();
    for g in givens {
        if g.row >= n || g.col >= n || g.digit == 0 || g.digit > n {
            return Err(ModelError::InconsistentGivens(format!("{g:?} is out of range")));
        }
        let blk = (g.row / n_block) * n_block + g.col / n_block;
        if !cells.insert((g.row, g.col)) {
            return Err(ModelError::InconsistentGivens(format!("cell ({}, {}) given twice", g.row, g.col)));
        }
        if !rows.insert((g.row, g.digit)) || !cols.insert((g.col, g.digit)) || !blocks.insert((blk, g.digit)) {
            return Err(ModelError::InconsistentGivens(format!("digit {} repeated by {g:?}", g.digit)));
        }
    }
    Ok(())
}

/// Builds `min ½ε‖x‖² + cᵀx  s.t.  exactly-one rows, 0 ≤ x ≤ 1` with
/// `ε = 0.1` and `c = −1` on the givens.
///
/// The equality rows are the cell, row, column and block families. They are
/// rank deficient and kept that way.
pub fn sudoku_qp<T: Real>(n_block: usize, givens: &[Given]) -> Result<QpModel<T>, ModelError> {
    if !(2..=3).contains(&n_block) {
        return Err(ModelError::InvalidDimensions(format!("n_block must be 2 or 3, got {n_block}")));
    }
    check_givens(n_block, givens)?;
    let n = n_block * n_block;
    let nv = n * n * n;
    let mut groups: Vec<Vec<usize>> = Vec::with_capacity(4 * n * n);
    for i in 0..n {
        for j in 0..n {
            groups.push((0..n).map(|k| var_index(n, i, j, k)).collect());
        }
    }
    for i in 0..n {
        for k in 0..n {
            groups.push((0..n).map(|j| var_index(n, i, j, k)).collect());
        }
    }
    for j in 0..n {
        for k in 0..n {
            groups.push((0..n).map(|i| var_index(n, i, j, k)).collect());
        }
    }
    for bi in 0..n_block {
        for bj in 0..n_block {
            for k in 0..n {
                groups.push(
                    (0..n)
                        .map(|t| var_index(n, bi * n_block + t / n_block, bj * n_block + t % n_block, k))
                        .collect(),
                );
            }
        }
    }
    let mut a = Mat::zeros(groups.len(), nv);
    for (r, cols) in groups.iter().enumerate() {
        for &c in cols {
            a[(r, c)] = T::one();
        }
    }
    let b = vec![T::one(); groups.len()];
    let mut c = vec![T::zero(); nv];
    for g in givens {
        c[var_index(n, g.row, g.col, g.digit - 1)] = -T::one();
    }
    let mut q = Mat::identity(nv);
    for v in q.as_mut_slice() {
        *v *= T::lit(0.1);
    }
    let mut g = Mat::zeros(2 * nv, nv);
    for i in 0..nv {
        g[(i, i)] = -T::one();
        g[(nv + i, i)] = T::one();
    }
    let mut h = vec![T::zero(); 2 * nv];
    h[nv..].fill(T::one());
    QpModel::new(q, c, a, b, g, h)
}

/// Cell-wise argmax of the one-hot cube; digits are 1-based.
pub fn decode_grid<T: Real>(n_block: usize, x: &[T]) -> Vec<Vec<usize>> {
    let n = n_block * n_block;
    assert_eq!(x.len(), n * n * n, "sudoku vector length");
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let cell = &x[var_index(n, i, j, 0)..var_index(n, i, j, 0) + n];
                    let mut best = 0;
                    for k in 1..n {
                        if cell[k] > cell[best] {
                            best = k;
                        }
                    }
                    best + 1
                })
                .collect()
        })
        .collect()
}

/// Every row, column and block contains each digit exactly once.
pub fn validate_grid(n_block: usize, grid: &[Vec<usize>]) -> bool {
    let n = n_block * n_block;
    if grid.len() != n || grid.iter().any(|r| r.len() != n || r.iter().any(|&d| d == 0 || d > n)) {
        return false;
    }
    let full = |cells: &mut dyn Iterator<Item = usize>| {
        let mut counts = vec![0usize; n + 1];
        cells.for_each(|d| counts[d] += 1);
        counts[1..].iter().all(|&c| c == 1)
    };
    (0..n).all(|i| full(&mut (0..n).map(|j| grid[i][j])))
        && (0..n).all(|j| full(&mut (0..n).map(|i| grid[i][j])))
        && (0..n).all(|b| {
            let (bi, bj) = (b / n_block, b % n_block);
            full(&mut (0..n).map(|t| grid[bi * n_block + t / n_block][bj * n_block + t % n_block]))
        })
}

/// Result of [`solve_sudoku`].
#[derive(Debug, Clone, PartialEq)]
pub struct SudokuOutcome {
    pub grid: Vec<Vec<usize>>,
    pub valid: bool,
    pub solves: usize,
    pub iterations: usize,
}

/// Solves the relaxation and rounds by cell-wise argmax. When the rounded
/// grid is invalid, the most confident undecided cell is fixed as a given and
/// the relaxation is solved again, at most `N²` times.
pub fn solve_sudoku<T: Real>(
    n_block: usize,
    givens: &[Given],
    params: &SolverParams<T>,
) -> Result<SudokuOutcome, ModelError> {
    let n = n_block * n_block;
    let mut fixed = givens.to_vec();
    let mut iterations = 0;
    for solves in 1..=n * n {
        let model = sudoku_qp::<T>(n_block, &fixed)?;
        let report = solve(&model, params, None);
        iterations += report.iters;
        let x = &report.solution.x;
        let grid = decode_grid(n_block, x);
        let honors = fixed.iter().all(|g| grid[g.row][g.col] == g.digit);
        if report.status == Status::Solved && honors && validate_grid(n_block, &grid) {
            return Ok(SudokuOutcome { grid, valid: true, solves, iterations });
        }
        let mut best: Option<(T, Given)> = None;
        for i in 0..n {
            for j in 0..n {
                if fixed.iter().any(|g| g.row == i && g.col == j) {
                    continue;
                }
                let base = var_index(n, i, j, 0);
                for k in 0..n {
                    let v = x[base + k];
                    let g = Given::new(i, j, k + 1);
                    let allowed = fixed.iter().all(|f| {
                        let same_block = f.row / n_block == i / n_block && f.col / n_block == j / n_block;
                        !(f.digit == k + 1 && (f.row == i || f.col == j || same_block))
                    });
                    if allowed && best.is_none_or(|(b, _)| v > b) {
                        best = Some((v, g));
                    }
                }
            }
        }
        match best {
            Some((_, g)) => fixed.push(g),
            None => return Ok(SudokuOutcome { grid, valid: false, solves, iterations }),
        }
    }
    let model = sudoku_qp::<T>(n_block, &fixed)?;
    let report = solve(&model, params, None);
    let grid = decode_grid(n_block, &report.solution.x);
    let valid = validate_grid(n_block, &grid);
    Ok(SudokuOutcome { grid, valid, solves: n * n + 1, iterations: iterations + report.iters })
}


#[cfg(test)]
mod solve_tests {
    use super::*;

    #[test]
    fn full_grid_is_reproduced_in_one_solve() {
        let full = [[1, 2, 3, 4], [3, 4, 1, 2], [2, 1, 4, 3], [4, 3, 2, 1]];
        let givens: Vec<Given> =
            (0..4).flat_map(|i| (0..4).map(move |j| Given::new(i, j, full[i][j]))).collect();
        let out = solve_sudoku::<f64>(2, &givens, &SolverParams::default()).unwrap();
        assert!(out.valid);
        assert_eq!(out.solves, 1);
        for g in &givens {
            assert_eq!(out.grid[g.row][g.col], g.digit);
        }
    }

    #[test]
    fn empty_and_partial_grids() {
        let out = solve_sudoku::<f64>(2, &[], &SolverParams::default()).unwrap();
        assert!(out.valid);
        let givens = [Given::new(0, 0, 1), Given::new(1, 2, 1), Given::new(3, 3, 3)];
        let out = solve_sudoku::<f64>(2, &givens, &SolverParams::default()).unwrap();
        assert!(out.valid);
        assert!(givens.iter().all(|g| out.grid[g.row][g.col] == g.digit));
    }
}
