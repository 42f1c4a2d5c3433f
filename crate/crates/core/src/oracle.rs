//! Ground truth for small QPs by enumerating every active set.
//!
//! For each subset `W` of inequality rows the equality-constrained KKT system
//! `[Q Aᵀ G_Wᵀ; A 0 0; G_W 0 0]` is solved in the minimum-norm least-squares
//! sense (SVD). Consistent, primal feasible, dual feasible candidates are
//! kept and the one with the smallest objective wins.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linalg::{norm_inf, Mat};
use crate::model::QpModel;

pub const MAX_INEQUALITIES: usize = 20;
pub const MAX_VARIABLES: usize = 50;

const CONSISTENCY_TOL: f64 = 1e-8;
const FEAS_TOL: f64 = 1e-9;
const TIE_TOL: f64 = 1e-9;
const DISTINCT_X_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("problem too large for enumeration (n = {n}, p = {p})")]
    BudgetExceeded { n: usize, p: usize },
    #[error("no KKT point found, but neither infeasibility nor unboundedness could be shown")]
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Zero on rows outside the active set.
    pub z: Vec<f64>,
    pub objective: f64,
    pub active_set: Vec<usize>,
    /// False when another optimal candidate has a different `x`.
    pub unique_primal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OracleResult {
    Solution(OracleSolution),
    Infeasible,
    Unbounded,
}

impl OracleResult {
    pub fn solution(&self) -> Option<&OracleSolution> {
        match self {
            OracleResult::Solution(s) => Some(s),
            _ => None,
        }
    }
}

fn to_dmatrix(m: &Mat<f64>) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.nrows(), m.ncols(), m.as_slice())
}

fn candidates(model: &QpModel<f64>) -> Vec<OracleSolution> {
    let (n, m, p) = (model.n(), model.m(), model.p());
    let q = to_dmatrix(model.q());
    let a = to_dmatrix(model.a());
    let g = to_dmatrix(model.g());
    let h_scale = 1f64.max(norm_inf(model.h()));
    let mut out = Vec::new();
    for mask in 0u32..(1u32 << p) {
        let w: Vec<usize> = (0..p).filter(|&j| mask & (1 << j) != 0).collect();
        let k = w.len();
        let dim = n + m + k;
        let mut kkt = DMatrix::<f64>::zeros(dim, dim);
        kkt.view_mut((0, 0), (n, n)).copy_from(&q);
        for r in 0..m {
            for c in 0..n {
                kkt[(n + r, c)] = a[(r, c)];
                kkt[(c, n + r)] = a[(r, c)];
            }
        }
        for (t, &j) in w.iter().enumerate() {
            for c in 0..n {
                kkt[(n + m + t, c)] = g[(j, c)];
                kkt[(c, n + m + t)] = g[(j, c)];
            }
        }
        let mut rhs = DVector::<f64>::zeros(dim);
        for c in 0..n {
            rhs[c] = -model.c()[c];
        }
        for r in 0..m {
            rhs[n + r] = model.b()[r];
        }
        for (t, &j) in w.iter().enumerate() {
            rhs[n + m + t] = model.h()[j];
        }
        let svd = kkt.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let eps = smax * dim as f64 * f64::EPSILON;
        let Ok(sol) = svd.solve(&rhs, eps) else { continue };
        let resid = (&kkt * &sol - &rhs).amax();
        if !resid.is_finite() || resid > CONSISTENCY_TOL * 1f64.max(rhs.amax()) {
            continue;
        }
        let x: Vec<f64> = sol.rows(0, n).iter().copied().collect();
        let zw: Vec<f64> = sol.rows(n + m, k).iter().copied().collect();
        if zw.iter().any(|&v| v < -FEAS_TOL) {
            continue;
        }
        let gx = model.g().mul_vec(&x);
        if gx.iter().zip(model.h()).any(|(&l, &r)| l > r + FEAS_TOL * h_scale) {
            continue;
        }
        let mut z = vec![0.0; p];
        for (t, &j) in w.iter().enumerate() {
            z[j] = zw[t].max(0.0);
        }
        out.push(OracleSolution {
            objective: model.objective(&x),
            y: sol.rows(n, m).iter().copied().collect(),
            x,
            z,
            active_set: w,
            unique_primal: true,
        });
    }
    out
}

/// Solves `model` by enumeration. Needs `p ≤ 20` and `n ≤ 50`.
pub fn enumerate_solve(model: &QpModel<f64>) -> Result<OracleResult, OracleError> {
    let (n, p) = (model.n(), model.p());
    if p > MAX_INEQUALITIES || n > MAX_VARIABLES {
        return Err(OracleError::BudgetExceeded { n, p });
    }
    let cands = candidates(model);
    if cands.is_empty() {
        return no_kkt_point(model);
    }
    let best_obj = cands.iter().map(|c| c.objective).fold(f64::INFINITY, f64::min);
    let tie = TIE_TOL * 1f64.max(best_obj.abs());
    let mut ties = cands.into_iter().filter(|c| c.objective <= best_obj + tie);
    let mut best = ties.next().expect("at least one candidate attains the minimum");
    for other in ties {
        let dx = best.x.iter().zip(&other.x).fold(0f64, |acc, (a, b)| acc.max((a - b).abs()));
        if dx > DISTINCT_X_TOL {
            best.unique_primal = false;
        }
    }
    Ok(OracleResult::Solution(best))
}

/// Distinguishes an empty feasible set from an unbounded objective.
fn no_kkt_point(model: &QpModel<f64>) -> Result<OracleResult, OracleError> {
    let (n, m, p) = (model.n(), model.m(), model.p());
    // min ½‖x‖² over the feasible set exists iff the set is nonempty
    let proj = QpModel::new(
        Mat::identity(n),
        vec![0.0; n],
        model.a().clone(),
        model.b().to_vec(),
        model.g().clone(),
        model.h().to_vec(),
    )
    .expect("same blocks as a valid model");
    if candidates(&proj).is_empty() {
        return Ok(OracleResult::Infeasible);
    }
    // min cᵀd + ½‖d‖² over the recession cone {Qd = 0, Ad = 0, Gd ≤ 0}
    let mut rows = Mat::zeros(n + m, n);
    for i in 0..n {
        rows.row_mut(i).copy_from_slice(model.q().row(i));
    }
    for i in 0..m {
        rows.row_mut(n + i).copy_from_slice(model.a().row(i));
    }
    let cone = QpModel::new(Mat::identity(n), model.c().to_vec(), rows, vec![0.0; n + m], model.g().clone(), vec![0.0; p])
        .expect("same blocks as a valid model");
    let best = candidates(&cone).into_iter().map(|c| c.objective).fold(f64::INFINITY, f64::min);
    if best < -TIE_TOL {
        Ok(OracleResult::Unbounded)
    } else {
        Err(OracleError::Inconclusive)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{degenerate_suite, random_qp};
    use crate::solver::{outer_residuals, Iterate};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sol(model: &QpModel<f64>) -> OracleSolution {
        enumerate_solve(model).unwrap().solution().cloned().expect("solution")
    }

    fn kkt_error(model: &QpModel<f64>, s: &OracleSolution) -> f64 {
        let slack: Vec<f64> = model.h().iter().zip(model.g().mul_vec(&s.x)).map(|(h, g)| h - g).collect();
        let it = Iterate { x: s.x.clone(), s: slack.clone(), y: s.y.clone(), z: s.z.clone() };
        let o = outer_residuals(model, &it);
        let comp = slack.iter().zip(&s.z).fold(0f64, |acc, (a, b)| acc.max((a * b).abs()));
        let neg = slack.iter().chain(&s.z).fold(0f64, |acc, &v| acc.max(-v));
        norm_inf(&o.r_d).max(norm_inf(&o.r_e)).max(comp).max(neg)
    }

    #[test]
    fn problem_one() {
        let m = &degenerate_suite::<f64>()[0];
        let s = sol(m);
        assert!((s.x[0] - 1.0).abs() < 1e-12 && s.x[1].abs() < 1e-12);
        assert!((s.objective - 0.5).abs() < 1e-12);
        assert!(kkt_error(m, &s) < 1e-8);
    }

    #[test]
    fn problem_two_optimum_at_origin() {
        let m = &degenerate_suite::<f64>()[1];
        let s = sol(m);
        assert!(norm_inf(&s.x) < 1e-9);
        assert!(kkt_error(m, &s) < 1e-8);
    }

    #[test]
    fn problem_three_has_many_solutions() {
        let m = &degenerate_suite::<f64>()[2];
        let s = sol(m);
        assert!(!s.unique_primal);
        assert!(s.objective.abs() < 1e-12);
        assert!(s.x[0].abs() < 1e-12);
    }

    #[test]
    fn unbounded_and_infeasible() {
        let ray = QpModel::without_equalities(Mat::zeros(1, 1), vec![-1.0], Mat::from_row_slice(1, 1, &[-1.0]), vec![0.0]).unwrap();
        assert_eq!(enumerate_solve(&ray).unwrap(), OracleResult::Unbounded);
        let empty = QpModel::without_equalities(
            Mat::identity(1),
            vec![0.0],
            Mat::from_row_slice(2, 1, &[-1.0, 1.0]),
            vec![-1.0, 0.0],
        )
        .unwrap();
        assert_eq!(enumerate_solve(&empty).unwrap(), OracleResult::Infeasible);
    }

    #[test]
    fn budget() {
        let m: QpModel<f64> = random_qp(2, 0, 21, 0).unwrap();
        assert!(matches!(enumerate_solve(&m), Err(OracleError::BudgetExceeded { .. })));
    }

    #[test]
    fn random_instances_satisfy_kkt_and_beat_samples() {
        for seed in 0..20 {
            let m: QpModel<f64> = random_qp(4, 0, 4, seed).unwrap();
            let s = sol(&m);
            assert!(kkt_error(&m, &s) < 1e-8, "seed {seed}");
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut feasible = 0;
            while feasible < 1000 {
                let x: Vec<f64> = s.x.iter().map(|v| v + rng.random_range(-2.0..2.0)).collect();
                if m.infeasibility(&x) <= 0.0 {
                    feasible += 1;
                    assert!(s.objective <= m.objective(&x) + 1e-12);
                }
            }
        }
    }
}
