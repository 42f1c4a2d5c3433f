//! The outer loop: Newton direction, relaxed Armijo search, neighborhood
//! test, centering and proximal-center updates, stopping and certificates.

mod params;
mod residual;
mod state;
mod termination;
mod update;

use std::time::Instant;

pub use params::{SolverParams, Verbosity};
pub use residual::{merit, outer_residuals, perturbed_residual, OuterResiduals, PerturbedResidual, ResidualNorms};
pub use state::{Estimates, Iterate, PenaltyState};
pub use termination::{detect_infeasibility, stopping_check, stopping_ok, Certificate, StoppingCheck};
pub use update::{
    directional_derivative, line_search, neighborhood_ok, update_centering, update_estimates, GroupNorms, LineSearchError,
    LineSearchResult,
};

use crate::kkt::{KktMode, KktWorkspace};
use crate::linalg::norm_inf;
use crate::model::QpModel;
use crate::ncp::phi_value;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Solved,
    MaxIters,
    TimeLimit,
    PrimalInfeasible,
    DualInfeasible,
    /// A residual, merit or direction became non-finite.
    NumericalError,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Solved => "Solved",
            Status::MaxIters => "MaxIters",
            Status::TimeLimit => "TimeLimit",
            Status::PrimalInfeasible => "PrimalInfeasible",
            Status::DualInfeasible => "DualInfeasible",
            Status::NumericalError => "NumericalError",
        }
    }
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow<T> {
    pub iter: usize,
    pub alpha: T,
    pub mu: T,
    pub sigma: T,
    pub merit: T,
    pub residuals: ResidualNorms<T>,
    /// The neighborhood test passed and the parameters were updated.
    pub updated: bool,
    pub stalled: bool,
    pub boosts: usize,
}

#[derive(Debug, Clone)]
pub struct SolveReport<T> {
    pub status: Status,
    pub solution: Iterate<T>,
    /// Proximal centers at exit.
    pub estimates: Estimates<T>,
    /// Smoothing and penalty state at exit.
    pub penalty: PenaltyState<T>,
    pub iters: usize,
    pub residuals: ResidualNorms<T>,
    pub trace: Vec<TraceRow<T>>,
    /// The condensed Hessian could not be factorized even after boosting.
    pub factorization_failed: bool,
    pub solve_seconds: f64,
}

impl<T: Real> SolveReport<T> {
    pub fn objective(&self, model: &QpModel<T>) -> T {
        model.objective(&self.solution.x)
    }
}

/// Runs the solver from a cold start, or from `warm` with the proximal
/// centers placed at the warm iterate.
pub fn solve<T: Real>(model: &QpModel<T>, params: &SolverParams<T>, warm: Option<&Iterate<T>>) -> SolveReport<T> {
    let start = Instant::now();
    let kind = params.ncp;
    let mut it = match warm {
        Some(w) if w.dims() == (model.n(), model.m(), model.p()) && w.s.len() == model.p() => w.clone(),
        _ => Iterate::cold_start(model),
    };
    let mut est = Estimates::at(&it);
    let mut pen = PenaltyState::initial(&it, params);
    let mut ws = KktWorkspace::new(model);
    let mut trace = Vec::new();
    let factorization_failed = false;

    let finish = |status: Status, it: Iterate<T>, est, pen, iters, trace, failed| {
        let residuals = outer_residuals(model, &it).norms();
        let report = SolveReport {
            status,
            solution: it,
            estimates: est,
            penalty: pen,
            iters,
            residuals,
            trace,
            factorization_failed: failed,
            solve_seconds: start.elapsed().as_secs_f64(),
        };
        if params.verbosity >= Verbosity::Summary {
            eprintln!(
                "status {} iters {} r_d {:.2e} r_e {:.2e} r_i {:.2e} r_n {:.2e} time {:.3e}s",
                report.status,
                report.iters,
                residuals.r_d.as_f64(),
                residuals.r_e.as_f64(),
                residuals.r_i.as_f64(),
                residuals.r_n.as_f64(),
                report.solve_seconds
            );
        }
        report
    };

    let mut res = match perturbed_residual(model, &it, &est, &pen, kind) {
        Ok(r) if r.is_finite() => r,
        _ => return finish(Status::NumericalError, it, est, pen, 0, trace, false),
    };
    if params.verbosity >= Verbosity::Trace {
        eprintln!("{:>4} {:>9} {:>9} {:>5} {:>9} {:>9} {:>9} {:>9} {:>9}", "iter", "alpha", "mu", "sigma", "merit", "r_d", "r_e", "r_i", "r_n");
    }

    for k in 1..=params.max_iters {
        if let Some(limit) = params.time_limit_seconds {
            if k > 1 && start.elapsed().as_secs_f64() > limit {
                return finish(Status::TimeLimit, it, est, pen, k - 1, trace, factorization_failed);
            }
        }
        if ws.assemble(model, &it, &pen, kind, &res.r_g).is_err() {
            return finish(Status::NumericalError, it, est, pen, k, trace, factorization_failed);
        }
        let dir = match params.kkt {
            KktMode::Condensed => ws
                .factorize_with_fallback(params.delta, params.max_boosts)
                .and_then(|_| ws.solve_direction(model, &res, params.refine_steps)),
            KktMode::Full => ws.solve_full(model, &res, params.refine_steps),
        };
        let dir = match dir {
            Ok(d) => d,
            Err(_) => return finish(Status::MaxIters, it, est, pen, k, trace, true),
        };
        if let Some(cert) = detect_infeasibility(model, &dir, params) {
            let status = match cert {
                Certificate::PrimalInfeasible => Status::PrimalInfeasible,
                Certificate::DualInfeasible => Status::DualInfeasible,
            };
            return finish(status, it, est, pen, k, trace, factorization_failed);
        }
        let ls = match line_search(model, &it, &est, &pen, &dir, &res, params, kind) {
            Ok(ls) if ls.residual.is_finite() => ls,
            _ => return finish(Status::NumericalError, it, est, pen, k, trace, factorization_failed),
        };

        let (before, after) = (res.norm_inf(), ls.residual.norm_inf());
        let old = std::mem::replace(&mut it, ls.iterate);
        let updated = neighborhood_ok(after, before, pen.mu, params);
        if updated {
            let mu_step = pen.mu;
            let group = |x: &Iterate<T>| {
                let o = outer_residuals(model, x);
                GroupNorms {
                    d: norm_inf(&o.r_d),
                    e: norm_inf(&o.r_e),
                    i: norm_inf(&o.r_i),
                    g: norm_inf(&phi_value(kind, &x.s, &x.z, mu_step).unwrap_or_default()),
                }
            };
            let (g_old, g_new) = (group(&old), group(&it));
            pen = update_centering(&pen, after, before, &it, params);
            (pen, est) = update_estimates(&pen, &old, &it, &g_old, &g_new, params);
        }
        res = match perturbed_residual(model, &it, &est, &pen, kind) {
            Ok(r) if r.is_finite() => r,
            _ => return finish(Status::NumericalError, it, est, pen, k, trace, factorization_failed),
        };

        let norms = outer_residuals(model, &it).norms();
        let row = TraceRow {
            iter: k,
            alpha: ls.alpha,
            mu: pen.mu,
            sigma: pen.sigma,
            merit: ls.merit,
            residuals: norms,
            updated,
            stalled: ls.stalled,
            boosts: ws.boost_count,
        };
        if params.verbosity >= Verbosity::Trace {
            eprintln!(
                "{:>4} {:>9.2e} {:>9.2e} {:>5.3} {:>9.2e} {:>9.2e} {:>9.2e} {:>9.2e} {:>9.2e}",
                k,
                row.alpha.as_f64(),
                row.mu.as_f64(),
                row.sigma.as_f64(),
                row.merit.as_f64(),
                norms.r_d.as_f64(),
                norms.r_e.as_f64(),
                norms.r_i.as_f64(),
                norms.r_n.as_f64()
            );
        }
        trace.push(row);

        if stopping_ok(model, &it, pen.mu, params) {
            return finish(Status::Solved, it, est, pen, k, trace, factorization_failed);
        }
    }
    finish(Status::MaxIters, it, est, pen, params.max_iters, trace, factorization_failed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;
    use crate::model::{degenerate_suite, random_qp};

    fn eps6() -> SolverParams<f64> {
        SolverParams::default().with_tolerance(1e-6)
    }

    #[test]
    fn unconstrained_minimizer() {
        let m = QpModel::unconstrained(Mat::identity(2), vec![1.0, 1.0]).unwrap();
        let r = solve(&m, &eps6(), None);
        assert_eq!(r.status, Status::Solved);
        assert!(r.solution.x.iter().all(|v| (v + 1.0).abs() < 1e-8));
    }

    #[test]
    fn degenerate_problems() {
        let suite = degenerate_suite::<f64>();
        let r1 = solve(&suite[0], &eps6(), None);
        assert_eq!(r1.status, Status::Solved);
        assert!((r1.solution.x[0] - 1.0).abs() <= 1e-6 && r1.solution.x[1].abs() <= 1e-6);
        let r2 = solve(&suite[1], &eps6(), None);
        assert_eq!(r2.status, Status::Solved);
        assert!(norm_inf(&r2.solution.x) <= 1e-5);
        assert_eq!(solve(&suite[2], &eps6(), None).status, Status::Solved);
    }

    #[test]
    fn warm_start_at_solution_is_fast() {
        let m: QpModel<f64> = random_qp(10, 3, 6, 21).unwrap();
        let cold = solve(&m, &SolverParams::default().with_tolerance(1e-9), None);
        assert_eq!(cold.status, Status::Solved);
        let warm = solve(&m, &SolverParams::default().with_tolerance(1e-9), Some(&cold.solution));
        assert_eq!(warm.status, Status::Solved);
        assert!(warm.iters <= 2 && warm.iters < cold.iters);
    }

    #[test]
    fn infeasibility_fixtures() {
        let p = eps6();
        let infeasible = QpModel::without_equalities(
            Mat::identity(1),
            vec![0.0],
            Mat::from_row_slice(2, 1, &[-1.0, 1.0]),
            vec![-1.0, 0.0],
        )
        .unwrap();
        let r = solve(&infeasible, &p, None);
        assert_eq!(r.status, Status::PrimalInfeasible);
        assert!(r.iters <= 50);
        let unbounded =
            QpModel::without_equalities(Mat::zeros(1, 1), vec![-1.0], Mat::from_row_slice(1, 1, &[-1.0]), vec![0.0])
                .unwrap();
        let r = solve(&unbounded, &p, None);
        assert_eq!(r.status, Status::DualInfeasible);
        assert!(r.iters <= 50);
    }

    #[test]
    fn iteration_limit_and_trace() {
        let m: QpModel<f64> = random_qp(6, 2, 4, 3).unwrap();
        let mut p = SolverParams::default().with_tolerance(0.0);
        p.max_iters = 3;
        let r = solve(&m, &p, None);
        assert_eq!(r.status, Status::MaxIters);
        assert_eq!(r.trace.len(), 3);
    }

    #[test]
    fn full_kkt_and_fb_variants_solve() {
        let m: QpModel<f64> = random_qp(8, 2, 5, 17).unwrap();
        for (kkt, ncp) in [(KktMode::Full, crate::NcpKind::SmoothedMin), (KktMode::Condensed, crate::NcpKind::FischerBurmeister)] {
            let p = SolverParams { kkt, ncp, ..eps6() };
            assert_eq!(solve(&m, &p, None).status, Status::Solved, "{kkt:?} {ncp:?}");
        }
    }

    #[test]
    fn single_precision_solves() {
        let m: QpModel<f32> = random_qp(5, 1, 3, 2).unwrap();
        let r = solve(&m, &SolverParams::default(), None);
        assert_eq!(r.status, Status::Solved);
    }
}
