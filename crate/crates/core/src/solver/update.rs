use crate::kkt::Direction;
use crate::model::QpModel;
use crate::linalg::{axpy, dot};
use crate::ncp::{phi, NcpError, NcpKind};
use crate::scalar::Real;

use super::params::SolverParams;
use super::residual::{merit, perturbed_residual, PerturbedResidual};
use super::state::{Estimates, Iterate, PenaltyState};

/// Accepted step of the backtracking search.
#[derive(Debug, Clone)]
pub struct LineSearchResult<T> {
    pub alpha: T,
    pub merit: T,
    pub iterate: Iterate<T>,
    pub residual: PerturbedResidual<T>,
    /// No step length down to `alpha_min` satisfied the condition.
    pub stalled: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LineSearchError {
    #[error("merit is not finite at the current iterate")]
    NonFiniteMerit,
    #[error(transparent)]
    Ncp(#[from] NcpError),
}

/// `DM(U)ᵀΔU = r̃ᵀ(∂r̃/∂U)ΔU`. Equals `−2M` for an exact Newton direction
/// and zero for a zero direction.
pub fn directional_derivative<T: Real>(
    model: &QpModel<T>,
    it: &Iterate<T>,
    pen: &PenaltyState<T>,
    dir: &Direction<T>,
    res: &PerturbedResidual<T>,
    kind: NcpKind,
) -> Result<T, NcpError> {
    let e = phi(kind, &it.s, &it.z, pen.mu)?;
    let mut jd = model.q().mul_vec(&dir.dx);
    axpy(pen.rho_d, &dir.dx, &mut jd);
    model.a().tr_mul_vec_add(&dir.dy, &mut jd);
    model.g().tr_mul_vec_add(&dir.dz, &mut jd);
    let mut total = dot(&res.r_d, &jd);
    let ax = model.a().mul_vec(&dir.dx);
    for k in 0..ax.len() {
        total += res.r_e[k] * (ax[k] - pen.rho_e * dir.dy[k]);
    }
    let gx = model.g().mul_vec(&dir.dx);
    for k in 0..gx.len() {
        total += res.r_i[k] * (gx[k] - pen.rho_i * dir.dz[k] + dir.ds[k]);
        let js = e.d_s[k] + pen.rho_n;
        let jz = e.d_z[k] + pen.rho_n;
        total += res.r_g[k] * (jz * dir.dz[k] + js * dir.ds[k]);
    }
    Ok(total)
}

/// Backtracking on `M(U + αΔU) ≤ γM(U) + αηD` with `D` the exact directional
/// derivative of the merit.
pub fn line_search<T: Real>(
    model: &QpModel<T>,
    it: &Iterate<T>,
    est: &Estimates<T>,
    pen: &PenaltyState<T>,
    dir: &Direction<T>,
    res: &PerturbedResidual<T>,
    params: &SolverParams<T>,
    kind: NcpKind,
) -> Result<LineSearchResult<T>, LineSearchError> {
    let m0 = merit(res);
    if !m0.is_finite() {
        return Err(LineSearchError::NonFiniteMerit);
    }
    let slope = directional_derivative(model, it, pen, dir, res, kind)?;
    let mut alpha = T::one();
    loop {
        let trial = it.step(alpha, &dir.dx, &dir.ds, &dir.dy, &dir.dz);
        let r = perturbed_residual(model, &trial, est, pen, kind)?;
        let m = merit(&r);
        if m <= params.gamma * m0 + alpha * params.eta * slope {
            return Ok(LineSearchResult { alpha, merit: m, iterate: trial, residual: r, stalled: false });
        }
        if alpha <= params.alpha_min {
            return Ok(LineSearchResult { alpha, merit: m, iterate: trial, residual: r, stalled: true });
        }
        alpha = (alpha * params.ls_backtrack_factor).max(params.alpha_min);
    }
}

/// `‖r⁺‖∞ ≤ θ‖r‖∞ + βμ`
pub fn neighborhood_ok<T: Real>(after: T, before: T, mu: T, params: &SolverParams<T>) -> bool {
    after <= params.theta * before + params.beta * mu
}

/// Centering rule: predictor `‖min(s,z)‖²/p` scaled by `σ`, extra decrease and
/// smaller `σ` on strong progress, larger `σ` otherwise, never increasing `μ`.
pub fn update_centering<T: Real>(
    pen: &PenaltyState<T>,
    after: T,
    before: T,
    it: &Iterate<T>,
    params: &SolverParams<T>,
) -> PenaltyState<T> {
    let mut out = *pen;
    if it.s.is_empty() {
        return out;
    }
    let mut mu = params.mu_min.max(pen.sigma * it.complementarity_predictor());
    if after <= params.theta_up * before {
        mu = params.mu_min.max(params.delta_mu_plus * mu);
        out.sigma = params.sigma_min.max(pen.sigma - params.theta_dec * pen.sigma);
    } else {
        out.sigma = params.sigma_max.min(pen.sigma + params.theta_inc * (T::one() - pen.sigma));
    }
    out.mu = mu.min(pen.mu);
    out
}

/// Infinity norms driving the proximal updates: dual, equality, inequality
/// and NCP rows.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GroupNorms<T> {
    pub d: T,
    pub e: T,
    pub i: T,
    pub g: T,
}

fn step_theta<T: Real>(theta: T, rho: T, after: T, before: T, params: &SolverParams<T>) -> (T, T) {
    if after <= params.theta_lo * before {
        let t = theta - params.theta_dec * theta;
        let t = if t < params.theta_min { T::zero() } else { t };
        (t, (rho / params.delta).max(params.rho_min))
    } else if after >= params.theta_up * before {
        (T::one().min(theta + params.theta_inc * (T::one() - theta)), rho)
    } else {
        (theta, rho)
    }
}

/// Per-group interpolation weights and penalties, then new proximal centers
/// `x_E = x⁺ + θ_d(x − x⁺)` and likewise for `y`, `z`, `s`.
pub fn update_estimates<T: Real>(
    pen: &PenaltyState<T>,
    old: &Iterate<T>,
    new: &Iterate<T>,
    before: &GroupNorms<T>,
    after: &GroupNorms<T>,
    params: &SolverParams<T>,
) -> (PenaltyState<T>, Estimates<T>) {
    let mut out = *pen;
    (out.theta_d, out.rho_d) = step_theta(pen.theta_d, pen.rho_d, after.d, before.d, params);
    (out.theta_e, out.rho_e) = step_theta(pen.theta_e, pen.rho_e, after.e, before.e, params);
    (out.theta_i, out.rho_i) = step_theta(pen.theta_i, pen.rho_i, after.i.max(after.g), before.i.max(before.g), params);
    if after.g <= params.theta_lo * before.g {
        out.rho_n = (pen.rho_n / params.delta).max(params.rho_min);
    }
    let interp = |a: &[T], b: &[T], t: T| a.iter().zip(b).map(|(&xn, &xo)| xn + t * (xo - xn)).collect();
    let est = Estimates {
        x_e: interp(&new.x, &old.x, out.theta_d),
        y_e: interp(&new.y, &old.y, out.theta_e),
        z_e: interp(&new.z, &old.z, out.theta_i),
        s_e: interp(&new.s, &old.s, out.theta_i),
    };
    (out, est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;

    fn params() -> SolverParams<f64> {
        SolverParams::default()
    }

    fn point(s: Vec<f64>, z: Vec<f64>) -> Iterate<f64> {
        Iterate { x: vec![], s, y: vec![], z }
    }

    #[test]
    fn neighborhood_examples() {
        let p = params();
        assert!(neighborhood_ok(0.0, 5.0, 0.0, &p));
        assert!(!neighborhood_ok(0.96, 1.0, 0.0, &p));
        assert!(neighborhood_ok(1.0, 1.0, 0.1, &p));
    }

    #[test]
    fn centering_improvement_branch() {
        let p = params();
        let pen = PenaltyState { sigma: 0.5, mu: 10.0, ..PenaltyState::uniform(10.0, 1e-9) };
        let it = point(vec![1.0, 2.0], vec![3.0, 0.5]);
        let out = update_centering(&pen, 0.1, 1.0, &it, &p);
        assert!((out.sigma - 0.3).abs() < 1e-15);
        assert!((out.mu - 0.5 * 0.5 * 0.625).abs() < 1e-15);
    }

    #[test]
    fn centering_stagnation_branch() {
        let p = params();
        let pen = PenaltyState { sigma: 0.5, mu: 10.0, ..PenaltyState::uniform(10.0, 1e-9) };
        let it = point(vec![1.0, 2.0], vec![3.0, 0.5]);
        let out = update_centering(&pen, 0.9, 1.0, &it, &p);
        assert!((out.sigma - 0.65).abs() < 1e-15);
        assert!((out.mu - 0.5 * 0.625).abs() < 1e-15);
    }

    #[test]
    fn centering_never_increases_mu() {
        let p = params();
        let pen = PenaltyState { sigma: 0.9, ..PenaltyState::uniform(1e-3, 1e-9) };
        let it = point(vec![5.0], vec![5.0]);
        assert_eq!(update_centering(&pen, 0.9, 1.0, &it, &p).mu, 1e-3);
        let none = point(vec![], vec![]);
        assert_eq!(update_centering(&pen, 0.0, 1.0, &none, &p), pen);
    }

    #[test]
    fn theta_rules() {
        let p = params();
        assert!((step_theta(1.0, 1e-9, 0.1, 1.0, &p).0 - 0.6).abs() < 1e-15);
        assert_eq!(step_theta(0.15, 1e-9, 0.1, 1.0, &p).0, 0.0);
        let (t, r) = step_theta(0.5, 1e-3, 0.1, 1.0, &p);
        assert!((t - 0.3).abs() < 1e-15);
        assert!((r - 2e-4).abs() < 1e-18);
        assert!((step_theta(0.5, 1e-9, 0.9, 1.0, &p).0 - 0.65).abs() < 1e-15);
        assert_eq!(step_theta(0.5, 1e-9, 0.5, 1.0, &p), (0.5, 1e-9));
    }

    #[test]
    fn zero_theta_anchors_at_new_iterate() {
        let p = params();
        let pen = PenaltyState { theta_i: 0.0, ..PenaltyState::uniform(1.0, 1e-9) };
        let old = Iterate { x: vec![1.0], s: vec![2.0], y: vec![], z: vec![3.0] };
        let new = Iterate { x: vec![0.0], s: vec![0.5], y: vec![], z: vec![0.25] };
        // middle band: θ_i stays at zero
        let before = GroupNorms { d: 1.0, e: 1.0, i: 1.0, g: 1.0 };
        let after = GroupNorms { d: 0.5, e: 0.5, i: 0.5, g: 0.5 };
        let (pen, est) = update_estimates(&pen, &old, &new, &before, &after, &p);
        assert_eq!(pen.theta_i, 0.0);
        assert_eq!(est.z_e, new.z);
        assert_eq!(est.s_e, new.s);
    }

    #[test]
    fn newton_step_accepted_on_linear_residual() {
        let model = QpModel::unconstrained(Mat::identity(2), vec![1.0, 1.0]).unwrap();
        let it = Iterate::zeros(2, 0, 0);
        let est = Estimates::at(&it);
        let pen = PenaltyState::uniform(1e-3, 0.0);
        let res = perturbed_residual(&model, &it, &est, &pen, NcpKind::SmoothedMin).unwrap();
        let dir = Direction { dx: vec![-1.0, -1.0], dy: vec![], dz: vec![], ds: vec![] };
        let out = line_search(&model, &it, &est, &pen, &dir, &res, &params(), NcpKind::SmoothedMin).unwrap();
        assert_eq!(out.alpha, 1.0);
        assert_eq!(out.merit, 0.0);
        let zero = Direction { dx: vec![0.0; 2], dy: vec![], dz: vec![], ds: vec![] };
        let out = line_search(&model, &it, &est, &pen, &zero, &res, &params(), NcpKind::SmoothedMin).unwrap();
        assert_eq!((out.alpha, out.stalled), (1.0, false));
    }

    #[test]
    fn curved_ncp_backtracks_once() {
        // one inequality row with G = 0: r̃ = (r_d, r_i, φ(s, z)) and only
        // the NCP row is nonlinear
        let model = QpModel::without_equalities(Mat::identity(1), vec![0.0], Mat::zeros(1, 1), vec![0.0]).unwrap();
        let it = Iterate { x: vec![0.0], s: vec![1.0], y: vec![], z: vec![2.0] };
        let est = Estimates::at(&it);
        let pen = PenaltyState::uniform(0.0, 0.0);
        let kind = NcpKind::SmoothedMin;
        let res = perturbed_residual(&model, &it, &est, &pen, kind).unwrap();
        let dir = Direction { dx: vec![0.0], dy: vec![], dz: vec![-4.0], ds: vec![0.0] };
        let m = |a: f64| {
            let t = it.step(a, &dir.dx, &dir.ds, &dir.dy, &dir.dz);
            merit(&perturbed_residual(&model, &t, &est, &pen, kind).unwrap())
        };
        let m0 = merit(&res);
        let p = params();
        let d = directional_derivative(&model, &it, &pen, &dir, &res, kind).unwrap();
        assert!(m(1.0) > m0 + p.eta * d);
        assert!(m(0.5) <= m0 + 0.5 * p.eta * d);
        let out = line_search(&model, &it, &est, &pen, &dir, &res, &p, kind).unwrap();
        assert_eq!(out.alpha, 0.5);
    }
}
