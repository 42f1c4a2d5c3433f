use crate::kkt::KktMode;
use crate::ncp::NcpKind;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
pub enum Verbosity {
    #[default]
    Silent,
    /// One line at exit.
    Summary,
    /// One line per iteration.
    Trace,
}

impl Verbosity {
    pub fn from_level(level: u8) -> Self {
        match level {
            0 => Self::Silent,
            1 => Self::Summary,
            _ => Self::Trace,
        }
    }
}

/// Solver hyperparameters. `Default` gives the double-precision table;
/// for `f32` the penalties and `mu_min` are scaled by [`Real::PARAM_SCALE`].
#[derive(Debug, Clone, PartialEq)]
pub struct SolverParams<T> {
    /// Neighborhood slack on `mu`.
    pub beta: T,
    /// Neighborhood contraction factor.
    pub theta: T,
    pub sigma_min: T,
    pub sigma_max: T,
    pub mu_min: T,
    pub theta_min: T,
    pub theta_lo: T,
    pub theta_up: T,
    pub theta_dec: T,
    pub theta_inc: T,
    pub rho_init: T,
    pub rho_min: T,
    /// Penalty decrease factor, also the factorization boost factor.
    pub delta: T,
    /// Armijo slope constant.
    pub eta: T,
    /// Non-monotone scaling of the reference merit.
    pub gamma: T,
    /// Extra `mu` decrease on strong progress.
    pub delta_mu_plus: T,
    pub eps_abs: T,
    pub eps_rel: T,
    pub eps_prim_inf: T,
    pub eps_dual_inf: T,
    pub max_iters: usize,
    pub time_limit_seconds: Option<f64>,
    pub ls_backtrack_factor: T,
    pub alpha_min: T,
    pub sigma_init: T,
    pub theta_init: T,
    pub max_boosts: usize,
    /// Iterative refinement steps on the Newton system (0 disables).
    pub refine_steps: usize,
    pub ncp: NcpKind,
    pub kkt: KktMode,
    pub verbosity: Verbosity,
}

impl<T: Real> Default for SolverParams<T> {
    fn default() -> Self {
        let l = T::lit;
        let scale = T::PARAM_SCALE;
        let eps = l(1e-6).max(l(100.0) * T::epsilon());
        Self {
            beta: l(0.85),
            theta: l(0.95),
            sigma_min: l(0.1),
            sigma_max: l(0.9),
            mu_min: l(1e-16 * scale),
            theta_min: l(0.1),
            theta_lo: l(0.3),
            theta_up: l(0.85),
            theta_dec: l(0.4),
            theta_inc: l(0.3),
            rho_init: l(1e-9 * scale),
            rho_min: l(1e-9 * scale),
            delta: l(5.0),
            eta: l(1e-2),
            gamma: l(1.0),
            delta_mu_plus: l(0.5),
            eps_abs: eps,
            eps_rel: eps,
            eps_prim_inf: l(1e-10 * scale),
            eps_dual_inf: l(1e-10 * scale),
            max_iters: 200,
            time_limit_seconds: None,
            ls_backtrack_factor: l(0.5),
            alpha_min: l(1e-10),
            sigma_init: l(0.5),
            theta_init: l(1.0),
            max_boosts: 10,
            refine_steps: 3,
            ncp: NcpKind::SmoothedMin,
            kkt: KktMode::Condensed,
            verbosity: Verbosity::Silent,
        }
    }
}

impl<T: Real> SolverParams<T> {
    /// Same parameters with both stopping tolerances set to `eps`.
    pub fn with_tolerance(mut self, eps: T) -> Self {
        self.eps_abs = eps;
        self.eps_rel = eps;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_precision_defaults() {
        let p = SolverParams::<f64>::default();
        assert_eq!(
            [p.beta, p.theta, p.sigma_min, p.sigma_max, p.mu_min, p.theta_min, p.theta_lo],
            [0.85, 0.95, 0.1, 0.9, 1e-16, 0.1, 0.3]
        );
        assert_eq!(
            [p.theta_up, p.theta_dec, p.theta_inc, p.rho_init, p.rho_min, p.delta, p.eta],
            [0.85, 0.4, 0.3, 1e-9, 1e-9, 5.0, 1e-2]
        );
        assert_eq!((p.gamma, p.delta_mu_plus, p.max_iters), (1.0, 0.5, 200));
        assert_eq!((p.eps_prim_inf, p.eps_dual_inf, p.alpha_min), (1e-10, 1e-10, 1e-10));
    }

    #[test]
    fn single_precision_scales_penalties() {
        let p = SolverParams::<f32>::default();
        assert!((p.rho_init - 1e-5).abs() < 1e-12);
        assert!((p.mu_min - 1e-12).abs() < 1e-18);
    }
}
