use crate::linalg::{axpy, norm2_sq};
use crate::model::QpModel;
use crate::scalar::Real;

use super::params::SolverParams;

/// Primal-dual point `(x, s, y, z)`. No sign restriction on `s` or `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct Iterate<T> {
    pub x: Vec<T>,
    pub s: Vec<T>,
    pub y: Vec<T>,
    pub z: Vec<T>,
}

impl<T: Real> Iterate<T> {
    pub fn zeros(n: usize, m: usize, p: usize) -> Self {
        Self { x: vec![T::zero(); n], s: vec![T::zero(); p], y: vec![T::zero(); m], z: vec![T::zero(); p] }
    }

    /// `x = 0`, `y = 0`, `z = 1`, `s = max(h − Gx, 1)`.
    pub fn cold_start(model: &QpModel<T>) -> Self {
        let x = vec![T::zero(); model.n()];
        let gx = model.g().mul_vec(&x);
        let s = model.h().iter().zip(&gx).map(|(&h, &g)| (h - g).max(T::one())).collect();
        Self { x, s, y: vec![T::zero(); model.m()], z: vec![T::one(); model.p()] }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.x.len(), self.y.len(), self.z.len())
    }

    pub fn is_finite(&self) -> bool {
        [&self.x, &self.s, &self.y, &self.z].iter().all(|v| v.iter().all(|e| e.is_finite()))
    }

    /// `self + alpha * (dx, ds, dy, dz)`
    pub fn step(&self, alpha: T, dx: &[T], ds: &[T], dy: &[T], dz: &[T]) -> Self {
        let mut out = self.clone();
        axpy(alpha, dx, &mut out.x);
        axpy(alpha, ds, &mut out.s);
        axpy(alpha, dy, &mut out.y);
        axpy(alpha, dz, &mut out.z);
        out
    }

    /// `‖min(s, z)‖²/p`, zero when `p = 0`.
    pub fn complementarity_predictor(&self) -> T {
        if self.s.is_empty() {
            return T::zero();
        }
        let v: Vec<T> = self.s.iter().zip(&self.z).map(|(&a, &b)| a.min(b)).collect();
        norm2_sq(&v) / T::lit(self.s.len() as f64)
    }
}

/// Proximal centers `(x_E, y_E, z_E, s_E)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimates<T> {
    pub x_e: Vec<T>,
    pub y_e: Vec<T>,
    pub z_e: Vec<T>,
    pub s_e: Vec<T>,
}

impl<T: Real> Estimates<T> {
    pub fn at(it: &Iterate<T>) -> Self {
        Self { x_e: it.x.clone(), y_e: it.y.clone(), z_e: it.z.clone(), s_e: it.s.clone() }
    }
}

/// Smoothing, centering, proximal penalties and interpolation weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyState<T> {
    pub mu: T,
    pub sigma: T,
    pub rho_d: T,
    pub rho_e: T,
    pub rho_i: T,
    pub rho_n: T,
    pub theta_d: T,
    pub theta_e: T,
    pub theta_i: T,
}

impl<T: Real> PenaltyState<T> {
    pub fn initial(it: &Iterate<T>, params: &SolverParams<T>) -> Self {
        Self {
            mu: it.complementarity_predictor().max(params.mu_min),
            sigma: params.sigma_init,
            rho_d: params.rho_init,
            rho_e: params.rho_init,
            rho_i: params.rho_init,
            rho_n: params.rho_init,
            theta_d: params.theta_init,
            theta_e: params.theta_init,
            theta_i: params.theta_init,
        }
    }

    /// Every penalty equal to `rho`, `mu` as given; used by tests and
    /// standalone KKT assembly.
    pub fn uniform(mu: T, rho: T) -> Self {
        Self {
            mu,
            sigma: T::lit(0.5),
            rho_d: rho,
            rho_e: rho,
            rho_i: rho,
            rho_n: rho,
            theta_d: T::one(),
            theta_e: T::one(),
            theta_i: T::one(),
        }
    }
}
