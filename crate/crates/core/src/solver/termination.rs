use crate::kkt::Direction;
use crate::linalg::{dot, norm_inf};
use crate::model::QpModel;
use crate::ncp::{phi_value, NcpKind};
use crate::scalar::Real;

use super::params::SolverParams;
use super::residual::outer_residuals;
use super::state::Iterate;

/// Residual and threshold of each stopping condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingCheck<T> {
    pub dual: (T, T),
    pub equality: (T, T),
    pub inequality: (T, T),
    pub complementarity: (T, T),
}

impl<T: Real> StoppingCheck<T> {
    pub fn passed(&self) -> bool {
        [self.dual, self.equality, self.inequality, self.complementarity].iter().all(|&(r, t)| r <= t)
    }
}

/// Evaluates the four mixed absolute/relative stopping conditions.
pub fn stopping_check<T: Real>(
    model: &QpModel<T>,
    it: &Iterate<T>,
    mu: T,
    kind: NcpKind,
    eps_abs: T,
    eps_rel: T,
) -> StoppingCheck<T> {
    let r = outer_residuals(model, it);
    let max4 = |a: T, b: T, c: T, d: T| a.max(b).max(c).max(d);
    let dual_scale = max4(
        norm_inf(&model.q().mul_vec(&it.x)),
        norm_inf(model.c()),
        norm_inf(&model.a().tr_mul_vec(&it.y)),
        norm_inf(&model.g().tr_mul_vec(&it.z)),
    );
    let eq_scale = norm_inf(&model.a().mul_vec(&it.x)).max(norm_inf(model.b()));
    let in_scale = norm_inf(&model.g().mul_vec(&it.x)).max(norm_inf(&it.s)).max(norm_inf(model.h()));
    let g = phi_value(kind, &it.s, &it.z, mu.max(T::zero())).unwrap_or_default();
    let ncp_scale = norm_inf(&it.s).max(norm_inf(&it.z)).max(norm_inf(&g));
    let thr = |scale: T| eps_abs + eps_rel * scale;
    StoppingCheck {
        dual: (norm_inf(&r.r_d), thr(dual_scale)),
        equality: (norm_inf(&r.r_e), thr(eq_scale)),
        inequality: (norm_inf(&r.r_i), thr(in_scale)),
        complementarity: (norm_inf(&r.r_n), thr(ncp_scale)),
    }
}

pub fn stopping_ok<T: Real>(model: &QpModel<T>, it: &Iterate<T>, mu: T, params: &SolverParams<T>) -> bool {
    it.is_finite() && stopping_check(model, it, mu, params.ncp, params.eps_abs, params.eps_rel).passed()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Certificate {
    PrimalInfeasible,
    DualInfeasible,
}

/// Farkas-type tests on the Newton direction.
pub fn detect_infeasibility<T: Real>(
    model: &QpModel<T>,
    dir: &Direction<T>,
    params: &SolverParams<T>,
) -> Option<Certificate> {
    let nx = norm_inf(&dir.dx);
    let ed = params.eps_dual_inf;
    if nx > T::zero() {
        let mut gds = model.g().mul_vec(&dir.dx);
        for (v, &s) in gds.iter_mut().zip(&dir.ds) {
            *v += s;
        }
        if norm_inf(&model.q().mul_vec(&dir.dx)) <= ed * nx
            && dot(model.c(), &dir.dx) < -ed
            && norm_inf(&model.a().mul_vec(&dir.dx)) <= ed * nx
            && norm_inf(&gds) <= ed * nx
        {
            return Some(Certificate::DualInfeasible);
        }
    }
    let ep = params.eps_prim_inf;
    let (ny, nz) = (norm_inf(&dir.dy), norm_inf(&dir.dz));
    let nl = ny + nz;
    if nl > T::zero() {
        let mut atl = model.a().tr_mul_vec(&dir.dy);
        model.g().tr_mul_vec_add(&dir.dz, &mut atl);
        let min_dz = dir.dz.iter().fold(T::infinity(), |acc, &v| acc.min(v));
        if norm_inf(&atl) <= ep * nl
            && dot(model.b(), &dir.dy) + dot(model.h(), &dir.dz) < -ep
            && (dir.dz.is_empty() || min_dz >= -ep * nz)
        {
            return Some(Certificate::PrimalInfeasible);
        }
    }
    None
}
