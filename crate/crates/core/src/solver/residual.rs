use crate::linalg::{norm2_sq, norm_inf};
use crate::model::QpModel;
use crate::ncp::{phi_value, NcpError, NcpKind};
use crate::scalar::Real;

use super::state::{Estimates, Iterate, PenaltyState};

/// Residual of the proximally perturbed, shifted KKT system.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedResidual<T> {
    pub r_d: Vec<T>,
    pub r_e: Vec<T>,
    pub r_i: Vec<T>,
    pub r_g: Vec<T>,
}

impl<T: Real> PerturbedResidual<T> {
    pub fn norm_inf(&self) -> T {
        norm_inf(&self.r_d).max(norm_inf(&self.r_e)).max(norm_inf(&self.r_i)).max(norm_inf(&self.r_g))
    }

    pub fn is_finite(&self) -> bool {
        [&self.r_d, &self.r_e, &self.r_i, &self.r_g].iter().all(|v| v.iter().all(|e| e.is_finite()))
    }

    pub fn scaled(&self, k: T) -> Self {
        let f = |v: &[T]| v.iter().map(|&e| e * k).collect();
        Self { r_d: f(&self.r_d), r_e: f(&self.r_e), r_i: f(&self.r_i), r_g: f(&self.r_g) }
    }
}

/// `r̃_d = Qx + c + Aᵀy + Gᵀz + ρ_d(x − x_E)`, `r̃_e = Ax − b − ρ_e(y − y_E)`,
/// `r̃_i = Gx + s − h − ρ_i(z − z_E)`, `r̃_g = φ + ρ_n(s − s_E) + ρ_n(z − z_E)`.
pub fn perturbed_residual<T: Real>(
    model: &QpModel<T>,
    it: &Iterate<T>,
    est: &Estimates<T>,
    pen: &PenaltyState<T>,
    kind: NcpKind,
) -> Result<PerturbedResidual<T>, NcpError> {
    let mut r_d = model.q().mul_vec(&it.x);
    for (j, v) in r_d.iter_mut().enumerate() {
        *v += model.c()[j] + pen.rho_d * (it.x[j] - est.x_e[j]);
    }
    model.a().tr_mul_vec_add(&it.y, &mut r_d);
    model.g().tr_mul_vec_add(&it.z, &mut r_d);

    let mut r_e = model.a().mul_vec(&it.x);
    for (j, v) in r_e.iter_mut().enumerate() {
        *v -= model.b()[j] + pen.rho_e * (it.y[j] - est.y_e[j]);
    }
    let mut r_i = model.g().mul_vec(&it.x);
    for (j, v) in r_i.iter_mut().enumerate() {
        *v += it.s[j] - model.h()[j] - pen.rho_i * (it.z[j] - est.z_e[j]);
    }
    let mut r_g = phi_value(kind, &it.s, &it.z, pen.mu)?;
    for (j, v) in r_g.iter_mut().enumerate() {
        *v += pen.rho_n * (it.s[j] - est.s_e[j]) + pen.rho_n * (it.z[j] - est.z_e[j]);
    }
    Ok(PerturbedResidual { r_d, r_e, r_i, r_g })
}

/// `½‖r̃‖₂²`
pub fn merit<T: Real>(res: &PerturbedResidual<T>) -> T {
    T::lit(0.5) * (norm2_sq(&res.r_d) + norm2_sq(&res.r_e) + norm2_sq(&res.r_i) + norm2_sq(&res.r_g))
}

/// Unperturbed KKT residuals with `r_n = min(s, z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterResiduals<T> {
    pub r_d: Vec<T>,
    pub r_e: Vec<T>,
    pub r_i: Vec<T>,
    pub r_n: Vec<T>,
}

/// Infinity norms of the outer residual blocks.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ResidualNorms<T> {
    pub r_d: T,
    pub r_e: T,
    pub r_i: T,
    pub r_n: T,
}

impl<T: Real> OuterResiduals<T> {
    pub fn norms(&self) -> ResidualNorms<T> {
        ResidualNorms {
            r_d: norm_inf(&self.r_d),
            r_e: norm_inf(&self.r_e),
            r_i: norm_inf(&self.r_i),
            r_n: norm_inf(&self.r_n),
        }
    }
}

pub fn outer_residuals<T: Real>(model: &QpModel<T>, it: &Iterate<T>) -> OuterResiduals<T> {
    let mut r_d = model.q().mul_vec(&it.x);
    for (v, &c) in r_d.iter_mut().zip(model.c()) {
        *v += c;
    }
    model.a().tr_mul_vec_add(&it.y, &mut r_d);
    model.g().tr_mul_vec_add(&it.z, &mut r_d);
    let r_e = model.a().mul_vec(&it.x).iter().zip(model.b()).map(|(&a, &b)| a - b).collect();
    let r_i = model
        .g()
        .mul_vec(&it.x)
        .iter()
        .zip(model.h())
        .zip(&it.s)
        .map(|((&g, &h), &s)| g + s - h)
        .collect();
    let r_n = it.s.iter().zip(&it.z).map(|(&s, &z)| s.min(z)).collect();
    OuterResiduals { r_d, r_e, r_i, r_n }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;
    use crate::model::random_qp;

    #[test]
    fn zero_model_zero_residual() {
        let m = QpModel::without_equalities(Mat::zeros(2, 2), vec![0.0; 2], Mat::zeros(1, 2), vec![0.0]).unwrap();
        let it = Iterate::zeros(2, 0, 1);
        let r = perturbed_residual(&m, &it, &Estimates::at(&it), &PenaltyState::uniform(0.0, 0.0), NcpKind::SmoothedMin)
            .unwrap();
        assert_eq!(r.norm_inf(), 0.0);
        assert_eq!(merit(&r), 0.0);
    }

    #[test]
    fn estimates_at_iterate_give_outer_residual() {
        let m: QpModel<f64> = random_qp(4, 2, 3, 11).unwrap();
        let it = Iterate { x: vec![0.3, -1.0, 2.0, 0.1], s: vec![1.0, 0.5, 2.0], y: vec![0.2, -0.4], z: vec![0.7, 1.1, 0.0] };
        let pen = PenaltyState::uniform(0.1, 0.3);
        let r = perturbed_residual(&m, &it, &Estimates::at(&it), &pen, NcpKind::SmoothedMin).unwrap();
        let o = outer_residuals(&m, &it);
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-14);
        assert!(close(&r.r_d, &o.r_d));
        assert!(close(&r.r_e, &o.r_e));
        assert!(close(&r.r_i, &o.r_i));
        assert_eq!(r.r_g, phi_value(NcpKind::SmoothedMin, &it.s, &it.z, 0.1).unwrap());
    }

    #[test]
    fn scalar_dual_residual() {
        let m = QpModel::unconstrained(Mat::identity(1), vec![-1.0]).unwrap();
        let it = Iterate::zeros(1, 0, 0);
        let r = perturbed_residual(&m, &it, &Estimates::at(&it), &PenaltyState::uniform(1.0, 0.0), NcpKind::SmoothedMin)
            .unwrap();
        assert_eq!(r.r_d, vec![-1.0]);
        let o = outer_residuals(&m, &it);
        assert!(o.r_e.is_empty() && o.r_i.is_empty() && o.r_n.is_empty());
    }

    #[test]
    fn r_n_is_componentwise_min() {
        let m = QpModel::without_equalities(Mat::identity(1), vec![0.0], Mat::zeros(2, 1), vec![0.0; 2]).unwrap();
        let it = Iterate { x: vec![0.0], s: vec![1.0, 2.0], y: vec![], z: vec![3.0, 0.5] };
        assert_eq!(outer_residuals(&m, &it).r_n, vec![1.0, 0.5]);
    }

    #[test]
    fn merit_examples() {
        let r = PerturbedResidual { r_d: vec![3.0], r_e: vec![], r_i: vec![4.0], r_g: vec![] };
        assert_eq!(merit(&r), 12.5);
        assert_eq!(merit(&r.scaled(2.0)), 50.0);
    }
}
