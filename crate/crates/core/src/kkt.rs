//! Newton system of the perturbed KKT conditions. Unknowns are ordered
//! `(Δx, Δy, Δz, Δs)`:
//!
//! ```text
//! [ Q̃  Aᵀ   Gᵀ   0  ] [Δx]     [r̃_d]
//! [ A  -ρ_e  0    0  ] [Δy] = − [r̃_e]
//! [ G   0   -ρ_i  I  ] [Δz]     [r̃_i]
//! [ 0   0    J̃_z  J̃_s] [Δs]     [r̃_g]
//! ```
//!
//! The condensed path eliminates `Δs` and the multipliers, leaving the
//! positive definite `H = Q̃ + JᵀD⁻¹J` with `J = [A; G]`.

use thiserror::Error;

use crate::linalg::{norm_inf, Cholesky, Ldlt, Mat};
use crate::model::QpModel;
use crate::ncp::{phi, NcpError, NcpKind};
use crate::scalar::Real;
use crate::solver::{Iterate, PenaltyState, PerturbedResidual};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KktMode {
    #[default]
    Condensed,
    Full,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KktError {
    #[error("factorization failed after {boosts} regularization boosts")]
    FactorizationFailed { boosts: usize },
    #[error("non-finite value in the KKT system")]
    NonFinite,
    #[error(transparent)]
    Ncp(#[from] NcpError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Direction<T> {
    pub dx: Vec<T>,
    pub dy: Vec<T>,
    pub dz: Vec<T>,
    pub ds: Vec<T>,
}

impl<T: Real> Direction<T> {
    pub fn zeros(n: usize, m: usize, p: usize) -> Self {
        Self { dx: vec![T::zero(); n], dy: vec![T::zero(); m], dz: vec![T::zero(); p], ds: vec![T::zero(); p] }
    }

    pub fn norm_inf(&self) -> T {
        norm_inf(&self.dx).max(norm_inf(&self.dy)).max(norm_inf(&self.dz)).max(norm_inf(&self.ds))
    }

    pub fn is_finite(&self) -> bool {
        [&self.dx, &self.dy, &self.dz, &self.ds].iter().all(|v| v.iter().all(|e| e.is_finite()))
    }

    fn add(&mut self, other: &Self) {
        for (a, b) in [
            (&mut self.dx, &other.dx),
            (&mut self.dy, &other.dy),
            (&mut self.dz, &other.dz),
            (&mut self.ds, &other.ds),
        ] {
            for (x, &y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    /// Largest componentwise difference.
    pub fn max_diff(&self, other: &Self) -> T {
        let d = |a: &[T], b: &[T]| a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc.max((x - y).abs()));
        d(&self.dx, &other.dx).max(d(&self.dy, &other.dy)).max(d(&self.dz, &other.dz)).max(d(&self.ds, &other.ds))
    }
}

/// Condensed KKT quantities, reused across iterations of one solve.
#[derive(Debug, Clone)]
pub struct KktWorkspace<T> {
    n: usize,
    m: usize,
    p: usize,
    /// `Q + ρ_d I`
    pub qtilde: Mat<T>,
    /// `[A; G]`
    pub j: Mat<T>,
    /// Inverse diagonal of `D = blkdiag(ρ_e I, P + ρ_i I)`.
    pub dinv: Vec<T>,
    /// `J̃_z / J̃_s`
    pub p_diag: Vec<T>,
    /// `r̃_g / J̃_s`
    pub q: Vec<T>,
    /// `Q̃ + JᵀD⁻¹J`, possibly with an extra diagonal boost.
    pub h: Mat<T>,
    /// `C_s + ρ_n`
    pub js: Vec<T>,
    /// `C_z + ρ_n`
    pub jz: Vec<T>,
    rho_d: T,
    rho_e: T,
    rho_i: T,
    chol: Option<Cholesky<T>>,
    pub boost_count: usize,
}

impl<T: Real> KktWorkspace<T> {
    pub fn new(model: &QpModel<T>) -> Self {
        let (n, m, p) = (model.n(), model.m(), model.p());
        let mut j = Mat::zeros(m + p, n);
        for i in 0..m {
            j.row_mut(i).copy_from_slice(model.a().row(i));
        }
        for i in 0..p {
            j.row_mut(m + i).copy_from_slice(model.g().row(i));
        }
        Self {
            n,
            m,
            p,
            qtilde: model.q().clone(),
            j,
            dinv: vec![T::zero(); m + p],
            p_diag: vec![T::zero(); p],
            q: vec![T::zero(); p],
            h: Mat::zeros(n, n),
            js: vec![T::zero(); p],
            jz: vec![T::zero(); p],
            rho_d: T::zero(),
            rho_e: T::zero(),
            rho_i: T::zero(),
            chol: None,
            boost_count: 0,
        }
    }

    /// Evaluates the NCP Jacobians at `it` and forms `P`, `q`, `D⁻¹` and `H`.
    pub fn assemble(
        &mut self,
        model: &QpModel<T>,
        it: &Iterate<T>,
        pen: &PenaltyState<T>,
        kind: NcpKind,
        r_g: &[T],
    ) -> Result<(), KktError> {
        let (n, m, p) = (self.n, self.m, self.p);
        let eval = phi(kind, &it.s, &it.z, pen.mu)?;
        for k in 0..p {
            self.js[k] = eval.d_s[k] + pen.rho_n;
            self.jz[k] = eval.d_z[k] + pen.rho_n;
            self.p_diag[k] = self.jz[k] / self.js[k];
            self.q[k] = r_g[k] / self.js[k];
            self.dinv[m + k] = T::one() / (self.p_diag[k] + pen.rho_i);
        }
        for k in 0..m {
            self.dinv[k] = T::one() / pen.rho_e;
        }
        self.rho_d = pen.rho_d;
        self.rho_e = pen.rho_e;
        self.rho_i = pen.rho_i;

        self.qtilde.as_mut_slice().copy_from_slice(model.q().as_slice());
        self.qtilde.add_diag(pen.rho_d);
        self.h.as_mut_slice().copy_from_slice(self.qtilde.as_slice());
        for r in 0..m + p {
            let w = self.dinv[r];
            let row = self.j.row(r);
            for a in 0..n {
                let wa = w * row[a];
                if wa == T::zero() {
                    continue;
                }
                let hrow = self.h.row_mut(a);
                for b in 0..n {
                    hrow[b] += wa * row[b];
                }
            }
        }
        self.h.symmetrize();
        self.chol = None;
        self.boost_count = 0;
        if !self.h.is_finite() || !self.q.iter().all(|v| v.is_finite()) {
            return Err(KktError::NonFinite);
        }
        Ok(())
    }

    /// Cholesky of `H`; on failure shifts the diagonal by `ρ_d(δ − 1)`
    /// (so the effective `ρ_d` grows by `δ`) and retries.
    pub fn factorize_with_fallback(&mut self, delta: T, max_boosts: usize) -> Result<(), KktError> {
        let mut shift = self.rho_d.max(T::min_positive_value());
        self.boost_count = 0;
        loop {
            match Cholesky::factor(&self.h) {
                Ok(f) => {
                    self.chol = Some(f);
                    return Ok(());
                }
                Err(_) if self.boost_count < max_boosts => {
                    let extra = shift * (delta - T::one());
                    self.h.add_diag(extra);
                    shift *= delta;
                    self.boost_count += 1;
                }
                Err(_) => return Err(KktError::FactorizationFailed { boosts: self.boost_count }),
            }
        }
    }

    pub fn is_factorized(&self) -> bool {
        self.chol.is_some()
    }

    /// One condensed solve for an arbitrary right-hand side.
    fn condensed_solve(&self, r_d: &[T], r_e: &[T], r_i: &[T], r_g: &[T]) -> Direction<T> {
        let chol = self.chol.as_ref().expect("workspace must be factorized");
        let (m, p) = (self.m, self.p);
        let q: Vec<T> = (0..p).map(|k| r_g[k] / self.js[k]).collect();
        let mut w: Vec<T> = Vec::with_capacity(m + p);
        w.extend(r_e.iter().zip(&self.dinv[..m]).map(|(&r, &d)| r * d));
        w.extend((0..p).map(|k| (r_i[k] - q[k]) * self.dinv[m + k]));
        let mut rhs = r_d.to_vec();
        self.j.tr_mul_vec_add(&w, &mut rhs);
        chol.solve_in_place(&mut rhs);
        let dx: Vec<T> = rhs.iter().map(|&v| -v).collect();
        let jdx = self.j.mul_vec(&dx);
        let dy: Vec<T> = (0..m).map(|k| (jdx[k] + r_e[k]) * self.dinv[k]).collect();
        let dz: Vec<T> = (0..p).map(|k| (jdx[m + k] + r_i[k] - q[k]) * self.dinv[m + k]).collect();
        let ds: Vec<T> = (0..p).map(|k| -(self.p_diag[k] * dz[k] + q[k])).collect();
        Direction { dx, dy, dz, ds }
    }

    /// `K·d + r` for the unsymmetrized full system.
    pub fn full_residual(&self, model: &QpModel<T>, d: &Direction<T>, res: &PerturbedResidual<T>) -> PerturbedResidual<T> {
        let mut r_d = self.qtilde.mul_vec(&d.dx);
        model.a().tr_mul_vec_add(&d.dy, &mut r_d);
        model.g().tr_mul_vec_add(&d.dz, &mut r_d);
        for (v, &r) in r_d.iter_mut().zip(&res.r_d) {
            *v += r;
        }
        let r_e = model.a().mul_vec(&d.dx).iter().enumerate().map(|(k, &v)| v - self.rho_e * d.dy[k] + res.r_e[k]).collect();
        let r_i = model
            .g()
            .mul_vec(&d.dx)
            .iter()
            .enumerate()
            .map(|(k, &v)| v - self.rho_i * d.dz[k] + d.ds[k] + res.r_i[k])
            .collect();
        let r_g = (0..self.p).map(|k| self.jz[k] * d.dz[k] + self.js[k] * d.ds[k] + res.r_g[k]).collect();
        PerturbedResidual { r_d, r_e, r_i, r_g }
    }

    /// `‖K·d + r‖∞ / max(1, ‖r‖∞)`
    pub fn substitution_residual(&self, model: &QpModel<T>, d: &Direction<T>, res: &PerturbedResidual<T>) -> T {
        self.full_residual(model, d, res).norm_inf() / T::one().max(res.norm_inf())
    }

    fn refine(
        &self,
        model: &QpModel<T>,
        res: &PerturbedResidual<T>,
        mut d: Direction<T>,
        steps: usize,
        solve: impl Fn(&PerturbedResidual<T>) -> Direction<T>,
    ) -> Direction<T> {
        let target = T::lit(1e-12).max(T::lit(10.0) * T::epsilon()) * T::one().max(res.norm_inf());
        let mut err = self.full_residual(model, &d, res);
        let mut err_norm = err.norm_inf();
        for _ in 0..steps {
            if err_norm <= target || !err_norm.is_finite() {
                break;
            }
            let mut trial = d.clone();
            trial.add(&solve(&err));
            let trial_err = self.full_residual(model, &trial, res);
            let trial_norm = trial_err.norm_inf();
            if !(trial_norm < err_norm) {
                break;
            }
            d = trial;
            err = trial_err;
            err_norm = trial_norm;
        }
        d
    }

    /// Newton direction through the condensed system, with up to
    /// `refine_steps` rounds of iterative refinement on the full system.
    pub fn solve_direction(
        &self,
        model: &QpModel<T>,
        res: &PerturbedResidual<T>,
        refine_steps: usize,
    ) -> Result<Direction<T>, KktError> {
        if self.chol.is_none() {
            return Err(KktError::FactorizationFailed { boosts: self.boost_count });
        }
        let solve = |r: &PerturbedResidual<T>| self.condensed_solve(&r.r_d, &r.r_e, &r.r_i, &r.r_g);
        let d = self.refine(model, res, solve(res), refine_steps, solve);
        if d.is_finite() { Ok(d) } else { Err(KktError::NonFinite) }
    }

    /// Unsymmetrized full matrix, rows `(d, e, i, g)` and columns `(x, y, z, s)`.
    pub fn full_matrix(&self, model: &QpModel<T>) -> Mat<T> {
        let (n, m, p) = (self.n, self.m, self.p);
        let (oy, oz, os) = (n, n + m, n + m + p);
        let mut k = Mat::zeros(n + m + 2 * p, n + m + 2 * p);
        for i in 0..n {
            for j in 0..n {
                k[(i, j)] = self.qtilde[(i, j)];
            }
        }
        for r in 0..m {
            for j in 0..n {
                let v = model.a()[(r, j)];
                k[(oy + r, j)] = v;
                k[(j, oy + r)] = v;
            }
            k[(oy + r, oy + r)] = -self.rho_e;
        }
        for r in 0..p {
            for j in 0..n {
                let v = model.g()[(r, j)];
                k[(oz + r, j)] = v;
                k[(j, oz + r)] = v;
            }
            k[(oz + r, oz + r)] = -self.rho_i;
            k[(oz + r, os + r)] = T::one();
            k[(os + r, oz + r)] = self.jz[r];
            k[(os + r, os + r)] = self.js[r];
        }
        k
    }

    /// Newton direction through a symmetric indefinite factorization of the
    /// full system. The last block row is scaled by `J̃_z⁻¹` to make it symmetric.
    pub fn solve_full(
        &self,
        model: &QpModel<T>,
        res: &PerturbedResidual<T>,
        refine_steps: usize,
    ) -> Result<Direction<T>, KktError> {
        let (n, m, p) = (self.n, self.m, self.p);
        let os = n + m + p;
        let mut k = self.full_matrix(model);
        for r in 0..p {
            k[(os + r, os - p + r)] = T::one();
            k[(os + r, os + r)] = self.js[r] / self.jz[r];
        }
        let f = Ldlt::factor(&k).map_err(|_| KktError::FactorizationFailed { boosts: 0 })?;
        let split = |sol: Vec<T>| Direction {
            dx: sol[..n].to_vec(),
            dy: sol[n..n + m].to_vec(),
            dz: sol[n + m..os].to_vec(),
            ds: sol[os..].to_vec(),
        };
        let solve = |r: &PerturbedResidual<T>| {
            let mut rhs: Vec<T> = Vec::with_capacity(n + m + 2 * p);
            rhs.extend(r.r_d.iter().map(|&v| -v));
            rhs.extend(r.r_e.iter().map(|&v| -v));
            rhs.extend(r.r_i.iter().map(|&v| -v));
            rhs.extend(r.r_g.iter().zip(&self.jz).map(|(&v, &j)| -v / j));
            split(f.solve(&rhs))
        };
        let d = self.refine(model, res, solve(res), refine_steps, solve);
        if d.is_finite() { Ok(d) } else { Err(KktError::NonFinite) }
    }
}

/// Builds and assembles a fresh workspace.
pub fn assemble_condensed<T: Real>(
    model: &QpModel<T>,
    it: &Iterate<T>,
    pen: &PenaltyState<T>,
    kind: NcpKind,
    r_g: &[T],
) -> Result<KktWorkspace<T>, KktError> {
    let mut ws = KktWorkspace::new(model);
    ws.assemble(model, it, pen, kind, r_g)?;
    Ok(ws)
}

/// Full-system direction for a fresh workspace.
pub fn solve_full_kkt<T: Real>(
    model: &QpModel<T>,
    it: &Iterate<T>,
    pen: &PenaltyState<T>,
    kind: NcpKind,
    res: &PerturbedResidual<T>,
    refine_steps: usize,
) -> Result<Direction<T>, KktError> {
    assemble_condensed(model, it, pen, kind, &res.r_g)?.solve_full(model, res, refine_steps)
}
