//! Implicit differentiation of the solution map through the perturbed KKT
//! residual at the returned iterate. The proximal centers are held fixed.

use thiserror::Error;

use crate::kkt::{KktError, KktWorkspace};
use crate::linalg::{norm_inf, Lu, Mat};
use crate::model::{QpModel, QpParts};
use crate::scalar::Real;
use crate::solver::{solve, SolveReport, SolverParams, Status};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiffError {
    #[error("adjoint system is singular even after regularization")]
    SingularAfterRegularization,
    #[error("re-solve during the finite-difference check ended with {0}")]
    SolveFailedDuringCheck(Status),
    #[error(transparent)]
    Kkt(#[from] KktError),
}

/// Gradient of a scalar loss with respect to the solution blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointSeed<T> {
    pub dl_dx: Vec<T>,
    pub dl_dy: Vec<T>,
    pub dl_dz: Vec<T>,
    pub dl_ds: Vec<T>,
}

impl<T: Real> AdjointSeed<T> {
    pub fn zeros(n: usize, m: usize, p: usize) -> Self {
        Self { dl_dx: vec![T::zero(); n], dl_dy: vec![T::zero(); m], dl_dz: vec![T::zero(); p], dl_ds: vec![T::zero(); p] }
    }

    pub fn norm_inf(&self) -> T {
        norm_inf(&self.dl_dx).max(norm_inf(&self.dl_dy)).max(norm_inf(&self.dl_dz)).max(norm_inf(&self.dl_ds))
    }
}

/// Adjoint vector, split by residual row block.
#[derive(Debug, Clone, PartialEq)]
pub struct Adjoint<T> {
    pub lambda_x: Vec<T>,
    pub lambda_y: Vec<T>,
    pub lambda_z: Vec<T>,
    pub lambda_s: Vec<T>,
    /// The diagonal shift was needed.
    pub regularized: bool,
    /// `‖Kᵀλ + ∂ℓ/∂U‖∞` for the system actually solved.
    pub residual: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpGradients<T> {
    pub dq: Mat<T>,
    pub dc: Vec<T>,
    pub da: Mat<T>,
    pub db: Vec<T>,
    pub dg: Mat<T>,
    pub dh: Vec<T>,
}

/// Pivot ratio below which the shifted system is used.
const NEAR_SINGULAR: f64 = 1e-13;
/// Diagonal shift of the regularized adjoint system.
pub const ADJOINT_SHIFT: f64 = 1e-11;

/// Solves `Kᵀλ = −∂ℓ/∂U` with `K` the Newton matrix at the reported
/// iterate and penalty state.
pub fn solve_adjoint<T: Real>(
    model: &QpModel<T>,
    report: &SolveReport<T>,
    params: &SolverParams<T>,
    seed: &AdjointSeed<T>,
) -> Result<Adjoint<T>, DiffError> {
    let (n, m, p) = (model.n(), model.m(), model.p());
    let mut ws = KktWorkspace::new(model);
    ws.assemble(model, &report.solution, &report.penalty, params.ncp, &vec![T::zero(); p])?;
    let k = ws.full_matrix(model);
    let mut rhs: Vec<T> = Vec::with_capacity(n + m + 2 * p);
    rhs.extend(seed.dl_dx.iter().map(|&v| -v));
    rhs.extend(seed.dl_dy.iter().map(|&v| -v));
    rhs.extend(seed.dl_dz.iter().map(|&v| -v));
    rhs.extend(seed.dl_ds.iter().map(|&v| -v));

    let well_posed = |lu: &Lu<T>| {
        let piv = lu.pivots();
        let hi = piv.iter().fold(T::zero(), |a, &b| a.max(b));
        let lo = piv.iter().fold(T::infinity(), |a, &b| a.min(b));
        piv.is_empty() || lo > T::lit(NEAR_SINGULAR) * hi
    };
    let (kk, lu, regularized) = match Lu::factor(&k) {
        Ok(lu) if well_posed(&lu) => (k, lu, false),
        _ => {
            // positive on the x and s rows, negative on the y and z rows
            let mut shifted = k;
            let s = T::lit(ADJOINT_SHIFT);
            for i in 0..n + m + 2 * p {
                let neg = i >= n && i < n + m + p;
                shifted[(i, i)] += if neg { -s } else { s };
            }
            let lu = Lu::factor(&shifted).map_err(|_| DiffError::SingularAfterRegularization)?;
            (shifted, lu, true)
        }
    };
    let lambda = lu.solve_transpose(&rhs);
    if !lambda.iter().all(|v| v.is_finite()) {
        return Err(DiffError::SingularAfterRegularization);
    }
    let mut r = kk.tr_mul_vec(&lambda);
    for (v, &b) in r.iter_mut().zip(&rhs) {
        *v -= b;
    }
    Ok(Adjoint {
        lambda_x: lambda[..n].to_vec(),
        lambda_y: lambda[n..n + m].to_vec(),
        lambda_z: lambda[n + m..n + m + p].to_vec(),
        lambda_s: lambda[n + m + p..].to_vec(),
        regularized,
        residual: norm_inf(&r),
    })
}

fn outer<T: Real>(u: &[T], v: &[T]) -> Mat<T> {
    let mut out = Mat::zeros(u.len(), v.len());
    for (i, &a) in u.iter().enumerate() {
        for (j, &b) in v.iter().enumerate() {
            out[(i, j)] = a * b;
        }
    }
    out
}

/// Contracts the adjoint with the parameter Jacobian of the residual.
pub fn hypergradient<T: Real>(report: &SolveReport<T>, adj: &Adjoint<T>) -> QpGradients<T> {
    let sol = &report.solution;
    let mut dq = outer(&adj.lambda_x, &sol.x);
    dq.symmetrize();
    let add = |mut a: Mat<T>, b: Mat<T>| {
        for (x, &y) in a.as_mut_slice().iter_mut().zip(b.as_slice()) {
            *x += y;
        }
        a
    };
    QpGradients {
        dq,
        dc: adj.lambda_x.clone(),
        da: add(outer(&sol.y, &adj.lambda_x), outer(&adj.lambda_y, &sol.x)),
        db: adj.lambda_y.iter().map(|&v| -v).collect(),
        dg: add(outer(&sol.z, &adj.lambda_x), outer(&adj.lambda_z, &sol.x)),
        dh: adj.lambda_z.iter().map(|&v| -v).collect(),
    }
}

/// `ℓ(U) = wᵀU + ½κ‖x‖²`, a loss simple enough to differentiate by hand.
#[derive(Debug, Clone, PartialEq)]
pub struct LossSpec<T> {
    pub weights: AdjointSeed<T>,
    pub half_sq_x: T,
}

impl<T: Real> LossSpec<T> {
    pub fn eval(&self, report: &SolveReport<T>) -> T {
        let u = &report.solution;
        let w = &self.weights;
        let d = crate::linalg::dot;
        d(&w.dl_dx, &u.x) + d(&w.dl_dy, &u.y) + d(&w.dl_dz, &u.z) + d(&w.dl_ds, &u.s)
            + T::lit(0.5) * self.half_sq_x * crate::linalg::norm2_sq(&u.x)
    }

    pub fn seed(&self, report: &SolveReport<T>) -> AdjointSeed<T> {
        let mut s = self.weights.clone();
        for (g, &x) in s.dl_dx.iter_mut().zip(&report.solution.x) {
            *g += self.half_sq_x * x;
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdOptions<T> {
    pub step: T,
    /// Tolerance for the forward and perturbed solves.
    pub solve_eps: T,
    /// Instances with `min_j max(s_j, z_j)` below this are flagged.
    pub weak_activity: T,
}

impl<T: Real> Default for FdOptions<T> {
    fn default() -> Self {
        Self { step: T::lit(1e-6), solve_eps: T::lit(1e-12), weak_activity: T::lit(1e-6) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdReport {
    /// `max |g_ift − g_fd| / max(1, |g_fd|)` over all entries.
    pub max_rel_error: f64,
    pub worst_entry: String,
    pub entries: usize,
    /// Some constraint has both slack and multiplier near zero, so the
    /// solution map is not differentiable there.
    pub weak_activity: bool,
    pub min_activity: f64,
}

/// Compares hypergradients with central differences, re-solving the QP for
/// every perturbed entry. Off-diagonal `Q` entries move as a symmetric pair.
pub fn finite_diff_check<T: Real>(
    model: &QpModel<T>,
    loss: &LossSpec<T>,
    params: &SolverParams<T>,
    opts: &FdOptions<T>,
) -> Result<FdReport, DiffError> {
    let tight = SolverParams { eps_abs: opts.solve_eps, eps_rel: opts.solve_eps, max_iters: params.max_iters.max(500), ..params.clone() };
    let base = solve(model, &tight, None);
    if base.status != Status::Solved {
        return Err(DiffError::SolveFailedDuringCheck(base.status));
    }
    let adj = solve_adjoint(model, &base, &tight, &loss.seed(&base))?;
    let grad = hypergradient(&base, &adj);
    let min_activity = base
        .solution
        .s
        .iter()
        .zip(&base.solution.z)
        .map(|(s, z)| s.max(*z).as_f64())
        .fold(f64::INFINITY, f64::min);

    let (n, m, p) = (model.n(), model.m(), model.p());
    let h = opts.step;
    let parts = model.clone().into_parts();
    let eval = |f: &dyn Fn(&mut QpParts<T>, T)| -> Result<f64, DiffError> {
        let mut val = [0.0; 2];
        for (slot, sign) in [(0, T::one()), (1, -T::one())] {
            let mut pp = parts.clone();
            f(&mut pp, sign * h);
            let pm = QpModel::new(pp.0, pp.1, pp.2, pp.3, pp.4, pp.5).expect("perturbed model stays valid");
            let r = solve(&pm, &tight, None);
            if r.status != Status::Solved {
                return Err(DiffError::SolveFailedDuringCheck(r.status));
            }
            val[slot] = loss.eval(&r).as_f64();
        }
        Ok((val[0] - val[1]) / (2.0 * h.as_f64()))
    };

    let mut worst = (0.0f64, String::new());
    let mut entries = 0;
    let mut record = |name: String, ift: f64, fd: f64| {
        let e = (ift - fd).abs() / 1f64.max(fd.abs());
        entries += 1;
        if e > worst.0 || worst.1.is_empty() {
            worst = (e, name);
        }
    };
    for i in 0..n {
        for j in i..n {
            let fd = eval(&|pp, d| {
                pp.0[(i, j)] += d;
                if i != j {
                    pp.0[(j, i)] += d;
                }
            })?;
            let ift = if i == j { grad.dq[(i, i)] } else { grad.dq[(i, j)] + grad.dq[(j, i)] };
            record(format!("Q[{i},{j}]"), ift.as_f64(), fd);
        }
        record(format!("c[{i}]"), grad.dc[i].as_f64(), eval(&|pp, d| pp.1[i] += d)?);
    }
    for r in 0..m {
        for j in 0..n {
            record(format!("A[{r},{j}]"), grad.da[(r, j)].as_f64(), eval(&|pp, d| pp.2[(r, j)] += d)?);
        }
        record(format!("b[{r}]"), grad.db[r].as_f64(), eval(&|pp, d| pp.3[r] += d)?);
    }
    for r in 0..p {
        for j in 0..n {
            record(format!("G[{r},{j}]"), grad.dg[(r, j)].as_f64(), eval(&|pp, d| pp.4[(r, j)] += d)?);
        }
        record(format!("h[{r}]"), grad.dh[r].as_f64(), eval(&|pp, d| pp.5[r] += d)?);
    }
    Ok(FdReport {
        max_rel_error: worst.0,
        worst_entry: worst.1,
        entries,
        weak_activity: min_activity < opts.weak_activity.as_f64(),
        min_activity,
    })
}
