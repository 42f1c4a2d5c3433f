use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

use super::{ModelError, QpModel};
use crate::linalg::Mat;
use crate::scalar::Real;

/// Multiplicative data perturbation `x̃ = x + δ(mask ∘ η ∘ x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbSpec {
    pub delta: f64,
    pub seed: u64,
    /// Upper bound on the mask density of a block.
    pub mask_density_cap: f64,
    /// Expected number of perturbed entries per block when the block is large.
    pub mask_count_cap: f64,
}

impl PerturbSpec {
    pub fn new(delta: f64, seed: u64) -> Self {
        Self { delta, seed, mask_density_cap: 0.1, mask_count_cap: 20.0 }
    }

    fn check(&self) -> Result<(), ModelError> {
        let ok = self.delta >= 0.0
            && self.delta.is_finite()
            && self.mask_density_cap > 0.0
            && self.mask_density_cap <= 1.0
            && self.mask_count_cap > 0.0;
        if ok {
            Ok(())
        } else {
            Err(ModelError::InvalidDimensions(format!("bad perturbation spec {self:?}")))
        }
    }

    fn density(&self, entries: usize) -> f64 {
        self.mask_density_cap.min(self.mask_count_cap / entries.max(1) as f64)
    }
}

fn normal_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

fn to_real<T: Real>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::lit(x)).collect()
}

fn mat_to_real<T: Real>(m: &Mat<f64>) -> Mat<T> {
    Mat::from_vec(m.nrows(), m.ncols(), to_real(m.as_slice()))
}

/// Random strictly convex QP with a strictly feasible point.
///
/// `Q = LLᵀ + 1e-3 I`, Gaussian `A`, `G`, `c`, and `b = A x₀`, `h = G x₀ + |u|`.
pub fn random_qp<T: Real>(n: usize, m: usize, p: usize, seed: u64) -> Result<QpModel<T>, ModelError> {
    if n == 0 || m > n {
        return Err(ModelError::InvalidDimensions(format!("n={n}, m={m}, p={p}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = Mat::from_vec(n, n, normal_vec(&mut rng, n * n));
    let mut q = l.matmul(&l.transpose());
    q.add_diag(1e-3);
    q.symmetrize();
    let c = normal_vec(&mut rng, n);
    let a = Mat::from_vec(m, n, normal_vec(&mut rng, m * n));
    let g = Mat::from_vec(p, n, normal_vec(&mut rng, p * n));
    let x0 = normal_vec(&mut rng, n);
    let b = a.mul_vec(&x0);
    let gx0 = g.mul_vec(&x0);
    let h: Vec<f64> = gx0
        .iter()
        .map(|&v| {
            let mut u: f64 = rng.sample::<f64, _>(StandardNormal).abs();
            while u == 0.0 {
                u = rng.sample::<f64, _>(StandardNormal).abs();
            }
            v + u
        })
        .collect();
    debug_assert!(gx0.iter().zip(&h).all(|(g, h)| g < h));
    QpModel::new(mat_to_real(&q), to_real(&c), mat_to_real(&a), to_real(&b), mat_to_real(&g), to_real(&h))
}

/// Perturbs every data block; the pattern of zeros and the symmetry of `Q`
/// are preserved because the rule is multiplicative and `Q` is mirrored.
pub fn perturb<T: Real>(model: &QpModel<T>, spec: &PerturbSpec) -> Result<QpModel<T>, ModelError> {
    spec.check()?;
    if spec.delta == 0.0 {
        return Ok(model.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let unit = Uniform::new(0.0f64, 1.0).expect("valid range");
    let sym = Uniform::new_inclusive(-1.0f64, 1.0).expect("valid range");
    let delta = spec.delta;
    let mut block = |vals: &mut [T]| {
        let dens = spec.density(vals.len());
        for v in vals.iter_mut() {
            let zeta = unit.sample(&mut rng);
            let eta = sym.sample(&mut rng);
            if zeta < dens {
                let x = v.as_f64();
                *v = T::lit(x + delta * eta * x);
            }
        }
    };

    let n = model.n();
    let mut q = model.q().clone();
    let mut upper: Vec<T> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).map(|ij| q[ij]).collect();
    block(&mut upper);
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            q[(i, j)] = upper[k];
            q[(j, i)] = upper[k];
            k += 1;
        }
    }
    let mut c = model.c().to_vec();
    block(&mut c);
    let mut a = model.a().clone();
    block(a.as_mut_slice());
    let mut b = model.b().to_vec();
    block(&mut b);
    let mut g = model.g().clone();
    block(g.as_mut_slice());
    let mut h = model.h().to_vec();
    block(&mut h);
    QpModel::new(q, c, a, b, g, h)
}

/// The three degenerate problems: redundant constraints, an ill-conditioned
/// LICQ failure, and a problem with a non-unique primal solution.
pub fn degenerate_suite<T: Real>() -> Vec<QpModel<T>> {
    let l = T::lit;
    let m = |r: usize, c: usize, d: &[f64]| Mat::from_vec(r, c, d.iter().map(|&v| l(v)).collect());
    let v = |d: &[f64]| d.iter().map(|&x| l(x)).collect::<Vec<T>>();

    // min ½(x₁² + x₂²)  s.t.  x₁ ≥ 1, x₁ ≥ 0
    let p1 = QpModel::without_equalities(
        Mat::identity(2),
        v(&[0.0, 0.0]),
        m(2, 2, &[-1.0, 0.0, -1.0, 0.0]),
        v(&[-1.0, 0.0]),
    );
    // x₁ = 0 duplicates the active row of x ≤ 0
    let p2 = QpModel::new(
        m(2, 2, &[1e-10, 1e-12, 1e-12, 1e-6]),
        v(&[1e-4, -1.0]),
        m(1, 2, &[1.0, 0.0]),
        v(&[0.0]),
        Mat::identity(2),
        v(&[0.0, 0.0]),
    );
    // 0·x ≤ 0, 0 ≤ x₁ ≤ 3, 0 ≤ x₂ ≤ 3; x₂ does not enter the objective
    let p3 = QpModel::without_equalities(
        m(2, 2, &[1.0, 0.0, 0.0, 0.0]),
        v(&[1.0, 0.0]),
        m(5, 2, &[0.0, 0.0, -1.0, 0.0, 1.0, 0.0, 0.0, -1.0, 0.0, 1.0]),
        v(&[0.0, 0.0, 3.0, 0.0, 3.0]),
    );
    vec![
        p1.expect("problem 1 is well formed"),
        p2.expect("problem 2 is well formed"),
        p3.expect("problem 3 is well formed"),
    ]
}
