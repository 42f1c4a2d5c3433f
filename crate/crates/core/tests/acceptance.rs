//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shiftqp::diff::FdOptions;
use shiftqp::kkt::assemble_condensed;
use shiftqp::model::{degenerate_suite, perturb, random_qp, solve_sudoku, validate_grid, Given};
use shiftqp::ncp::phi;
use shiftqp::solver::perturbed_residual;
use shiftqp::*;

/// A solved instance kept for the independent stopping re-check.
struct SolvedCase {
    label: String,
    model: QpModel<f64>,
    it: Iterate<f64>,
    mu: f64,
    eps_abs: f64,
    eps_rel: f64,
}

#[derive(Default)]
struct Ledger {
    solved: Vec<SolvedCase>,
}

impl Ledger {
    fn record(&mut self, label: impl Into<String>, model: &QpModel<f64>, r: &SolveReport<f64>, p: &SolverParams<f64>) {
        if r.status == Status::Solved {
            self.solved.push(SolvedCase {
                label: label.into(),
                model: model.clone(),
                it: r.solution.clone(),
                mu: r.penalty.mu,
                eps_abs: p.eps_abs,
                eps_rel: p.eps_rel,
            });
        }
    }
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn eps(e: f64) -> SolverParams<f64> {
    SolverParams::default().with_tolerance(e)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let k = v.len();
    if k % 2 == 1 { v[k / 2] } else { 0.5 * (v[k / 2 - 1] + v[k / 2]) }
}

fn degenerate(ledger: &mut Ledger) -> Outcome {
    let p = eps(1e-6);
    let limits = [15, 30, 18];
    let t = Instant::now();
    let mut pass = true;
    let mut iters = Vec::new();
    for (k, model) in degenerate_suite::<f64>().iter().enumerate() {
        let r = solve(model, &p, None);
        ledger.record(format!("degenerate {}", k + 1), model, &r, &p);
        pass &= r.status == Status::Solved && r.iters <= limits[k];
        iters.push(format!("{}:{}", r.status, r.iters));
    }
    let el = t.elapsed();
    pass &= el < Duration::from_secs(1);
    outcome(pass, format!("iters [{}] limits {limits:?}, {el:.2?}", iters.join(", ")))
}

fn oracle_equivalence(ledger: &mut Ledger) -> Outcome {
    // At 1e-6 the stopping test admits objective errors around 1e-5 here,
    // above the 1e-6 agreement target, so the sweep runs the solver tighter.
    let p = eps(1e-9);
    let t = Instant::now();
    let (mut worst_obj, mut worst_x, mut non_unique, mut spurious, mut unsolved) = (0f64, 0f64, 0, 0, 0);
    for seed in 0..200u64 {
        let n = 1 + (seed % 8) as usize;
        let m = (((seed / 8) % 3) as usize).min(n);
        let pp = ((seed / 3) % 6) as usize;
        let model: QpModel<f64> = random_qp(n, m, pp, 5000 + seed).unwrap();
        let r = solve(&model, &p, None);
        ledger.record(format!("oracle sweep {seed}"), &model, &r, &p);
        if matches!(r.status, Status::PrimalInfeasible | Status::DualInfeasible) {
            spurious += 1;
            continue;
        }
        if r.status != Status::Solved {
            unsolved += 1;
            continue;
        }
        let sol = match enumerate_solve(&model) {
            Ok(OracleResult::Solution(s)) => s,
            other => panic!("oracle failed on a feasible bounded instance: {other:?}"),
        };
        let gap = (r.objective(&model) - sol.objective).abs() / 1f64.max(sol.objective.abs());
        worst_obj = worst_obj.max(gap);
        if sol.unique_primal {
            worst_x = worst_x.max(max_abs_diff(&r.solution.x, &sol.x));
        } else {
            non_unique += 1;
        }
    }
    let el = t.elapsed();
    let pass = worst_obj <= 1e-6 && worst_x <= 1e-4 && spurious == 0 && unsolved == 0 && el < Duration::from_secs(30);
    outcome(
        pass,
        format!(
            "max rel obj gap {worst_obj:.2e}, max x gap {worst_x:.2e}, non-unique {non_unique}, spurious {spurious}, unsolved {unsolved}, {el:.2?}"
        ),
    )
}

fn warm_start(ledger: &mut Ledger) -> Outcome {
    let p = SolverParams::<f64>::default();
    let deltas = [0.001, 0.01, 0.1];
    let mut wcr: Vec<Vec<f64>> = vec![Vec::new(); deltas.len()];
    let t = Instant::now();
    let mut failures = 0;
    for base in 0..50u64 {
        let model: QpModel<f64> = random_qp(40, 20, 20, 1000 + base).unwrap();
        let cold = solve(&model, &p, None);
        ledger.record(format!("warm base {base}"), &model, &cold, &p);
        if cold.status != Status::Solved {
            failures += 1;
            continue;
        }
        for (d, &delta) in deltas.iter().enumerate() {
            for r in 0..10u64 {
                let pert = perturb(&model, &PerturbSpec::new(delta, base * 100 + r)).unwrap();
                let warm = solve(&pert, &p, Some(&cold.solution));
                if warm.status != Status::Solved {
                    failures += 1;
                    continue;
                }
                ledger.record(format!("warm base {base} delta {delta} rep {r}"), &pert, &warm, &p);
                wcr[d].push(warm.iters as f64 / cold.iters as f64);
            }
        }
    }
    let med: Vec<f64> = wcr.iter_mut().map(|v| median(v)).collect();
    let pass = failures == 0 && med[0] <= 0.6 && med.windows(2).all(|w| w[0] <= w[1]);
    outcome(
        pass,
        format!("median WCR at delta {deltas:?} = {med:.3?}, unsolved {failures}, {:.2?}", t.elapsed()),
    )
}

fn ncp_identities() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_id = 0f64;
    for _ in 0..10_000 {
        let s = 10f64.powf(rng.random_range(-4.0..4.0));
        let mu = 10f64.powf(rng.random_range(-8.0..2.0));
        let z = mu / s;
        let scale = 1f64.max(s).max(z);
        let min = phi(NcpKind::SmoothedMin, &[s], &[z], mu).unwrap().value[0];
        let fb = phi(NcpKind::FischerBurmeister, &[s], &[z], mu).unwrap().value[0];
        worst_id = worst_id.max(min.abs() / scale).max((min - fb).abs() / scale);
    }

    // Central differences with a step proportional to the local curvature
    // radius, so truncation error stays small where s ≈ z and μ is tiny.
    let mut worst_jac = 0f64;
    for k in 0..1000 {
        let s = 10f64.powf(rng.random_range(-2.0..1.0));
        let z = 10f64.powf(rng.random_range(-2.0..1.0));
        let mu = 10f64.powf(rng.random_range(-8.0..0.0));
        let kind = if k % 2 == 0 { NcpKind::SmoothedMin } else { NcpKind::FischerBurmeister };
        let radius = match kind {
            NcpKind::SmoothedMin => ((s - z).powi(2) + 4.0 * mu).sqrt(),
            NcpKind::FischerBurmeister => (s * s + z * z + 2.0 * mu).sqrt(),
        };
        let h = 1e-4 * radius.min(1.0);
        let f = |a: f64, b: f64| phi(kind, &[a], &[b], mu).unwrap().value[0];
        let e = phi(kind, &[s], &[z], mu).unwrap();
        let fd_s = (f(s + h, z) - f(s - h, z)) / (2.0 * h);
        let fd_z = (f(s, z + h) - f(s, z - h)) / (2.0 * h);
        worst_jac = worst_jac
            .max((e.d_s[0] - fd_s).abs() / 1f64.max(fd_s.abs()))
            .max((e.d_z[0] - fd_z).abs() / 1f64.max(fd_z.abs()));
    }
    let el = t.elapsed();
    let pass = worst_id <= 1e-10 && worst_jac <= 1e-6 && el < Duration::from_secs(5);
    outcome(pass, format!("identity {worst_id:.2e}, jacobian {worst_jac:.2e}, {el:.2?}"))
}

fn direction_correctness() -> Outcome {
    let t = Instant::now();
    let (mut worst_sub, mut worst_cross, mut cases) = (0f64, 0f64, 0);
    for seed in 0..50u64 {
        let model: QpModel<f64> = random_qp(10, 3, 6, 7000 + seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = |k: usize, lo: f64, hi: f64| (0..k).map(|_| rng.random_range(lo..hi)).collect::<Vec<_>>();
        let it = Iterate { x: v(10, -1.0, 1.0), s: v(6, 1e-3, 2.0), y: v(3, -1.0, 1.0), z: v(6, 1e-3, 2.0) };
        let est = Estimates { x_e: v(10, -1.0, 1.0), y_e: v(3, -1.0, 1.0), z_e: v(6, 0.0, 1.0), s_e: v(6, 0.0, 1.0) };
        let mu = 10f64.powf(v(1, -9.0, 0.0)[0]);
        let params = SolverParams::<f64>::default();
        for pen in [PenaltyState::initial(&it, &params), PenaltyState::uniform(mu, params.rho_min)] {
            let res = perturbed_residual(&model, &it, &est, &pen, NcpKind::SmoothedMin).unwrap();
            let mut ws = assemble_condensed(&model, &it, &pen, NcpKind::SmoothedMin, &res.r_g).unwrap();
            ws.factorize_with_fallback(params.delta, params.max_boosts).unwrap();
            let a = ws.solve_direction(&model, &res, params.refine_steps).unwrap();
            let b = ws.solve_full(&model, &res, params.refine_steps).unwrap();
            worst_sub = worst_sub.max(ws.substitution_residual(&model, &a, &res));
            worst_cross = worst_cross.max(a.max_diff(&b) / 1f64.max(a.norm_inf()));
            cases += 1;
        }
    }
    let el = t.elapsed();
    let pass = worst_sub <= 1e-8 && worst_cross <= 1e-8 && el < Duration::from_secs(10);
    outcome(pass, format!("{cases} systems, substitution {worst_sub:.2e}, cross-path {worst_cross:.2e}, {el:.2?}"))
}

/// Stopping conditions recomputed from scratch with the smoothed-min NCP.
fn independent_stop(c: &SolvedCase) -> bool {
    let m = &c.model;
    let (n, me, p) = (m.n(), m.m(), m.p());
    let it = &c.it;
    let inf = |v: &[f64]| v.iter().fold(0f64, |a, x| a.max(x.abs()));
    let mut qx = vec![0.0; n];
    let mut aty = vec![0.0; n];
    let mut gtz = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            qx[i] += m.q()[(i, j)] * it.x[j];
        }
    }
    for r in 0..me {
        for j in 0..n {
            aty[j] += m.a()[(r, j)] * it.y[r];
        }
    }
    for r in 0..p {
        for j in 0..n {
            gtz[j] += m.g()[(r, j)] * it.z[r];
        }
    }
    let rd: Vec<f64> = (0..n).map(|i| qx[i] + m.c()[i] + aty[i] + gtz[i]).collect();
    let ax: Vec<f64> = (0..me).map(|r| (0..n).map(|j| m.a()[(r, j)] * it.x[j]).sum()).collect();
    let gx: Vec<f64> = (0..p).map(|r| (0..n).map(|j| m.g()[(r, j)] * it.x[j]).sum()).collect();
    let re: Vec<f64> = (0..me).map(|r| ax[r] - m.b()[r]).collect();
    let ri: Vec<f64> = (0..p).map(|r| gx[r] + it.s[r] - m.h()[r]).collect();
    let rn: Vec<f64> = (0..p).map(|r| it.s[r].min(it.z[r])).collect();
    let rg: Vec<f64> = (0..p)
        .map(|r| {
            let (s, z) = (it.s[r], it.z[r]);
            s + z - ((s - z).powi(2) + 4.0 * c.mu).sqrt()
        })
        .collect();
    let thr = |scale: f64| c.eps_abs + c.eps_rel * scale;
    let all_finite = [&it.x, &it.s, &it.y, &it.z].iter().all(|v| v.iter().all(|x| x.is_finite()));
    all_finite
        && inf(&rd) <= thr(inf(&qx).max(inf(m.c())).max(inf(&aty)).max(inf(&gtz)))
        && inf(&re) <= thr(inf(&ax).max(inf(m.b())))
        && inf(&ri) <= thr(inf(&gx).max(inf(&it.s)).max(inf(m.h())))
        && inf(&rn) <= thr(inf(&it.s).max(inf(&it.z)).max(inf(&rg)))
}

fn stopping_certificates(ledger: &Ledger) -> Outcome {
    let bad: Vec<&str> = ledger.solved.iter().filter(|c| !independent_stop(c)).map(|c| c.label.as_str()).collect();
    outcome(bad.is_empty(), format!("{} Solved reports re-checked, {} failed {:?}", ledger.solved.len(), bad.len(), bad))
}

fn infeasibility() -> Outcome {
    let p = eps(1e-6);
    // 1 ≤ x ≤ 0
    let infeasible =
        QpModel::without_equalities(Mat::identity(1), vec![0.0], Mat::from_row_slice(2, 1, &[-1.0, 1.0]), vec![-1.0, 0.0])
            .unwrap();
    // min −x  s.t.  x ≥ 0
    let unbounded =
        QpModel::without_equalities(Mat::zeros(1, 1), vec![-1.0], Mat::from_row_slice(1, 1, &[-1.0]), vec![0.0]).unwrap();
    let a = solve(&infeasible, &p, None);
    let b = solve(&unbounded, &p, None);
    let pass = a.status == Status::PrimalInfeasible && a.iters <= 50 && b.status == Status::DualInfeasible && b.iters <= 50;
    outcome(pass, format!("infeasible -> {} in {}, unbounded -> {} in {}", a.status, a.iters, b.status, b.iters))
}

fn gradients(ledger: &mut Ledger) -> Outcome {
    let t = Instant::now();
    let p = SolverParams::<f64>::default();
    let (mut checked, mut worst, mut weak, mut errors) = (0, 0f64, Vec::new(), Vec::new());
    let mut worst_entry = String::new();
    for seed in 0..200u64 {
        if checked == 20 {
            break;
        }
        let model: QpModel<f64> = random_qp(6, 2, 4, 9000 + seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = |k: usize| (0..k).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
        let weights = AdjointSeed { dl_dx: w(6), dl_dy: w(2), dl_dz: w(4), dl_ds: w(4) };
        let loss = LossSpec { weights, half_sq_x: 1.0 };
        ledger.record(format!("gradient seed {seed}"), &model, &solve(&model, &p, None), &p);
        match finite_diff_check(&model, &loss, &p, &FdOptions::default()) {
            Ok(rep) if rep.weak_activity => weak.push(seed),
            Ok(rep) => {
                checked += 1;
                if rep.max_rel_error >= worst {
                    worst = rep.max_rel_error;
                    worst_entry = format!("{} (seed {seed})", rep.worst_entry);
                }
            }
            Err(e) => errors.push(format!("seed {seed}: {e}")),
        }
    }
    let el = t.elapsed();
    let pass = checked == 20 && errors.is_empty() && worst <= 1e-5 && el < Duration::from_secs(60);
    outcome(
        pass,
        format!(
            "{checked} checked, max rel error {worst:.2e} at {worst_entry}, weak excluded {weak:?}, errors {errors:?}, {el:.2?}"
        ),
    )
}

fn sudoku() -> Outcome {
    let t = Instant::now();
    let p = SolverParams::<f64>::default();
    let partial = [Given::new(0, 0, 1), Given::new(1, 2, 1), Given::new(3, 3, 3)];
    let full = [[1, 2, 3, 4], [3, 4, 1, 2], [2, 1, 4, 3], [4, 3, 2, 1]];
    let complete: Vec<Given> = (0..4).flat_map(|i| (0..4).map(move |j| Given::new(i, j, full[i][j]))).collect();
    let mut pass = true;
    let mut notes = Vec::new();
    for (name, givens) in [("empty", &[][..]), ("partial", &partial[..]), ("complete", &complete[..])] {
        let out = solve_sudoku(2, givens, &p).unwrap();
        let ok = out.valid
            && validate_grid(2, &out.grid)
            && givens.iter().all(|g| out.grid[g.row][g.col] == g.digit);
        pass &= ok;
        notes.push(format!("{name}: {} in {} solves", if ok { "VALID" } else { "INVALID" }, out.solves));
    }
    let el = t.elapsed();
    pass &= el < Duration::from_secs(1);
    outcome(pass, format!("{}, {el:.2?}", notes.join(", ")))
}

fn main() {
    let mut ledger = Ledger::default();
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    results.push(("1 degenerate suite", degenerate(&mut ledger)));
    results.push(("2 oracle equivalence", oracle_equivalence(&mut ledger)));
    results.push(("3 warm start", warm_start(&mut ledger)));
    results.push(("4 ncp identities", ncp_identities()));
    results.push(("5 direction correctness", direction_correctness()));
    results.push(("7 infeasibility certificates", infeasibility()));
    results.push(("8 implicit gradients", gradients(&mut ledger)));
    results.push(("9 sudoku", sudoku()));
    results.insert(5, ("6 stopping certificates", stopping_certificates(&ledger)));

    let mut failed = 0;
    for (name, o) in &results {
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
