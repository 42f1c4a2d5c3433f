//! Subcommand implementations for the `shiftqp` binary. Each `cmd_*` returns
//! plain data so it can be tested without spawning the process.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use shiftqp::diff::FdOptions;
use shiftqp::model::{self, degenerate_suite, perturb, random_qp, solve_sudoku, Given, SudokuOutcome};
use shiftqp::{
    finite_diff_check, solve, AdjointSeed, Iterate, KktMode, LossSpec, NcpKind, PerturbSpec, QpModel, SolveReport,
    SolverParams, Status,
};
use thiserror::Error;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub fn exit_code(status: Status) -> i32 {
    if status == Status::Solved { EXIT_OK } else { EXIT_FAIL }
}

/// Wall time rounded to microseconds.
fn seconds(t: Instant) -> f64 {
    (t.elapsed().as_secs_f64() * 1e6).round() / 1e6
}

pub fn write_csv<T: Serialize, W: Write>(records: &[T], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in records {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv<T: for<'de> Deserialize<'de>, R: Read>(r: R) -> Result<Vec<T>> {
    csv::Reader::from_reader(r).deserialize().map(|rec| rec.map_err(Into::into)).collect()
}

/// Plain-text iterate: one line per block (`x`, `s`, `y`, `z`) holding the
/// label followed by the values.
pub fn write_iterate(it: &Iterate<f64>) -> String {
    let mut out = String::new();
    for (label, v) in [("x", &it.x), ("s", &it.s), ("y", &it.y), ("z", &it.z)] {
        out.push_str(label);
        for x in v {
            write!(out, " {x:e}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn parse_iterate(text: &str) -> Result<Iterate<f64>> {
    let mut blocks: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (k, line) in text.lines().enumerate() {
        let mut tok = line.split_whitespace();
        let Some(label) = tok.next() else { continue };
        if !["x", "s", "y", "z"].contains(&label) || blocks.contains_key(label) {
            bail!("line {}: unexpected block label {label:?}", k + 1);
        }
        let vals = tok.map(|t| t.parse::<f64>()).collect::<Result<Vec<_>, _>>().with_context(|| format!("line {}", k + 1))?;
        blocks.insert(label, vals);
    }
    let mut take = |l: &str| blocks.remove(l).with_context(|| format!("missing block {l}"));
    Ok(Iterate { x: take("x")?, s: take("s")?, y: take("y")?, z: take("z")? })
}

pub struct SolveOutput {
    pub report: SolveReport<f64>,
    pub objective: f64,
}

impl SolveOutput {
    pub fn render(&self) -> String {
        let r = &self.report;
        let n = r.residuals;
        let mut s = String::new();
        writeln!(s, "status {}", r.status).unwrap();
        writeln!(s, "iterations {}", r.iters).unwrap();
        writeln!(s, "objective {:.12e}", self.objective).unwrap();
        writeln!(s, "residuals r_d {:.3e} r_e {:.3e} r_i {:.3e} r_n {:.3e}", n.r_d, n.r_e, n.r_i, n.r_n).unwrap();
        writeln!(s, "time {:.6}s", r.solve_seconds).unwrap();
        s.push_str(&write_iterate(&r.solution));
        s
    }
}

/// Solves a model file, optionally warm-started from an iterate file.
pub fn cmd_solve(path: &Path, params: &SolverParams<f64>, warm: Option<&Path>) -> Result<SolveOutput> {
    let model: QpModel<f64> = model::load(path).with_context(|| format!("reading {}", path.display()))?;
    let warm = match warm {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let it = parse_iterate(&text).with_context(|| format!("parsing {}", p.display()))?;
            if it.dims() != (model.n(), model.m(), model.p()) || it.s.len() != model.p() {
                bail!("warm-start iterate does not match the model dimensions");
            }
            Some(it)
        }
        None => None,
    };
    let report = solve(&model, params, warm.as_ref());
    let objective = report.objective(&model);
    Ok(SolveOutput { report, objective })
}

/// One solver run. Failed runs carry the configured upper bounds in
/// `seconds` and `iterations` so that profiles can rank them last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub problem: String,
    pub config: String,
    pub status: String,
    pub iterations: usize,
    pub seconds: f64,
    pub r_d: f64,
    pub r_e: f64,
    pub r_i: f64,
    pub r_n: f64,
}

impl BenchRecord {
    fn new(problem: String, config: &str, r: &SolveReport<f64>, seconds: f64, bounds: Option<(f64, usize)>) -> Self {
        let (seconds, iterations) = match bounds {
            Some((t, k)) if r.status != Status::Solved => (t, k),
            _ => (seconds, r.iters),
        };
        Self {
            problem,
            config: config.to_string(),
            status: r.status.to_string(),
            iterations,
            seconds,
            r_d: r.residuals.r_d,
            r_e: r.residuals.r_e,
            r_i: r.residuals.r_i,
            r_n: r.residuals.r_n,
        }
    }

    pub fn solved(&self) -> bool {
        self.status == Status::Solved.as_str()
    }
}

/// Solver variant label such as `condensed-min`.
pub fn config_id(params: &SolverParams<f64>) -> String {
    let kkt = match params.kkt {
        KktMode::Condensed => "condensed",
        KktMode::Full => "full",
    };
    let ncp = match params.ncp {
        NcpKind::SmoothedMin => "min",
        NcpKind::FischerBurmeister => "fb",
    };
    format!("{kkt}-{ncp}")
}

pub fn cmd_bench_degenerate(params: &SolverParams<f64>) -> Vec<BenchRecord> {
    let id = config_id(params);
    degenerate_suite::<f64>()
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let t = Instant::now();
            let r = solve(m, params, None);
            BenchRecord::new(format!("degenerate-{}", k + 1), &id, &r, seconds(t), None)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSize {
    pub n: usize,
    pub m: usize,
    pub p: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomBench {
    pub count: usize,
    pub size: ProblemSize,
    pub seed: u64,
    /// Substituted for the time of a failed run.
    pub upper_seconds: f64,
}

/// Runs every problem under the four KKT/NCP combinations. Records are
/// ordered by problem, then configuration.
pub fn cmd_bench_random(spec: &RandomBench, params: &SolverParams<f64>) -> Result<Vec<BenchRecord>> {
    let variants = [
        (KktMode::Condensed, NcpKind::SmoothedMin),
        (KktMode::Condensed, NcpKind::FischerBurmeister),
        (KktMode::Full, NcpKind::SmoothedMin),
        (KktMode::Full, NcpKind::FischerBurmeister),
    ];
    let ProblemSize { n, m, p } = spec.size;
    let mut out = Vec::new();
    for k in 0..spec.count {
        let model: QpModel<f64> = random_qp(n, m, p, spec.seed + k as u64)?;
        for (kkt, ncp) in variants {
            let cfg = SolverParams { kkt, ncp, ..params.clone() };
            let t = Instant::now();
            let r = solve(&model, &cfg, None);
            let bounds = Some((spec.upper_seconds, params.max_iters));
            out.push(BenchRecord::new(format!("random-{k}"), &config_id(&cfg), &r, seconds(t), bounds));
        }
    }
    Ok(out)
}

/// Warm-to-cold iteration ratio for one perturbed replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WcrRecord {
    pub base: usize,
    pub delta: f64,
    pub replicate: usize,
    pub n_cold: usize,
    pub n_warm: usize,
    pub wcr: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WarmstartBench {
    pub count: usize,
    pub size: ProblemSize,
    pub deltas: Vec<f64>,
    pub seed: u64,
}

pub const REPLICATES: usize = 10;

/// Cold-solves each base problem, then warm-starts ten perturbed copies per
/// delta from the base solution. Bases that fail the cold solve are skipped;
/// unsolved warm runs count `max_iters`.
pub fn cmd_bench_warmstart(spec: &WarmstartBench, params: &SolverParams<f64>) -> Result<Vec<WcrRecord>> {
    let ProblemSize { n, m, p } = spec.size;
    let mut out = Vec::new();
    for base in 0..spec.count {
        let model: QpModel<f64> = random_qp(n, m, p, spec.seed + base as u64)?;
        let cold = solve(&model, params, None);
        if cold.status != Status::Solved {
            continue;
        }
        for &delta in &spec.deltas {
            for r in 0..REPLICATES {
                let pseed = spec.seed.wrapping_mul(1_000_003).wrapping_add((base * 100 + r) as u64);
                let pert = perturb(&model, &PerturbSpec::new(delta, pseed))?;
                let warm = solve(&pert, params, Some(&cold.solution));
                let n_warm = if warm.status == Status::Solved { warm.iters } else { params.max_iters };
                out.push(WcrRecord {
                    base,
                    delta,
                    replicate: r + 1,
                    n_cold: cold.iters,
                    n_warm,
                    wcr: n_warm as f64 / cold.iters as f64,
                });
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WcrSummary {
    pub delta: f64,
    pub mean: f64,
    pub median: f64,
    pub count: usize,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    match k {
        0 => f64::NAN,
        _ if k % 2 == 1 => v[k / 2],
        _ => 0.5 * (v[k / 2 - 1] + v[k / 2]),
    }
}

/// Mean and median WCR per delta, in order of first appearance.
pub fn wcr_summary(records: &[WcrRecord]) -> Vec<WcrSummary> {
    let mut deltas: Vec<f64> = Vec::new();
    for r in records {
        if !deltas.contains(&r.delta) {
            deltas.push(r.delta);
        }
    }
    deltas
        .into_iter()
        .map(|delta| {
            let v: Vec<f64> = records.iter().filter(|r| r.delta == delta).map(|r| r.wcr).collect();
            WcrSummary { delta, mean: v.iter().sum::<f64>() / v.len() as f64, median: median(&v), count: v.len() }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProfileError {
    #[error("malformed records: {0}")]
    MalformedRecords(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Metric {
    #[default]
    Time,
    Iterations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub config: String,
    pub tau: f64,
    pub fraction: f64,
}

/// Smallest time used in ratios; one unit of the recorded resolution.
pub const TIME_FLOOR: f64 = 1e-6;

/// Performance ratios `r = t / min_s t` per problem and the fraction of
/// problems each configuration solves within `τ`. Every configuration must
/// have exactly one record per problem.
pub fn performance_profile(records: &[BenchRecord], taus: &[f64], metric: Metric) -> Result<Vec<ProfilePoint>, ProfileError> {
    let bad = |m: String| Err(ProfileError::MalformedRecords(m));
    let configs: BTreeSet<&str> = records.iter().map(|r| r.config.as_str()).collect();
    let problems: BTreeSet<&str> = records.iter().map(|r| r.problem.as_str()).collect();
    if configs.len() < 2 {
        return bad(format!("need at least two solver configurations, found {}", configs.len()));
    }
    if taus.iter().any(|t| !t.is_finite() || *t < 1.0) {
        return bad("tau values must be finite and at least 1".into());
    }
    let mut cost: BTreeMap<(&str, &str), f64> = BTreeMap::new();
    for r in records {
        let v = match metric {
            Metric::Time => r.seconds,
            Metric::Iterations => r.iterations as f64,
        };
        if !v.is_finite() || v < 0.0 {
            return bad(format!("invalid metric {v} for {}/{}", r.problem, r.config));
        }
        if cost.insert((r.problem.as_str(), r.config.as_str()), v.max(TIME_FLOOR)).is_some() {
            return bad(format!("duplicate record for {}/{}", r.problem, r.config));
        }
    }
    if cost.len() != configs.len() * problems.len() {
        return bad("some configuration is missing a problem".into());
    }
    let mut ratios: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for &p in &problems {
        let best = configs.iter().map(|&c| cost[&(p, c)]).fold(f64::INFINITY, f64::min);
        for &c in &configs {
            ratios.entry(c).or_default().push(cost[&(p, c)] / best);
        }
    }
    let np = problems.len() as f64;
    let mut out = Vec::new();
    for (c, r) in &ratios {
        for &tau in taus {
            let hits = r.iter().filter(|&&x| x <= tau).count();
            out.push(ProfilePoint { config: c.to_string(), tau, fraction: hits as f64 / np });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckCase {
    pub seed: u64,
    pub max_rel_error: f64,
    pub worst_entry: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GradcheckReport {
    pub checked: Vec<GradcheckCase>,
    pub weak: Vec<u64>,
    pub errors: Vec<(u64, String)>,
}

pub const GRADCHECK_TOL: f64 = 1e-5;

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.errors.is_empty() && self.checked.iter().all(|c| c.max_rel_error <= GRADCHECK_TOL)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.checked {
            let verdict = if c.max_rel_error <= GRADCHECK_TOL { "ok" } else { "FAIL" };
            writeln!(s, "seed {} max_rel_error {:.3e} at {} {verdict}", c.seed, c.max_rel_error, c.worst_entry).unwrap();
        }
        for (seed, e) in &self.errors {
            writeln!(s, "seed {seed} error: {e}").unwrap();
        }
        writeln!(s, "excluded (weak activity): {:?}", self.weak).unwrap();
        writeln!(s, "{}", if self.passed() { "PASS" } else { "FAIL" }).unwrap();
        s
    }
}

/// Gradient check on `count` random QPs with random linear-plus-quadratic
/// losses; instance `k` uses seed `seed + k`.
pub fn cmd_gradcheck(seed: u64, count: usize, params: &SolverParams<f64>) -> Result<GradcheckReport> {
    let (n, m, p) = (6, 2, 4);
    let mut report = GradcheckReport::default();
    for k in 0..count as u64 {
        let s = seed + k;
        let model: QpModel<f64> = random_qp(n, m, p, s)?;
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let mut w = |len: usize| (0..len).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
        let loss = LossSpec { weights: AdjointSeed { dl_dx: w(n), dl_dy: w(m), dl_dz: w(p), dl_ds: w(p) }, half_sq_x: 1.0 };
        match finite_diff_check(&model, &loss, params, &FdOptions::default()) {
            Ok(r) if r.weak_activity => report.weak.push(s),
            Ok(r) => report.checked.push(GradcheckCase { seed: s, max_rel_error: r.max_rel_error, worst_entry: r.worst_entry }),
            Err(e) => report.errors.push((s, e.to_string())),
        }
    }
    Ok(report)
}

/// Givens as `row col digit` triples, all 1-based; `#` starts a comment.
pub fn parse_givens(text: &str) -> Result<Vec<Given>> {
    let mut out = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let v = line
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("line {}", k + 1))?;
        match v[..] {
            [r, c, d] if r >= 1 && c >= 1 => out.push(Given::new(r - 1, c - 1, d)),
            _ => bail!("line {}: expected `row col digit` with 1-based indices", k + 1),
        }
    }
    Ok(out)
}

pub fn render_grid(grid: &[Vec<usize>]) -> String {
    grid.iter().map(|row| row.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(" ") + "\n").collect()
}

/// Givens are validated before any solve; contradictions are errors.
pub fn cmd_sudoku(n_block: usize, givens: &[Given], params: &SolverParams<f64>) -> Result<SudokuOutcome> {
    if !(2..=3).contains(&n_block) {
        bail!("n_block must be 2 or 3, got {n_block}");
    }
    Ok(solve_sudoku(n_block, givens, params)?)
}
