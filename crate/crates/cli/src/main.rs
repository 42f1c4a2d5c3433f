use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use shiftqp::{KktMode, NcpKind, SolverParams, Verbosity};
use shiftqp_cli::*;

#[derive(Parser)]
#[command(name = "shiftqp", version, about = "Dense convex QP solver and benchmark harness")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Absolute stopping tolerance
    #[arg(long, global = true)]
    eps_abs: Option<f64>,
    /// Relative stopping tolerance
    #[arg(long, global = true)]
    eps_rel: Option<f64>,
    #[arg(long, global = true)]
    max_iters: Option<usize>,
    /// Wall-clock limit per solve, in seconds
    #[arg(long, global = true)]
    time_limit: Option<f64>,
    #[arg(long, global = true, default_value_t = 1000)]
    seed: u64,
    /// Write CSV output here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Kkt::Condensed)]
    kkt: Kkt,
    #[arg(long, global = true, value_enum, default_value_t = Ncp::Min)]
    ncp: Ncp,
    /// 0 silent, 1 summary, 2 per-iteration trace (stderr)
    #[arg(long, global = true, default_value_t = 0, value_parser = clap::value_parser!(u8).range(0..=2))]
    verbose: u8,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kkt {
    Condensed,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum Ncp {
    Min,
    Fb,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    Time,
    Iterations,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a model file
    Solve {
        path: PathBuf,
        /// Iterate file to warm-start from
        #[arg(long)]
        warm: Option<PathBuf>,
        /// Write the final iterate here
        #[arg(long)]
        save_iterate: Option<PathBuf>,
    },
    /// Run the three degenerate problems
    BenchDegenerate,
    /// Warm-to-cold iteration ratios on perturbed random problems
    BenchWarmstart {
        #[arg(long, default_value_t = 50)]
        count: usize,
        #[arg(long, default_value_t = 40)]
        n: usize,
        #[arg(long, default_value_t = 20)]
        m: usize,
        #[arg(long, default_value_t = 20)]
        p: usize,
        #[arg(long, value_delimiter = ',', default_value = "0.001,0.01,0.1")]
        deltas: Vec<f64>,
    },
    /// Random problems under every KKT/NCP combination
    BenchRandom {
        #[arg(long, default_value_t = 20)]
        count: usize,
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[arg(long, default_value_t = 5)]
        m: usize,
        #[arg(long, default_value_t = 10)]
        p: usize,
        /// Time charged to failed runs; defaults to the time limit, else 60 s
        #[arg(long)]
        upper_bound: Option<f64>,
    },
    /// Performance profile from a benchmark CSV
    Profile {
        records: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,1.25,1.5,2,4,8,16")]
        taus: Vec<f64>,
        #[arg(long, value_enum, default_value_t = MetricArg::Time)]
        metric: MetricArg,
    },
    /// Compare implicit gradients with finite differences
    Gradcheck {
        #[arg(long, default_value_t = 20)]
        count: usize,
    },
    /// Solve a Sudoku relaxation
    Sudoku {
        #[arg(long, default_value_t = 2)]
        n_block: usize,
        /// File of `row col digit` lines, 1-based
        #[arg(long)]
        givens: Option<PathBuf>,
    },
}

impl Common {
    fn params(&self) -> SolverParams<f64> {
        let mut p = SolverParams::default();
        if let Some(e) = self.eps_abs {
            p.eps_abs = e;
        }
        if let Some(e) = self.eps_rel {
            p.eps_rel = e;
        }
        if let Some(k) = self.max_iters {
            p.max_iters = k;
        }
        p.time_limit_seconds = self.time_limit;
        p.kkt = match self.kkt {
            Kkt::Condensed => KktMode::Condensed,
            Kkt::Full => KktMode::Full,
        };
        p.ncp = match self.ncp {
            Ncp::Min => NcpKind::SmoothedMin,
            Ncp::Fb => NcpKind::FischerBurmeister,
        };
        p.verbosity = Verbosity::from_level(self.verbose);
        p
    }

    fn emit_csv<T: Serialize>(&self, records: &[T]) -> Result<()> {
        match &self.out {
            Some(path) => {
                let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
                write_csv(records, f)
            }
            None => write_csv(records, io::stdout().lock()),
        }
    }
}

fn run(cli: Cli) -> Result<i32> {
    let c = &cli.common;
    let params = c.params();
    match cli.command {
        Command::Solve { path, warm, save_iterate } => {
            let out = cmd_solve(&path, &params, warm.as_deref())?;
            print!("{}", out.render());
            if let Some(p) = save_iterate {
                std::fs::write(&p, write_iterate(&out.report.solution)).with_context(|| format!("writing {}", p.display()))?;
            }
            Ok(exit_code(out.report.status))
        }
        Command::BenchDegenerate => {
            let recs = cmd_bench_degenerate(&params);
            c.emit_csv(&recs)?;
            let all = recs.iter().all(BenchRecord::solved);
            eprintln!("degenerate suite: {}", if all { "all Solved" } else { "some problems not Solved" });
            Ok(if all { EXIT_OK } else { EXIT_FAIL })
        }
        Command::BenchWarmstart { count, n, m, p, deltas } => {
            let spec = WarmstartBench { count, size: ProblemSize { n, m, p }, deltas, seed: c.seed };
            let recs = cmd_bench_warmstart(&spec, &params)?;
            c.emit_csv(&recs)?;
            for s in wcr_summary(&recs) {
                eprintln!("delta {} mean_wcr {:.4} median_wcr {:.4} runs {}", s.delta, s.mean, s.median, s.count);
            }
            Ok(EXIT_OK)
        }
        Command::BenchRandom { count, n, m, p, upper_bound } => {
            let upper_seconds = upper_bound.or(c.time_limit).unwrap_or(60.0);
            let spec = RandomBench { count, size: ProblemSize { n, m, p }, seed: c.seed, upper_seconds };
            let recs = cmd_bench_random(&spec, &params)?;
            c.emit_csv(&recs)?;
            Ok(EXIT_OK)
        }
        Command::Profile { records, taus, metric } => {
            let f = File::open(&records).with_context(|| format!("opening {}", records.display()))?;
            let recs: Vec<BenchRecord> = read_csv(f).with_context(|| format!("parsing {}", records.display()))?;
            let metric = match metric {
                MetricArg::Time => Metric::Time,
                MetricArg::Iterations => Metric::Iterations,
            };
            let pts = performance_profile(&recs, &taus, metric)?;
            c.emit_csv(&pts)?;
            Ok(EXIT_OK)
        }
        Command::Gradcheck { count } => {
            let report = cmd_gradcheck(c.seed, count, &params)?;
            print!("{}", report.render());
            Ok(if report.passed() { EXIT_OK } else { EXIT_FAIL })
        }
        Command::Sudoku { n_block, givens } => {
            let givens = match givens {
                Some(p) => parse_givens(&std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?)?,
                None => Vec::new(),
            };
            let out = cmd_sudoku(n_block, &givens, &params)?;
            print!("{}", render_grid(&out.grid));
            println!("{}", if out.valid { "VALID" } else { "INVALID" });
            eprintln!("{} solves, {} iterations", out.solves, out.iterations);
            Ok(if out.valid { EXIT_OK } else { EXIT_FAIL })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_USAGE
        }
    };
    let _ = io::stdout().flush();
    ExitCode::from(code as u8)
}

