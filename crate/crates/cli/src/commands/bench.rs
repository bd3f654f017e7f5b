use std::time::Instant;

use serde::Serialize;

use crate::args::{Algo, BenchArgs, ProblemArgs};
use crate::commands::{algo_name, check_solver_args, random_problem, run_solver};
use crate::failure::{CliResult, Failure};
use crate::io::emit;

#[derive(Debug, Serialize)]
struct Row {
    algo: String,
    n: usize,
    l: usize,
    workers: usize,
    median_ms: f64,
    tokens_per_s: f64,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}

pub fn run(args: &BenchArgs) -> CliResult<()> {
    check_solver_args(args.algo, &args.solver)?;
    if args.n.contains(&0) {
        return Err(Failure::usage("sequence lengths must be positive"));
    }
    let problem = ProblemArgs {
        n: 0,
        d: args.d,
        seed: args.seed,
        a_lo: 0.0,
        a_hi: 1.0,
        rho: None,
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    for &n in &args.n {
        let (a, u) = random_problem(&problem, n, args.seed)?;
        for _ in 0..args.warmup {
            run_solver(args.algo, &a, &u, &args.solver)?;
        }
        let times: Vec<f64> = (0..args.runs)
            .map(|_| {
                let start = Instant::now();
                run_solver(args.algo, &a, &u, &args.solver).map(|_| start.elapsed().as_secs_f64() * 1e3)
            })
            .collect::<CliResult<_>>()?;
        let med = median(times);
        let row = Row {
            algo: algo_name(args.algo),
            n,
            l: args.solver.l,
            workers: if args.algo == Algo::B2pParallel { args.solver.workers } else { 1 },
            median_ms: med,
            tokens_per_s: n as f64 / (med / 1e3),
        };
        eprintln!(
            "{} n={} median_ms={:.3} tokens_per_s={:.0}",
            row.algo, n, row.median_ms, row.tokens_per_s
        );
        w.serialize(&row).map_err(|e| Failure::Runtime(e.into()))?;
    }
    let text = String::from_utf8(w.into_inner().map_err(|e| Failure::Runtime(anyhow::anyhow!("{e}")))?)
        .expect("ascii");
    emit(args.csv.as_deref(), &text)
}
