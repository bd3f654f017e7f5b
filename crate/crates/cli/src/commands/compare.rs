use serde::Serialize;
use swr_core::numerics::{max_abs, max_abs_diff, rel_err_inf};
use swr_core::window::tail_bound;

use crate::args::{Algo, CompareArgs, ReportFormat};
use crate::commands::{algo_name, check_solver_args, random_problem, run_solver};
use crate::failure::{CliResult, Failure};
use crate::io::emit;

#[derive(Debug, Serialize)]
struct Row {
    seed: u64,
    n: usize,
    algo_a: String,
    algo_b: String,
    max_rel_err: f64,
    max_abs_err: f64,
    /// Only defined for a truncated solver against an exact one.
    tail_bound: Option<f64>,
}

fn is_exact(algo: Algo) -> bool {
    !matches!(algo, Algo::B2p | Algo::B2pParallel | Algo::Uniform)
}

/// First dropped lag of a truncated solver.
fn dropped_from(algo: Algo, args: &CompareArgs) -> Option<usize> {
    match algo {
        Algo::B2p | Algo::B2pParallel => Some(args.solver.l + 1),
        Algo::Uniform => args.solver.k,
        _ => None,
    }
}

pub fn run(args: &CompareArgs) -> CliResult<()> {
    check_solver_args(args.algo, &args.solver)?;
    check_solver_args(args.against, &args.solver)?;
    if args.seeds == 0 {
        return Err(Failure::usage("--seeds must be at least 1"));
    }
    let truncated = match (is_exact(args.algo), is_exact(args.against)) {
        (false, true) => Some(args.algo),
        (true, false) => Some(args.against),
        _ => None,
    };
    let mut rows = Vec::new();
    for seed in args.problem.seed..args.problem.seed + args.seeds {
        let (a, u) = random_problem(&args.problem, args.problem.n, seed)?;
        let x = run_solver(args.algo, &a, &u, &args.solver)?.states;
        let y = run_solver(args.against, &a, &u, &args.solver)?.states;
        // Normalize by the exact side when there is one.
        let (approx, reference) = if is_exact(args.algo) && !is_exact(args.against) {
            (y.as_slice(), x.as_slice())
        } else {
            (x.as_slice(), y.as_slice())
        };
        let bound = truncated.and_then(|algo| {
            let nu = max_abs(&u.folded(&a).ok()?);
            tail_bound(a.max_abs(), nu, dropped_from(algo, args)?)
        });
        rows.push(Row {
            seed,
            n: a.len(),
            algo_a: algo_name(args.algo),
            algo_b: algo_name(args.against),
            max_rel_err: rel_err_inf(approx, reference),
            max_abs_err: max_abs_diff(approx, reference),
            tail_bound: bound,
        });
    }
    let text = match args.report {
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in &rows {
                w.serialize(r).map_err(|e| Failure::Runtime(e.into()))?;
            }
            String::from_utf8(w.into_inner().map_err(|e| Failure::Runtime(anyhow::anyhow!("{e}")))?)
                .expect("csv output is ascii")
        }
        ReportFormat::Json => serde_json::to_string_pretty(&rows).map_err(|e| Failure::Runtime(e.into()))? + "\n",
    };
    emit(args.output.as_deref(), &text)?;
    if let Some(tol) = args.assert_tol {
        let bad: Vec<u64> = rows.iter().filter(|r| !(r.max_rel_err <= tol)).map(|r| r.seed).collect();
        if !bad.is_empty() {
            return Err(Failure::Check(format!(
                "{} of {} seeds exceed max_rel_err {tol:e} (first: seed {})",
                bad.len(),
                rows.len(),
                bad[0]
            )));
        }
    }
    Ok(())
}
