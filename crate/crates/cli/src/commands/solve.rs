use std::time::Instant;

use crate::args::SolveArgs;
use crate::commands::{algo_name, random_problem, run_solver};
use crate::failure::{CliResult, Failure};
use crate::io::{checksum, emit, problem_csv, read_problem, states_csv};

pub fn run(args: &SolveArgs) -> CliResult<()> {
    let (a, u) = match (&args.input, args.random) {
        (Some(path), false) => read_problem(path)?,
        (None, true) => random_problem(&args.problem, args.problem.n, args.problem.seed)?,
        _ => return Err(Failure::usage("give exactly one of --input or --random")),
    };
    if let Some(path) = &args.save_input {
        emit(Some(path), &problem_csv(&a, &u)?)?;
    }
    let start = Instant::now();
    let solved = run_solver(args.algo, &a, &u, &args.solver)?;
    let elapsed = start.elapsed();
    if let Some(padded) = solved.padded_to {
        eprintln!(
            "warning: n = {} is not a multiple of l = {}; zero-padded to {padded}, writing the first {} rows",
            a.len(),
            args.solver.l,
            a.len()
        );
    }
    let csv = states_csv(&solved.states, args.digits)?;
    emit(args.output.as_deref(), &csv)?;
    eprintln!(
        "n={} d={} algo={} time_ms={:.3} checksum={:016x}",
        a.len(),
        u.d(),
        algo_name(args.algo),
        elapsed.as_secs_f64() * 1e3,
        checksum(csv.as_bytes())
    );
    Ok(())
}
