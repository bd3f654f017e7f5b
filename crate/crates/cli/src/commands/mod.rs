pub mod bench;
pub mod compare;
pub mod horizon;
pub mod layer;
pub mod materialize;
pub mod solve;

use swr_core::flat_scan::brent_kung_solve;
use swr_core::hierarchical::{hierarchical_solve, BlockPartition, GlobalStrategy};
use swr_core::pipeline::{pipeline_b2p, PipelinePlan};
use swr_core::window::{b2p_full_carrier_solve, jagged_window_solve, uniform_window_solve};
use swr_core::{kogge_stone_solve, sequential_solve, CoefficientSequence, InputSequence, SeededRng, StateSequence};

use crate::args::{Algo, ProblemArgs, SolverArgs};
use crate::failure::{CliResult, Failure};

pub fn algo_name(algo: Algo) -> String {
    use clap::ValueEnum;
    algo.to_possible_value().expect("no skipped variants").get_name().to_string()
}

pub fn random_problem(p: &ProblemArgs, n: usize, seed: u64) -> CliResult<(CoefficientSequence, InputSequence)> {
    let mut rng = SeededRng::new(seed);
    let a = match p.rho {
        Some(rho) => CoefficientSequence::constant(rho, n)?,
        None => CoefficientSequence::random(&mut rng, n, p.a_lo, p.a_hi)?,
    };
    let u = InputSequence::random(&mut rng, n, p.d, -1.0, 1.0)?;
    Ok((a, u))
}

/// Output of one solver run; `padded_to` is set when block algorithms had to zero-pad.
pub struct Solved {
    pub states: StateSequence,
    pub padded_to: Option<usize>,
}

fn is_block_algo(algo: Algo) -> bool {
    matches!(
        algo,
        Algo::Hierarchical | Algo::HierarchicalScan | Algo::B2p | Algo::B2pFull | Algo::B2pParallel
    )
}

pub fn check_solver_args(algo: Algo, s: &SolverArgs) -> CliResult<()> {
    if algo == Algo::Uniform && s.k.is_none() {
        return Err(Failure::usage("--algo uniform needs --k"));
    }
    if is_block_algo(algo) && s.l == 0 {
        return Err(Failure::usage("--l must be at least 1"));
    }
    Ok(())
}

pub fn run_solver(algo: Algo, a: &CoefficientSequence, u: &InputSequence, s: &SolverArgs) -> CliResult<Solved> {
    check_solver_args(algo, s)?;
    if !is_block_algo(algo) {
        let states = match algo {
            Algo::Sequential => sequential_solve(a, u)?,
            Algo::KoggeStone => kogge_stone_solve(a, u)?,
            Algo::BrentKung => brent_kung_solve(a, u)?,
            Algo::Uniform => uniform_window_solve(a, u, s.k.expect("checked"))?,
            _ => unreachable!(),
        };
        return Ok(Solved { states, padded_to: None });
    }
    let n = a.len();
    let part = BlockPartition::covering(n, s.l)?;
    let (pa, pu) = if part.n() == n {
        (a.clone(), u.clone())
    } else {
        (a.padded(part.n()), u.padded(part.n()))
    };
    let states = match algo {
        Algo::Hierarchical => hierarchical_solve(&pa, &pu, part, GlobalStrategy::DenseT)?,
        Algo::HierarchicalScan => hierarchical_solve(&pa, &pu, part, GlobalStrategy::ScanT)?,
        Algo::B2p => jagged_window_solve(&pa, &pu, part)?,
        Algo::B2pFull => b2p_full_carrier_solve(&pa, &pu, part)?,
        Algo::B2pParallel => {
            let seg = s.segment_len.unwrap_or(part.blocks());
            pipeline_b2p(&pa, &pu, &PipelinePlan::new(part, s.workers, seg)?)?
        }
        _ => unreachable!(),
    };
    Ok(Solved {
        states: states.truncated(n),
        padded_to: (part.n() != n).then_some(part.n()),
    })
}
