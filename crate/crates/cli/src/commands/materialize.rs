use swr_core::hierarchical::{log_grid, precision_study_point, MaterializeStrategy};
use swr_core::PrecisionFormat;

use crate::args::MaterializeArgs;
use crate::failure::{CliResult, Failure};
use crate::io::emit;

/// Parses `lo:hi:points`.
pub fn parse_sweep(spec: &str) -> CliResult<(f64, f64, usize)> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = || Failure::usage(format!("sweep `{spec}` is not lo:hi:points"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo = parts[0].parse().map_err(|_| bad())?;
    let hi = parts[1].parse().map_err(|_| bad())?;
    let points = parts[2].parse().map_err(|_| bad())?;
    Ok((lo, hi, points))
}

pub fn run(args: &MaterializeArgs) -> CliResult<()> {
    let fmt = PrecisionFormat::from_name(&args.format)?;
    let strategies: Vec<MaterializeStrategy> = if args.strategy == "all" {
        MaterializeStrategy::ALL.to_vec()
    } else {
        vec![args.strategy.parse()?]
    };
    if args.l == 0 {
        return Err(Failure::usage("--l must be at least 1"));
    }
    let (lo, hi, points) = parse_sweep(&args.rho_sweep)?;
    let grid = log_grid(lo, hi, points)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for &rho in &grid {
        for &s in &strategies {
            let row = precision_study_point(rho, args.l, s, &fmt)?;
            w.serialize(&row).map_err(|e| Failure::Runtime(e.into()))?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Failure::Runtime(anyhow::anyhow!("{e}")))?;
    emit(args.output.as_deref(), &String::from_utf8(bytes).expect("ascii"))
}
