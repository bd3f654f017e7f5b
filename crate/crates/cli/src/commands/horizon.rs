use std::fmt::Write;

use swr_core::hierarchical::log_grid;
use swr_core::numerics::max_representable_contraction;
use swr_core::window::{horizon_pointwise, horizon_tail, horizon_underflow};
use swr_core::PrecisionFormat;

use crate::args::HorizonArgs;
use crate::failure::{CliResult, Failure};
use crate::io::emit;

pub fn format_row(fmt: &PrecisionFormat) -> String {
    let (k_normal, k_subnormal) = horizon_underflow(fmt);
    let emin = fmt.min_exponent();
    format!(
        "{},{:.12},2^{},2^{},{},{}",
        fmt.name,
        max_representable_contraction(fmt),
        emin,
        emin - fmt.mantissa_bits as i32,
        k_normal,
        k_subnormal
    )
}

pub fn run(args: &HorizonArgs) -> CliResult<()> {
    let mut out = String::new();
    if let Some(name) = &args.format {
        let formats = if name == "all" {
            PrecisionFormat::presets()
                .into_iter()
                .filter(|f| !f.is_binary64())
                .collect()
        } else {
            vec![PrecisionFormat::from_name(name)?]
        };
        out.push_str("format,rho,eps,eps_subnormal,k_normal,k_subnormal\n");
        for f in &formats {
            out.push_str(&format_row(f));
            out.push('\n');
        }
    } else if args.grid {
        if args.grid_points < 2 {
            return Err(Failure::usage("--grid-points must be at least 2"));
        }
        out.push_str("eps,rho,k_pointwise,k_tail\n");
        let eps_grid = log_grid(1e-8, 1e-1, args.grid_points)?;
        for &eps in &eps_grid {
            for j in 0..args.grid_points {
                // rho from 0.5 towards 1 with 1 - rho log-spaced
                let gap = 0.5 * 10f64.powf(-3.0 * j as f64 / (args.grid_points - 1) as f64);
                let rho = 1.0 - gap;
                writeln!(
                    out,
                    "{eps:e},{rho},{},{}",
                    horizon_pointwise(rho, eps)?,
                    horizon_tail(rho, eps)?
                )
                .expect("write to string");
            }
        }
    } else {
        if !(args.nu > 0.0) {
            return Err(Failure::usage("--nu must be positive"));
        }
        let kp = horizon_pointwise(args.rho, args.eps)?;
        let kt = horizon_tail(args.rho, args.eps)?;
        out.push_str("k_pointwise,k_tail,bound\n");
        writeln!(out, "{kp},{kt},{:e}", args.eps * args.nu).expect("write to string");
    }
    emit(args.output.as_deref(), &out)
}
