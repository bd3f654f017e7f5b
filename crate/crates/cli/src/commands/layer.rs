use swr_core::numerics::rel_err_inf;
use swr_core::phalanx::{featurize, init_params, layer_forward, project_out, LayerConfig, LayerParams};
use swr_core::window::WindowSpec;
use swr_core::{SeededRng, StateSequence};

use crate::args::{LayerArgs, LayerWindow};
use crate::failure::{CliResult, Failure};
use crate::io::{checksum, emit, labeled_csv};

fn window_of(args: &LayerArgs) -> CliResult<WindowSpec> {
    Ok(match args.window {
        LayerWindow::Jagged => WindowSpec::Jagged { l: args.l },
        LayerWindow::Full => WindowSpec::Full,
        LayerWindow::Uniform => WindowSpec::Uniform {
            k: args.k.ok_or_else(|| Failure::usage("--window uniform needs --k"))?,
        },
    })
}

struct Checks(Vec<(&'static str, bool)>);

impl Checks {
    fn add(&mut self, name: &'static str, ok: bool) {
        println!("check {name}: {}", if ok { "pass" } else { "FAIL" });
        self.0.push((name, ok));
    }
}

fn run_checks(u: &[f64], p: &LayerParams, args: &LayerArgs, checks: &mut Checks) -> CliResult<()> {
    let cfg = p.config;
    let n = u.len() / cfg.d_model;
    let f = featurize(u, p)?;
    checks.add("coefficients in (0,1)", f.a.iter().all(|&a| a > 0.0 && a < 1.0));

    let mut muted = p.clone();
    muted.q.iter_mut().for_each(|x| *x = 0.0);
    let y = layer_forward(u, &muted, WindowSpec::Jagged { l: args.l })?;
    checks.add("zero query leaves residual", y == project_out(&f.v, p));

    let m = n.min(2 * args.l);
    let prefix = &u[..m * cfg.d_model];
    let jag = layer_forward(prefix, p, WindowSpec::Jagged { l: args.l })?;
    let full = layer_forward(prefix, p, WindowSpec::Full)?;
    checks.add("jagged exact on first 2l steps", rel_err_inf(&jag, &full) <= 1e-12);

    let full = layer_forward(u, p, WindowSpec::Full)?;
    let wide = layer_forward(u, p, WindowSpec::Uniform { k: n })?;
    let one_block = layer_forward(u, p, WindowSpec::Jagged { l: n })?;
    checks.add(
        "full, uniform k>=n and single-block jagged agree",
        rel_err_inf(&wide, &full) <= 1e-12 && rel_err_inf(&one_block, &full) <= 1e-12,
    );
    Ok(())
}

pub fn run(args: &LayerArgs) -> CliResult<()> {
    let mut cfg = LayerConfig::new(args.d_model, args.heads, args.l)?;
    if args.q_groups.is_some() || args.k_groups.is_some() {
        cfg = cfg.with_groups(args.q_groups.unwrap_or(args.heads), args.k_groups.unwrap_or(args.heads))?;
    }
    if args.n == 0 {
        return Err(Failure::usage("--n must be positive"));
    }
    let window = window_of(args)?;
    let mut rng = SeededRng::new(args.seed);
    let params = init_params(cfg, &mut rng)?;
    let u = rng.uniform_vec(args.n * cfg.d_model, -1.0, 1.0)?;
    if let Some(path) = &args.export_params {
        let json = serde_json::to_string_pretty(&params).map_err(|e| Failure::Runtime(e.into()))?;
        emit(Some(path), &json)?;
    }

    let y = layer_forward(&u, &params, window)?;
    let csv = labeled_csv(&StateSequence::new(y, cfg.d_model)?, "y", 17)?;
    if let Some(path) = &args.output {
        emit(Some(path), &csv)?;
    }
    println!(
        "n={} D={} h={} d={} window={:?} checksum={:016x}",
        args.n,
        cfg.d_model,
        cfg.heads,
        cfg.head_dim,
        window,
        checksum(csv.as_bytes())
    );
    let mut checks = Checks(Vec::new());
    run_checks(&u, &params, args, &mut checks)?;
    let failed: Vec<&str> = checks.0.iter().filter(|(_, ok)| !ok).map(|(n, _)| *n).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(failed.join(", ")))
    }
}
