//! Sliding-window truncations of the transfer operator.
//!
//! A uniform window keeps lags `0..k`. A jagged window with block size `l`
//! keeps every diagonal tile plus the rank-one coupling to the previous
//! block, which is what the Block Two-Pass (B2P) solver computes without
//! materializing any off-diagonal block.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SwrError};
use crate::flat_scan::kogge_stone_in_place;
use crate::hierarchical::{
    assemble_decomposition, block_tile, build_block_factors, last_row, local_solve, rank_one_update, BlockPartition,
    BlockTile, MaterializeStrategy,
};
use crate::matrix::DenseMatrix;
use crate::numerics::{max_abs, max_representable_contraction, Arith, PrecisionFormat};
use crate::recurrence::{
    check_lengths, sequential_solve, CoefficientSequence, InputSequence, StateSequence, TransferOperator,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum WindowSpec {
    Uniform { k: usize },
    Jagged { l: usize },
    /// No truncation.
    Full,
}

impl WindowSpec {
    pub fn validate(self) -> Result<Self> {
        match self {
            WindowSpec::Uniform { k: 0 } => Err(SwrError::Domain("uniform bandwidth must be at least 1".into())),
            WindowSpec::Jagged { l: 0 } => Err(SwrError::Domain("block size must be at least 1".into())),
            _ => Ok(self),
        }
    }
}

// ---------------------------------------------------------------------------
// Horizons

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonQuery {
    pub rho: f64,
    pub eps: f64,
    pub nu: f64,
    pub fmt: Option<PrecisionFormat>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct HorizonResult {
    pub k_pointwise: u64,
    pub k_tail: u64,
    pub k_underflow_normal: Option<u64>,
    pub k_underflow_subnormal: Option<u64>,
}

fn check_rho_eps(rho: f64, eps: f64) -> Result<()> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(SwrError::Domain(format!("contraction must lie in (0, 1), got {rho}")));
    }
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(SwrError::Domain(format!("accuracy must be positive, got {eps}")));
    }
    Ok(())
}

fn clamp_ceil(x: f64) -> u64 {
    let k = x.ceil();
    if k <= 0.0 {
        0
    } else {
        k as u64
    }
}

/// `ceil(log eps / log rho)`, clamped at zero.
pub fn horizon_pointwise(rho: f64, eps: f64) -> Result<u64> {
    check_rho_eps(rho, eps)?;
    Ok(clamp_ceil(eps.ln() / rho.ln()))
}

/// `ceil(log(eps (1 - rho)) / log rho) - 1`, clamped at zero.
pub fn horizon_tail(rho: f64, eps: f64) -> Result<u64> {
    check_rho_eps(rho, eps)?;
    let k = ((eps * (1.0 - rho)).ln() / rho.ln()).ceil() - 1.0;
    Ok(if k <= 0.0 { 0 } else { k as u64 })
}

/// Largest lag before powers of the largest representable contraction underflow.
///
/// Returns `(normal, subnormal)`: the floor of `log eps / log rho` with
/// `rho = 1 - 2^-(p+1)` and `eps` the smallest normal, resp. smallest
/// subnormal, magnitude of the format.
pub fn horizon_underflow(fmt: &PrecisionFormat) -> (u64, u64) {
    let p = fmt.mantissa_bits as i32;
    let ln_rho = (-(2f64.powi(-(p + 1)))).ln_1p();
    let ln_normal = f64::from(fmt.min_exponent()) * std::f64::consts::LN_2;
    let ln_subnormal = f64::from(fmt.min_exponent() - p) * std::f64::consts::LN_2;
    let k = |ln_eps: f64| (ln_eps / ln_rho).floor() as u64;
    debug_assert_eq!(1.0 - 2f64.powi(-(p + 1)), max_representable_contraction(fmt));
    (k(ln_normal), k(ln_subnormal))
}

pub fn horizon(q: &HorizonQuery) -> Result<HorizonResult> {
    if !(q.nu > 0.0) {
        return Err(SwrError::Domain(format!("input bound must be positive, got {}", q.nu)));
    }
    let (normal, subnormal) = match &q.fmt {
        Some(fmt) => {
            let (a, b) = horizon_underflow(fmt);
            (Some(a), Some(b))
        }
        None => (None, None),
    };
    Ok(HorizonResult {
        k_pointwise: horizon_pointwise(q.rho, q.eps)?,
        k_tail: horizon_tail(q.rho, q.eps)?,
        k_underflow_normal: normal,
        k_underflow_subnormal: subnormal,
    })
}

/// `nu rho^k / (1 - rho)`: bound on the dropped terms when every lag `>= k` is discarded.
pub fn tail_bound(rho: f64, nu: f64, k: usize) -> Option<f64> {
    if !(0.0..1.0).contains(&rho) {
        return None;
    }
    Some(nu * rho.powi(k as i32) / (1.0 - rho))
}

// ---------------------------------------------------------------------------
// Uniform window

/// Dense banded truncation `sum_{j<k} (AZ)^j`.
pub fn banded_transfer(a: &CoefficientSequence, k: usize) -> Result<TransferOperator> {
    WindowSpec::Uniform { k }.validate()?;
    let a = a.as_slice();
    let n = a.len();
    let mut m = DenseMatrix::zeros(n, n);
    for i in 0..n {
        let mut prod = 1.0;
        for lag in 0..k.min(i + 1) {
            m[(i, i - lag)] = prod;
            prod *= a[i - lag];
        }
    }
    TransferOperator::from_matrix(m)
}

/// Applies the uniform window of bandwidth `k`.
///
/// Power-of-two `k` stops Kogge-Stone after `log2 k` stages; other `k` walk
/// the band directly.
pub fn uniform_window_solve(a: &CoefficientSequence, u: &InputSequence, k: usize) -> Result<StateSequence> {
    WindowSpec::Uniform { k }.validate()?;
    let d = u.d();
    let mut v = u.folded(a)?;
    if k.is_power_of_two() {
        let stages = k.trailing_zeros() as usize;
        kogge_stone_in_place(a.as_slice(), &mut v, d, Some(stages), &mut |_, _| {});
        return StateSequence::new(v, d);
    }
    let a = a.as_slice();
    let n = a.len();
    let mut x = vec![0.0; n * d];
    for i in 0..n {
        let out = &mut x[i * d..(i + 1) * d];
        let mut prod = 1.0;
        for lag in 0..k.min(i + 1) {
            let j = i - lag;
            for (o, &uv) in out.iter_mut().zip(&v[j * d..(j + 1) * d]) {
                *o += prod * uv;
            }
            prod *= a[j];
        }
    }
    StateSequence::new(x, d)
}

// ---------------------------------------------------------------------------
// Jagged window / Block Two-Pass

/// Pass I for one block: tile, `w_t = L_t u_t`. The interface `v_t` is the last row of `w`.
pub(crate) fn b2p_local(a: &[f64], u: &[f64], d: usize) -> Result<(BlockTile, Vec<f64>)> {
    let blk = block_tile(a, MaterializeStrategy::LinearCumprod, &Arith::exact())?;
    let w = local_solve(&blk.tile, u, d);
    Ok((blk, w))
}

/// Pass II for one block: `x_t = w_t + g_t v_{t-1}`.
pub(crate) fn b2p_update(blk: &BlockTile, w: &mut [f64], prev: &[f64]) {
    rank_one_update(w, &blk.g, prev);
}

fn check_partition(u: &InputSequence, part: BlockPartition) -> Result<()> {
    if u.n() != part.n() {
        return Err(SwrError::Divisibility {
            n: u.n(),
            block: part.block_size(),
        });
    }
    Ok(())
}

fn b2p(a: &CoefficientSequence, u: &InputSequence, part: BlockPartition, full_carrier: bool) -> Result<StateSequence> {
    check_lengths(a, u)?;
    check_partition(u, part)?;
    let d = u.d();
    let folded = u.folded(a)?;
    let mut x = Vec::with_capacity(part.n() * d);
    let mut carry: Option<Vec<f64>> = None;
    for t in 0..part.blocks() {
        let r = part.range(t);
        let (blk, mut w) = b2p_local(&a.as_slice()[r.clone()], &folded[r.start * d..r.end * d], d)?;
        let v = last_row(&w, d).to_vec();
        if let Some(prev) = &carry {
            b2p_update(&blk, &mut w, prev);
        }
        carry = Some(if full_carrier { last_row(&w, d).to_vec() } else { v });
        x.extend_from_slice(&w);
    }
    StateSequence::new(x, d)
}

/// Block Two-Pass: the jagged-window truncation. Requires `n = b l`.
pub fn jagged_window_solve(a: &CoefficientSequence, u: &InputSequence, part: BlockPartition) -> Result<StateSequence> {
    b2p(a, u, part, false)
}

/// B2P with zero padding (a = 0, u = 0) up to a multiple of `l`.
///
/// Returns the first `n` rows and whether padding was needed.
pub fn jagged_window_solve_padded(a: &CoefficientSequence, u: &InputSequence, l: usize) -> Result<(StateSequence, bool)> {
    check_lengths(a, u)?;
    let n = a.len();
    let part = BlockPartition::covering(n, l)?;
    let padded = part.n() != n;
    let x = jagged_window_solve(&a.padded(part.n()), &u.padded(part.n()), part)?;
    Ok((x.truncated(n), padded))
}

/// B2P whose Pass II carries the exact block-boundary state `s_t = c_t s_{t-1} + v_t`
/// instead of `v_t`. This is the exact solver.
pub fn b2p_full_carrier_solve(
    a: &CoefficientSequence,
    u: &InputSequence,
    part: BlockPartition,
) -> Result<StateSequence> {
    b2p(a, u, part, true)
}

/// Dense jagged operator `Ld + G Z_b R` (the carrier operator replaced by `I_b`).
pub fn jagged_transfer(a: &CoefficientSequence, part: BlockPartition) -> Result<TransferOperator> {
    let f = build_block_factors(a, part, MaterializeStrategy::LinearCumprod, &PrecisionFormat::fp64())?;
    assemble_decomposition(&f, &DenseMatrix::identity(part.blocks()))
}

/// Solves under any window, zero-padding jagged windows as needed.
pub fn window_solve(a: &CoefficientSequence, u: &InputSequence, window: WindowSpec) -> Result<StateSequence> {
    match window.validate()? {
        WindowSpec::Uniform { k } => uniform_window_solve(a, u, k),
        WindowSpec::Jagged { l } => jagged_window_solve_padded(a, u, l).map(|(x, _)| x),
        WindowSpec::Full => sequential_solve(a, u),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationReport {
    pub window: WindowSpec,
    /// `||x - x~||_inf` per channel.
    pub channel_err: Vec<f64>,
    pub max_err: f64,
    /// `max_err / ||x||_inf`.
    pub rel_err: f64,
    /// `nu rho^(m+1) / (1 - rho)` with `m` the smallest retained lag range; `None` unless `max|a| < 1`.
    pub tail_bound: Option<f64>,
    pub rho: f64,
    pub nu: f64,
    /// Smallest and largest maximal lag kept at any position (ignoring the sequence start).
    pub retained_lags: (usize, usize),
}

/// Compares a window against the exact solution.
pub fn truncation_error_report(a: &CoefficientSequence, u: &InputSequence, window: WindowSpec) -> Result<TruncationReport> {
    let exact = sequential_solve(a, u)?;
    let approx = window_solve(a, u, window)?;
    let d = u.d();
    let mut channel_err = vec![0.0f64; d];
    for (i, (x, y)) in exact.as_slice().iter().zip(approx.as_slice()).enumerate() {
        let e = &mut channel_err[i % d];
        *e = e.max((x - y).abs());
    }
    let max_err = channel_err.iter().fold(0.0f64, |m, &e| m.max(e));
    let scale = max_abs(exact.as_slice());
    let rho = a.max_abs();
    let nu = max_abs(&u.folded(a)?);
    let n = a.len();
    let (retained_lags, dropped_from) = match window {
        WindowSpec::Uniform { k } => ((k - 1, k - 1), Some(k)),
        WindowSpec::Jagged { l } => ((l, 2 * l - 1), Some(l + 1)),
        WindowSpec::Full => ((n - 1, n - 1), None),
    };
    let tail_bound = match dropped_from {
        Some(k) => tail_bound(rho, nu, k),
        None => Some(0.0),
    };
    Ok(TruncationReport {
        window,
        channel_err,
        max_err,
        rel_err: if scale == 0.0 { max_err } else { max_err / scale },
        tail_bound,
        rho,
        nu,
        retained_lags,
    })
}
