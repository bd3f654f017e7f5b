//! Two-level block decomposition of the transfer operator.
//!
//! With block size `l` and `b = n / l` blocks, `L = Ld + G Z_b T R` where `Ld`
//! holds the diagonal tiles `L_t`, `G` and `R` stack the propagation vectors
//! `g_t` and readout rows `r_t`, and `T = (I - C Z_b)^{-1}` is the transfer
//! operator of the carrier recurrence `s_t = c_t s_{t-1} + v_t`.
//!
//! Block indices and in-block offsets are 0-based throughout.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SwrError};
use crate::flat_scan::kogge_stone_in_place;
use crate::matrix::DenseMatrix;
use crate::numerics::{max_abs, max_abs_diff, Arith, PrecisionFormat};
use crate::recurrence::{
    check_lengths, transfer_entries, CoefficientSequence, InputSequence, StateSequence, TransferOperator,
};

pub const DEFAULT_BLOCK_SIZE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockPartition {
    n: usize,
    l: usize,
    b: usize,
}

impl BlockPartition {
    pub fn new(n: usize, l: usize) -> Result<Self> {
        if l == 0 {
            return Err(SwrError::Domain("block size must be at least 1".into()));
        }
        if n == 0 {
            return Err(SwrError::Empty);
        }
        if n % l != 0 {
            return Err(SwrError::Divisibility { n, block: l });
        }
        Ok(Self { n, l, b: n / l })
    }

    /// Smallest partition with block size `l` covering `n` steps.
    pub fn covering(n: usize, l: usize) -> Result<Self> {
        if l == 0 {
            return Err(SwrError::Domain("block size must be at least 1".into()));
        }
        Self::new(n.div_ceil(l).max(1) * l, l)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn block_size(&self) -> usize {
        self.l
    }

    pub fn blocks(&self) -> usize {
        self.b
    }

    /// Global index of offset `j` in block `t`.
    pub fn phi(&self, t: usize, j: usize) -> usize {
        self.l * t + j
    }

    pub fn range(&self, t: usize) -> Range<usize> {
        self.l * t..self.l * (t + 1)
    }
}

/// How a diagonal tile `L_t` is materialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaterializeStrategy {
    /// `tril(g g^{-T})`.
    Ratio,
    /// `exp(p_i - p_j)` from the prefix sums `p` of `log a`.
    LogOuterDiff,
    /// Masked column-wise cumulative sum of `log a`, then `exp`.
    LogCumsum,
    /// Masked column-wise cumulative product of `a`.
    #[default]
    LinearCumprod,
}

impl MaterializeStrategy {
    pub const ALL: [MaterializeStrategy; 4] = [
        MaterializeStrategy::Ratio,
        MaterializeStrategy::LogOuterDiff,
        MaterializeStrategy::LogCumsum,
        MaterializeStrategy::LinearCumprod,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MaterializeStrategy::Ratio => "ratio",
            MaterializeStrategy::LogOuterDiff => "log-outer-diff",
            MaterializeStrategy::LogCumsum => "log-cumsum",
            MaterializeStrategy::LinearCumprod => "linear-cumprod",
        }
    }

    pub fn uses_log(self) -> bool {
        matches!(self, MaterializeStrategy::LogOuterDiff | MaterializeStrategy::LogCumsum)
    }
}

impl fmt::Display for MaterializeStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MaterializeStrategy {
    type Err = SwrError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| SwrError::Unknown {
                kind: "materialization strategy",
                name: s.to_string(),
            })
    }
}

/// Stage II solver for the carrier system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GlobalStrategy {
    /// Materialize `T` and multiply.
    #[default]
    DenseT,
    /// Kogge-Stone scan over `(c, v)`.
    ScanT,
}

/// One diagonal tile and its propagation vector.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTile {
    pub tile: DenseMatrix<f64>,
    /// `g = (a_0, a_0 a_1, ..., a_0 ... a_{l-1})` over the block's coefficients.
    pub g: Vec<f64>,
}

impl BlockTile {
    pub fn size(&self) -> usize {
        self.g.len()
    }

    /// Readout row `r = e_l^T L_t`.
    pub fn r(&self) -> &[f64] {
        self.tile.row(self.size() - 1)
    }

    /// Block attenuation `c = g_{l-1}`.
    pub fn c(&self) -> f64 {
        self.g[self.size() - 1]
    }

    pub fn is_finite(&self) -> bool {
        self.tile.all_finite() && self.g.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockFactors {
    part: BlockPartition,
    strategy: MaterializeStrategy,
    blocks: Vec<BlockTile>,
}

impl BlockFactors {
    pub fn partition(&self) -> BlockPartition {
        self.part
    }

    pub fn strategy(&self) -> MaterializeStrategy {
        self.strategy
    }

    pub fn blocks(&self) -> &[BlockTile] {
        &self.blocks
    }

    pub fn tile(&self, t: usize) -> &DenseMatrix<f64> {
        &self.blocks[t].tile
    }

    pub fn g(&self, t: usize) -> &[f64] {
        &self.blocks[t].g
    }

    pub fn r(&self, t: usize) -> &[f64] {
        self.blocks[t].r()
    }

    pub fn c(&self) -> Vec<f64> {
        self.blocks.iter().map(BlockTile::c).collect()
    }

    /// True when any tile entry is NaN or infinite.
    pub fn has_nonfinite(&self) -> bool {
        self.blocks.iter().any(|b| !b.is_finite())
    }
}

fn require_positive(a: &[f64], strategy: MaterializeStrategy) -> Result<()> {
    if let Some(bad) = a.iter().find(|&&v| v <= 0.0) {
        return Err(SwrError::Domain(format!(
            "{strategy} materialization needs positive coefficients, got {bad}"
        )));
    }
    Ok(())
}

/// Materializes the `l x l` tile for one block's coefficients.
///
/// Coefficients are first rounded to the storage format; every subsequent
/// operation rounds as well. The block's first coefficient never enters the tile.
pub fn materialize_tile(a: &[f64], strategy: MaterializeStrategy, arith: &Arith) -> Result<DenseMatrix<f64>> {
    let l = a.len();
    let a: Vec<f64> = a.iter().map(|&v| arith.q(v)).collect();
    if strategy.uses_log() {
        require_positive(&a, strategy)?;
    }
    let mut tile = DenseMatrix::zeros(l, l);
    match strategy {
        MaterializeStrategy::LinearCumprod => {
            for j in 0..l {
                let mut run = 1.0;
                tile[(j, j)] = run;
                for i in j + 1..l {
                    run = arith.mul(run, a[i]);
                    tile[(i, j)] = run;
                }
            }
        }
        MaterializeStrategy::Ratio => {
            let mut g = vec![0.0; l];
            let mut run = 1.0;
            for (gi, &ai) in g.iter_mut().zip(&a) {
                run = arith.mul(run, ai);
                *gi = run;
            }
            let inv: Vec<f64> = g.iter().map(|&v| arith.div(1.0, v)).collect();
            for i in 0..l {
                for j in 0..=i {
                    tile[(i, j)] = arith.mul(g[i], inv[j]);
                }
            }
        }
        MaterializeStrategy::LogOuterDiff => {
            let mut p = vec![0.0; l];
            let mut run = 0.0;
            for (pi, &ai) in p.iter_mut().zip(&a) {
                run = arith.add(run, arith.ln(ai));
                *pi = run;
            }
            for i in 0..l {
                for j in 0..l {
                    let exponent = if i >= j { arith.sub(p[i], p[j]) } else { f64::NEG_INFINITY };
                    tile[(i, j)] = arith.exp(exponent);
                }
            }
        }
        MaterializeStrategy::LogCumsum => {
            let log_a: Vec<f64> = a.iter().map(|&v| arith.ln(v)).collect();
            for j in 0..l {
                // Column cumsum of the tiled log a with the inclusive upper triangle zeroed.
                let mut run = 0.0;
                for i in 0..l {
                    if i > j {
                        run = arith.add(run, log_a[i]);
                    }
                    let exponent = if i >= j { run } else { f64::NEG_INFINITY };
                    tile[(i, j)] = arith.exp(exponent);
                }
            }
        }
    }
    Ok(tile)
}

/// Tile plus `g = a_0 * L_t e_1` for one block.
pub fn block_tile(a: &[f64], strategy: MaterializeStrategy, arith: &Arith) -> Result<BlockTile> {
    if a.is_empty() {
        return Err(SwrError::Empty);
    }
    let tile = materialize_tile(a, strategy, arith)?;
    let a0 = arith.q(a[0]);
    let g = (0..a.len()).map(|i| arith.mul(a0, tile[(i, 0)])).collect();
    Ok(BlockTile { tile, g })
}

fn check_partition(a: &CoefficientSequence, part: BlockPartition) -> Result<()> {
    if a.len() != part.n() {
        return Err(SwrError::Shape(format!(
            "{} coefficients for a partition of {} steps",
            a.len(),
            part.n()
        )));
    }
    Ok(())
}

pub fn build_block_factors(
    a: &CoefficientSequence,
    part: BlockPartition,
    strategy: MaterializeStrategy,
    fmt: &PrecisionFormat,
) -> Result<BlockFactors> {
    check_partition(a, part)?;
    let arith = Arith::new(fmt);
    let blocks = (0..part.blocks())
        .map(|t| block_tile(&a.as_slice()[part.range(t)], strategy, &arith))
        .collect::<Result<Vec<_>>>()?;
    Ok(BlockFactors { part, strategy, blocks })
}

/// `dL_ij / da_k` contracted with `upstream`, as an explicit product over `a_{j+1..i}` minus `a_k`.
fn product_form_grad(a: &[f64], upstream: &DenseMatrix<f64>, k: usize, arith: &Arith) -> f64 {
    let l = a.len();
    let mut acc = 0.0;
    let mut left = 1.0;
    for j in (0..k).rev() {
        let mut right = 1.0;
        for i in k..l {
            if i > k {
                right = arith.mul(right, a[i]);
            }
            acc = arith.fma_acc(acc, upstream[(i, j)], arith.mul(left, right));
        }
        if j > 0 {
            left = arith.mul(left, a[j]);
        }
    }
    acc
}

/// Gradient of `sum_t <upstream_t, L_t>` with respect to every coefficient.
///
/// Linear-cumprod differentiates its products directly. The other strategies
/// use `dL_ij/da_k = L_ij / a_k` with `L` from their own tile, falling back to
/// the product form at exact zeros. The first coefficient of each block has
/// zero gradient because it never enters the tile.
pub fn block_factors_backward(
    a: &CoefficientSequence,
    part: BlockPartition,
    strategy: MaterializeStrategy,
    fmt: &PrecisionFormat,
    upstream: &[DenseMatrix<f64>],
) -> Result<Vec<f64>> {
    check_partition(a, part)?;
    let l = part.block_size();
    if upstream.len() != part.blocks() || upstream.iter().any(|g| g.rows() != l || g.cols() != l) {
        return Err(SwrError::Shape(format!(
            "upstream gradient needs {} tiles of {l}x{l}",
            part.blocks()
        )));
    }
    let arith = Arith::new(fmt);
    let mut grad = vec![0.0; part.n()];
    for (t, up) in upstream.iter().enumerate() {
        let raw = &a.as_slice()[part.range(t)];
        let block: Vec<f64> = raw.iter().map(|&v| arith.q(v)).collect();
        let out = &mut grad[part.range(t)];
        if strategy == MaterializeStrategy::LinearCumprod {
            for (k, o) in out.iter_mut().enumerate().skip(1) {
                *o = product_form_grad(&block, up, k, &arith);
            }
            continue;
        }
        let tile = materialize_tile(raw, strategy, &arith)?;
        for (k, o) in out.iter_mut().enumerate().skip(1) {
            if block[k] == 0.0 {
                *o = product_form_grad(&block, up, k, &arith);
                continue;
            }
            let mut acc = 0.0;
            for i in k..l {
                for j in 0..k {
                    acc = arith.fma_acc(acc, up[(i, j)], tile[(i, j)]);
                }
            }
            *o = arith.div(acc, block[k]);
        }
    }
    Ok(grad)
}

/// `w = L_t u_t` for one block (l x d, row-major).
pub(crate) fn local_solve(tile: &DenseMatrix<f64>, u: &[f64], d: usize) -> Vec<f64> {
    let l = tile.rows();
    let mut w = vec![0.0; l * d];
    for i in 0..l {
        let row = tile.row(i);
        let out = &mut w[i * d..(i + 1) * d];
        for (j, &m) in row.iter().enumerate().take(i + 1) {
            for (o, &v) in out.iter_mut().zip(&u[j * d..(j + 1) * d]) {
                *o += m * v;
            }
        }
    }
    w
}

/// `w += g s^T` for a carried state `s` of length d.
pub(crate) fn rank_one_update(w: &mut [f64], g: &[f64], s: &[f64]) {
    let d = s.len();
    for (row, &gi) in w.chunks_exact_mut(d).zip(g) {
        for (o, &sv) in row.iter_mut().zip(s) {
            *o += gi * sv;
        }
    }
}

/// Interface state of block `t`: the last row of `w_t`.
pub(crate) fn last_row(w: &[f64], d: usize) -> &[f64] {
    &w[w.len() - d..]
}

/// The carrier recurrence `s_t = c_t s_{t-1} + v_t` over blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct CarrierSystem {
    c: Vec<f64>,
    v: Vec<f64>,
    d: usize,
}

impl CarrierSystem {
    pub fn new(c: Vec<f64>, v: Vec<f64>, d: usize) -> Result<Self> {
        if d == 0 || v.len() != c.len() * d {
            return Err(SwrError::Shape(format!(
                "{} carrier inputs for {} blocks of width {d}",
                v.len(),
                c.len()
            )));
        }
        Ok(Self { c, v, d })
    }

    pub fn attenuations(&self) -> &[f64] {
        &self.c
    }

    pub fn inputs(&self) -> &[f64] {
        &self.v
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// `T = (I - C Z_b)^{-1}`; entry `(t, s)` is `c_t ... c_{s+1}`.
    pub fn transfer(&self) -> DenseMatrix<f64> {
        transfer_entries(&self.c)
    }

    /// `s = T v` by the requested method.
    pub fn solve(&self, strategy: GlobalStrategy) -> Vec<f64> {
        match strategy {
            GlobalStrategy::DenseT => self
                .transfer()
                .apply(&self.v, self.d)
                .expect("carrier shapes are validated on construction"),
            GlobalStrategy::ScanT => {
                let mut s = self.v.clone();
                kogge_stone_in_place(&self.c, &mut s, self.d, None, &mut |_, _| {});
                s
            }
        }
    }
}

/// Output of the three-stage solver with its carrier data.
#[derive(Debug, Clone)]
pub struct HierarchicalRun {
    pub states: StateSequence,
    pub carrier: CarrierSystem,
    /// `s_t` for every block, b x d.
    pub carriers: Vec<f64>,
}

pub fn hierarchical_solve(
    a: &CoefficientSequence,
    u: &InputSequence,
    part: BlockPartition,
    global: GlobalStrategy,
) -> Result<StateSequence> {
    hierarchical_solve_detailed(a, u, part, global).map(|run| run.states)
}

/// Stage I local tile solves, Stage II carrier solve, Stage III rank-one reconstruction.
pub fn hierarchical_solve_detailed(
    a: &CoefficientSequence,
    u: &InputSequence,
    part: BlockPartition,
    global: GlobalStrategy,
) -> Result<HierarchicalRun> {
    check_lengths(a, u)?;
    if u.n() != part.n() {
        return Err(SwrError::Divisibility {
            n: u.n(),
            block: part.block_size(),
        });
    }
    let d = u.d();
    let folded = u.folded(a)?;
    let factors = build_block_factors(a, part, MaterializeStrategy::LinearCumprod, &PrecisionFormat::fp64())?;

    let mut w: Vec<Vec<f64>> = Vec::with_capacity(part.blocks());
    let mut v = Vec::with_capacity(part.blocks() * d);
    for (t, blk) in factors.blocks().iter().enumerate() {
        let range = part.range(t);
        let wt = local_solve(&blk.tile, &folded[range.start * d..range.end * d], d);
        v.extend_from_slice(last_row(&wt, d));
        w.push(wt);
    }

    let carrier = CarrierSystem::new(factors.c(), v, d)?;
    let s = carrier.solve(global);

    let mut x = Vec::with_capacity(part.n() * d);
    for (t, (mut wt, blk)) in w.into_iter().zip(factors.blocks()).enumerate() {
        if t > 0 {
            rank_one_update(&mut wt, &blk.g, &s[(t - 1) * d..t * d]);
        }
        x.extend_from_slice(&wt);
    }
    Ok(HierarchicalRun {
        states: StateSequence::new(x, d)?,
        carrier,
        carriers: s,
    })
}

/// Dense `Ld + G Z_b T R` for a given `b x b` carrier operator.
///
/// Passing `carrier_transfer` gives `L` exactly; passing the identity gives
/// the jagged-window truncation.
pub fn assemble_decomposition(factors: &BlockFactors, t_op: &DenseMatrix<f64>) -> Result<TransferOperator> {
    let part = factors.partition();
    let (b, l) = (part.blocks(), part.block_size());
    if t_op.rows() != b || t_op.cols() != b {
        return Err(SwrError::Shape(format!("carrier operator must be {b}x{b}")));
    }
    let mut m = DenseMatrix::zeros(part.n(), part.n());
    for t in 0..b {
        let tile = factors.tile(t);
        for i in 0..l {
            for j in 0..l {
                m[(part.phi(t, i), part.phi(t, j))] = tile[(i, j)];
            }
        }
        for s in 0..t {
            // (Z_b T)_{t,s} = T_{t-1,s}
            let beta = t_op[(t - 1, s)];
            if beta == 0.0 {
                continue;
            }
            let (g, r) = (factors.g(t), factors.r(s));
            for i in 0..l {
                for j in 0..l {
                    m[(part.phi(t, i), part.phi(s, j))] = g[i] * beta * r[j];
                }
            }
        }
    }
    TransferOperator::from_matrix(m)
}

/// `T` built from the factors' block attenuations.
pub fn carrier_transfer(factors: &BlockFactors) -> DenseMatrix<f64> {
    transfer_entries(&factors.c())
}

/// One row of the materialization precision study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrecisionRow {
    pub rho: f64,
    pub strategy: MaterializeStrategy,
    /// `100 * max|L - L_ref| / max|L_ref|`; NaN when the tile has non-finite entries.
    pub fwd_pct_err: f64,
    pub bwd_pct_err: f64,
    pub nonfinite: bool,
}

/// `100 * max|approx - ref| / max|ref|`.
pub fn pct_error(approx: &[f64], reference: &[f64]) -> f64 {
    100.0 * max_abs_diff(approx, reference) / max_abs(reference)
}

/// Forward and backward tile errors for constant coefficients `a_i = rho` in `fmt`.
///
/// The reference is computed in fp64 from the coefficient as stored in `fmt`,
/// so the measured error is due to materialization alone. The backward pass
/// uses an all-ones upstream gradient on the lower triangle.
pub fn precision_study_point(
    rho: f64,
    l: usize,
    strategy: MaterializeStrategy,
    fmt: &PrecisionFormat,
) -> Result<PrecisionRow> {
    let stored = fmt.quantize(rho);
    let a = CoefficientSequence::constant(stored, l)?;
    let part = BlockPartition::new(l, l)?;
    let exact = PrecisionFormat::fp64();
    let upstream = vec![DenseMatrix::from_fn(l, l, |i, j| if i >= j { 1.0 } else { 0.0 })];

    let reference = build_block_factors(&a, part, MaterializeStrategy::LinearCumprod, &exact)?;
    let ref_grad = block_factors_backward(&a, part, MaterializeStrategy::LinearCumprod, &exact, &upstream)?;

    let approx = build_block_factors(&a, part, strategy, fmt)?;
    let grad = block_factors_backward(&a, part, strategy, fmt, &upstream)?;

    Ok(PrecisionRow {
        rho,
        strategy,
        fwd_pct_err: pct_error(approx.tile(0).as_slice(), reference.tile(0).as_slice()),
        bwd_pct_err: pct_error(&grad, &ref_grad),
        nonfinite: approx.has_nonfinite(),
    })
}

/// `points` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo) || points == 0 {
        return Err(SwrError::Domain(format!("invalid log grid {lo}:{hi}:{points}")));
    }
    if points == 1 {
        return Ok(vec![lo]);
    }
    let (l0, l1) = (lo.log10(), hi.log10());
    Ok((0..points)
        .map(|k| {
            if k == points - 1 {
                hi
            } else {
                10f64.powf(l0 + (l1 - l0) * k as f64 / (points - 1) as f64)
            }
        })
        .collect())
}
