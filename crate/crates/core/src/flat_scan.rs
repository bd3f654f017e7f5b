//! Flat O(log n)-depth solvers: Kogge-Stone as the product of sparse factors
//! `I + (AZ)^(2^t)`, and the work-efficient Brent-Kung upsweep/downsweep.
//!
//! The "in parallel" sweeps are written as per-element updates over index
//! ranges, iterated high-to-low so each update reads the previous stage's value.

use crate::error::{Result, SwrError};
use crate::matrix::{DenseMatrix, Scalar};
use crate::recurrence::{check_lengths, CoefficientSequence, InputSequence, StateSequence};

/// `F = diag(f) Z^offset`: a matrix supported on one subdiagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedDiagonal<T = f64> {
    f: Vec<T>,
    offset: usize,
}

impl<T: Scalar> ShiftedDiagonal<T> {
    /// The weighted shift `A Z`.
    pub fn weighted_shift(a: &[T]) -> Self {
        Self {
            f: a.to_vec(),
            offset: 1,
        }
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn diagonal(&self) -> &[T] {
        &self.f
    }

    /// `F <- F^2` via `f <- f * shift(f, s)`, doubling the offset.
    pub fn square(&mut self) {
        let s = self.offset;
        for i in (s..self.f.len()).rev() {
            self.f[i] = self.f[i] * self.f[i - s];
        }
        self.offset *= 2;
    }

    /// Entries `f_i` with `i < offset` are never read and are reported as zero.
    pub fn to_matrix(&self) -> DenseMatrix<T> {
        let n = self.f.len();
        let s = self.offset;
        DenseMatrix::from_fn(n, n, |i, j| if i == j + s { self.f[i] } else { T::zero() })
    }
}

impl ShiftedDiagonal<f64> {
    /// `v <- v + F v` on an n x d row-major block; returns the number of rows updated.
    fn accumulate_into(&self, v: &mut [f64], d: usize) -> usize {
        let s = self.offset;
        let n = self.f.len();
        for i in (s..n).rev() {
            let fi = self.f[i];
            let (head, tail) = v.split_at_mut(i * d);
            let src = &head[(i - s) * d..(i - s + 1) * d];
            for (dst, &x) in tail[..d].iter_mut().zip(src) {
                *dst += fi * x;
            }
        }
        n.saturating_sub(s)
    }
}

/// Work and depth counters for a scan run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ScanStats {
    pub stages: usize,
    /// Applications of the pair operator `(v', f') o (v, f) = (v' + f' v, f' f)`.
    pub pair_ops: usize,
}

/// Runs Kogge-Stone stages in place on folded inputs `v` (n x d).
///
/// Stops early after `max_stages` stages when given. `observer` sees the work
/// vector after each completed stage.
pub(crate) fn kogge_stone_in_place(
    a: &[f64],
    v: &mut [f64],
    d: usize,
    max_stages: Option<usize>,
    observer: &mut dyn FnMut(usize, &[f64]),
) -> ScanStats {
    let n = a.len();
    let mut stats = ScanStats::default();
    let mut f = ShiftedDiagonal::weighted_shift(a);
    while f.offset() < n && max_stages.is_none_or(|m| stats.stages < m) {
        stats.pair_ops += f.accumulate_into(v, d);
        f.square();
        observer(stats.stages, v);
        stats.stages += 1;
    }
    stats
}

pub(crate) fn pad_to_power_of_two(a: &CoefficientSequence, u: &InputSequence) -> (CoefficientSequence, InputSequence) {
    let padded = a.len().next_power_of_two();
    (a.padded(padded), u.padded(padded))
}

/// Kogge-Stone solve with its work counters.
pub fn kogge_stone_solve_with_stats(a: &CoefficientSequence, u: &InputSequence) -> Result<(StateSequence, ScanStats)> {
    kogge_stone_solve_observed(a, u, |_, _| {})
}

/// Kogge-Stone solve; `observer(stage, v)` receives the padded work vector after each stage.
pub fn kogge_stone_solve_observed(
    a: &CoefficientSequence,
    u: &InputSequence,
    mut observer: impl FnMut(usize, &[f64]),
) -> Result<(StateSequence, ScanStats)> {
    check_lengths(a, u)?;
    let n = a.len();
    let (a, u) = pad_to_power_of_two(a, u);
    let mut v = u.folded(&a)?;
    let stats = kogge_stone_in_place(a.as_slice(), &mut v, u.d(), None, &mut observer);
    Ok((StateSequence::new(v, u.d())?.truncated(n), stats))
}

pub fn kogge_stone_solve(a: &CoefficientSequence, u: &InputSequence) -> Result<StateSequence> {
    kogge_stone_solve_with_stats(a, u).map(|(x, _)| x)
}

/// The `log2 n` sparse factors `I + (AZ)^(2^t)`, t = 0..m-1, in application order.
///
/// Their left-ordered product `F_{m-1} ... F_1 F_0` equals `L`.
pub fn kogge_stone_factors<T: Scalar>(a: &[T]) -> Result<Vec<DenseMatrix<T>>> {
    let n = a.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(SwrError::NotPowerOfTwo(n));
    }
    let mut f = ShiftedDiagonal::weighted_shift(a);
    let mut factors = Vec::new();
    while f.offset() < n {
        factors.push(DenseMatrix::identity(n).add(&f.to_matrix())?);
        f.square();
    }
    Ok(factors)
}

/// `F_{m-1} ... F_1 F_0` for factors listed in application order.
pub fn left_product<T: Scalar>(factors: &[DenseMatrix<T>], n: usize) -> Result<DenseMatrix<T>> {
    factors
        .iter()
        .try_fold(DenseMatrix::identity(n), |acc, f| f.matmul(&acc))
}

/// Brent-Kung inclusive scan with its work counters.
///
/// Upsweep builds prefixes of aligned power-of-two segments; downsweep fills
/// the remaining positions from the nearest completed prefix. Uses
/// `2n - 2 - floor(log2 n)` pair operations for a power-of-two `n`.
pub fn brent_kung_solve_with_stats(a: &CoefficientSequence, u: &InputSequence) -> Result<(StateSequence, ScanStats)> {
    check_lengths(a, u)?;
    let n = a.len();
    let d = u.d();
    let mut v = u.folded(a)?;
    let mut f = a.as_slice().to_vec();
    let mut stats = ScanStats::default();

    let combine = |i: usize, j: usize, v: &mut [f64], f: &mut [f64]| {
        let fi = f[i];
        let (head, tail) = v.split_at_mut(i * d);
        for (dst, &src) in tail[..d].iter_mut().zip(&head[j * d..(j + 1) * d]) {
            *dst += fi * src;
        }
        f[i] = fi * f[j];
    };

    let mut s = 1;
    while s < n {
        let mut i = 2 * s - 1;
        while i < n {
            combine(i, i - s, &mut v, &mut f);
            stats.pair_ops += 1;
            i += 2 * s;
        }
        stats.stages += 1;
        s *= 2;
    }
    s /= 2;
    while s >= 1 {
        let mut i = 3 * s - 1;
        let mut touched = false;
        while i < n {
            combine(i, i - s, &mut v, &mut f);
            stats.pair_ops += 1;
            touched = true;
            i += 2 * s;
        }
        if touched {
            stats.stages += 1;
        }
        s /= 2;
    }
    Ok((StateSequence::new(v, d)?, stats))
}

pub fn brent_kung_solve(a: &CoefficientSequence, u: &InputSequence) -> Result<StateSequence> {
    brent_kung_solve_with_stats(a, u).map(|(x, _)| x)
}
