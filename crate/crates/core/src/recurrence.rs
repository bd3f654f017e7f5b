//! The scalar linear recurrence `x_i = a_i x_{i-1} + u_i`, its dense transfer
//! operator `L = (I - AZ)^{-1}`, and the sequential reference solver.
//!
//! Inputs carry `d` channels in row-major time x channel layout; the
//! coefficients are shared by every channel.

use crate::error::{Result, SwrError};
use crate::matrix::{DenseMatrix, Scalar};
use crate::numerics::SeededRng;

/// Recurrence coefficients `a_1..a_n`. Any finite values are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSequence {
    a: Vec<f64>,
}

impl CoefficientSequence {
    pub fn new(a: Vec<f64>) -> Result<Self> {
        if a.is_empty() {
            return Err(SwrError::Empty);
        }
        if let Some(i) = a.iter().position(|v| !v.is_finite()) {
            return Err(SwrError::NonFinite(i));
        }
        Ok(Self { a })
    }

    pub fn constant(value: f64, n: usize) -> Result<Self> {
        Self::new(vec![value; n])
    }

    pub fn random(rng: &mut SeededRng, n: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(rng.uniform_vec(n, lo, hi)?)
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.a
    }

    pub fn max_abs(&self) -> f64 {
        crate::numerics::max_abs(&self.a)
    }

    /// Appends zero coefficients up to `len`; zeros sever any carry into the padding.
    pub fn padded(&self, len: usize) -> Self {
        let mut a = self.a.clone();
        if len > a.len() {
            a.resize(len, 0.0);
        }
        Self { a }
    }
}

/// Inputs `u` (n x d) and the initial state `x0` (length d).
#[derive(Debug, Clone, PartialEq)]
pub struct InputSequence {
    u: Vec<f64>,
    d: usize,
    x0: Vec<f64>,
}

impl InputSequence {
    pub fn new(u: Vec<f64>, d: usize, x0: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(SwrError::Shape("input needs at least one channel".into()));
        }
        if u.is_empty() {
            return Err(SwrError::Empty);
        }
        if u.len() % d != 0 {
            return Err(SwrError::Shape(format!(
                "{} input values do not split into {d} channels",
                u.len()
            )));
        }
        if x0.len() != d {
            return Err(SwrError::Shape(format!(
                "initial state has {} channels, input has {d}",
                x0.len()
            )));
        }
        if let Some(i) = u.iter().chain(&x0).position(|v| !v.is_finite()) {
            return Err(SwrError::NonFinite(i));
        }
        Ok(Self { u, d, x0 })
    }

    /// Inputs with a zero initial state.
    pub fn from_flat(u: Vec<f64>, d: usize) -> Result<Self> {
        Self::new(u, d, vec![0.0; d])
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map(Vec::len).ok_or(SwrError::Empty)?;
        if rows.iter().any(|r| r.len() != d) {
            return Err(SwrError::Shape("ragged input rows".into()));
        }
        Self::from_flat(rows.concat(), d)
    }

    pub fn random(rng: &mut SeededRng, n: usize, d: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::from_flat(rng.uniform_vec(n * d, lo, hi)?, d)
    }

    pub fn with_x0(mut self, x0: Vec<f64>) -> Result<Self> {
        if x0.len() != self.d {
            return Err(SwrError::Shape(format!(
                "initial state has {} channels, input has {}",
                x0.len(),
                self.d
            )));
        }
        self.x0 = x0;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.u.len() / self.d
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.u
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.u[i * self.d..(i + 1) * self.d]
    }

    /// Inputs with the initial state folded in: `u_1 + a_1 x_0`.
    pub fn folded(&self, a: &CoefficientSequence) -> Result<Vec<f64>> {
        check_lengths(a, self)?;
        let mut u = self.u.clone();
        let a1 = a.as_slice()[0];
        for (v, x0) in u[..self.d].iter_mut().zip(&self.x0) {
            *v += a1 * x0;
        }
        Ok(u)
    }

    /// Appends zero rows up to `n` rows.
    pub fn padded(&self, n: usize) -> Self {
        let mut u = self.u.clone();
        if n * self.d > u.len() {
            u.resize(n * self.d, 0.0);
        }
        Self {
            u,
            d: self.d,
            x0: self.x0.clone(),
        }
    }
}

/// States `x` (n x d).
#[derive(Debug, Clone, PartialEq)]
pub struct StateSequence {
    x: Vec<f64>,
    d: usize,
}

impl StateSequence {
    pub fn new(x: Vec<f64>, d: usize) -> Result<Self> {
        if d == 0 || x.len() % d != 0 {
            return Err(SwrError::Shape(format!(
                "{} state values do not split into {d} channels",
                x.len()
            )));
        }
        Ok(Self { x, d })
    }

    pub fn n(&self) -> usize {
        self.x.len() / self.d
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.x
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.x
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    /// Values of channel `c` over time.
    pub fn channel(&self, c: usize) -> Vec<f64> {
        self.x.iter().skip(c).step_by(self.d).copied().collect()
    }

    /// Keeps the first `n` rows.
    pub fn truncated(mut self, n: usize) -> Self {
        self.x.truncate(n * self.d);
        self
    }
}

pub(crate) fn check_lengths(a: &CoefficientSequence, u: &InputSequence) -> Result<()> {
    if a.len() != u.n() {
        return Err(SwrError::Shape(format!(
            "{} coefficients for {} inputs",
            a.len(),
            u.n()
        )));
    }
    Ok(())
}

/// Left-to-right evaluation of the recurrence; the reference for every other solver.
pub fn sequential_solve(a: &CoefficientSequence, u: &InputSequence) -> Result<StateSequence> {
    let mut x = u.folded(a)?;
    let d = u.d();
    for (i, &ai) in a.as_slice().iter().enumerate().skip(1) {
        let (prev, cur) = x.split_at_mut(i * d);
        let prev = &prev[(i - 1) * d..];
        for (xc, xp) in cur[..d].iter_mut().zip(prev) {
            *xc += ai * xp;
        }
    }
    StateSequence::new(x, d)
}

/// Dense transfer operator. Entry `(i, j)` is the product `a_i a_{i-1} ... a_{j+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferOperator {
    entries: DenseMatrix<f64>,
    unit_diagonal: bool,
}

impl TransferOperator {
    pub fn from_matrix(entries: DenseMatrix<f64>) -> Result<Self> {
        let n = entries.rows();
        if entries.cols() != n {
            return Err(SwrError::Shape("transfer operator must be square".into()));
        }
        for i in 0..n {
            for j in i + 1..n {
                if entries[(i, j)] != 0.0 {
                    return Err(SwrError::Shape(format!(
                        "entry ({i}, {j}) above the diagonal is nonzero"
                    )));
                }
            }
        }
        let unit_diagonal = (0..n).all(|i| entries[(i, i)] == 1.0);
        Ok(Self {
            entries,
            unit_diagonal,
        })
    }

    pub fn n(&self) -> usize {
        self.entries.rows()
    }

    pub fn entries(&self) -> &DenseMatrix<f64> {
        &self.entries
    }

    pub fn unit_diagonal(&self) -> bool {
        self.unit_diagonal
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }
}

/// Product `a_i a_{i-1} ... a_j` over 0-based indices; 1 when empty, 0 when `i + 1 < j`.
pub fn segment_product<T: Scalar>(a: &[T], i: usize, j: usize) -> T {
    if i + 1 < j {
        return T::zero();
    }
    a[j..=i].iter().fold(T::one(), |acc, &v| acc * v)
}

/// Entrywise-product materialization of `L` over any scalar ring.
pub fn transfer_entries<T: Scalar>(a: &[T]) -> DenseMatrix<T> {
    let n = a.len();
    DenseMatrix::from_fn(n, n, |i, j| {
        if i >= j {
            segment_product(a, i, j + 1)
        } else {
            T::zero()
        }
    })
}

/// Reference materialization of `L` by direct per-entry products, O(n^3).
pub fn materialize_transfer_naive(a: &CoefficientSequence) -> TransferOperator {
    TransferOperator {
        entries: transfer_entries(a.as_slice()),
        unit_diagonal: true,
    }
}

/// `x = L u` per channel, after folding the initial state.
pub fn apply_transfer(l: &TransferOperator, a: &CoefficientSequence, u: &InputSequence) -> Result<StateSequence> {
    if l.n() != u.n() {
        return Err(SwrError::Shape(format!(
            "operator is {n}x{n}, input has {} rows",
            u.n(),
            n = l.n()
        )));
    }
    let folded = u.folded(a)?;
    StateSequence::new(l.entries.apply(&folded, u.d())?, u.d())
}

/// The weighted shift `A Z` (a_i on the first subdiagonal of row i).
pub fn weighted_shift<T: Scalar>(a: &[T]) -> DenseMatrix<T> {
    let n = a.len();
    DenseMatrix::from_fn(n, n, |i, j| if i == j + 1 { a[i] } else { T::zero() })
}

/// `(A Z)^k` built from its closed form: supported on the k-th subdiagonal with
/// entries `a_i a_{i-1} ... a_{i-k+1}`.
pub fn weighted_shift_power<T: Scalar>(a: &[T], k: usize) -> DenseMatrix<T> {
    let n = a.len();
    DenseMatrix::from_fn(n, n, |i, j| {
        if i == j + k {
            segment_product(a, i, j + 1)
        } else {
            T::zero()
        }
    })
}

/// `(A Z)^k` for a coefficient sequence; `k = n` gives the zero matrix.
pub fn nilpotency_check(a: &CoefficientSequence, k: usize) -> Result<DenseMatrix<f64>> {
    if k > a.len() {
        return Err(SwrError::Domain(format!(
            "power {k} exceeds sequence length {}",
            a.len()
        )));
    }
    Ok(weighted_shift_power(a.as_slice(), k))
}

/// Smallest `m` with `(A Z)^m = 0`: one more than the longest run of nonzero
/// coefficients among `a_2..a_n`.
pub fn nilpotency_index<T: Scalar>(a: &[T]) -> usize {
    let mut longest = 0;
    let mut run = 0;
    for v in a.iter().skip(1) {
        if *v == T::zero() {
            run = 0;
        } else {
            run += 1;
            longest = longest.max(run);
        }
    }
    longest + 1
}
