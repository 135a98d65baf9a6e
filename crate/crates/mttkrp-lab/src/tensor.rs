//! Dense tensor and factor-matrix types plus the deterministic generator
//! used for synthetic problems.
//!
//! A tensor of order `N` with dimensions `I_1 x ... x I_N` is stored in
//! generalized column-major order: mode 1 varies fastest, mode N slowest.
//! Factor matrices are stored row-major. Both orders are part of the file
//! format, not of correctness.

use crate::error::{Error, Result};

/// 64-bit xorshift* generator. Fully specified here so synthetic problems
/// are reproducible across platforms: the state is seeded directly (a zero
/// seed is replaced by the odd constant below), each step applies the
/// 12/25/27 xorshift triple and multiplies by 0x2545F4914F6CDD1D, and
/// samples map the top 53 bits to a double in [-1, 1).
#[derive(Debug, Clone)]
pub struct Xorshift64Star {
    state: u64,
}

impl Xorshift64Star {
    pub fn new(seed: u64) -> Self {
        let state = if seed == 0 { 0x9E37_79B9_7F4A_7C15 } else { seed };
        Xorshift64Star { state }
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    /// Uniform sample in [-1, 1).
    pub fn next_signed_unit(&mut self) -> f64 {
        let bits = self.next_u64() >> 11; // 53 random bits
        (bits as f64) * (2.0 / 9_007_199_254_740_992.0) - 1.0
    }

    /// Uniform integer in [0, bound).
    pub fn next_below(&mut self, bound: u64) -> u64 {
        self.next_u64() % bound.max(1)
    }
}

/// Column-major flat index of a multi-index: mode 1 (index 0) fastest.
pub fn flat_index(dims: &[usize], idx: &[usize]) -> usize {
    debug_assert_eq!(dims.len(), idx.len());
    let mut flat = 0;
    let mut stride = 1;
    for (&d, &i) in dims.iter().zip(idx) {
        debug_assert!(i < d);
        flat += i * stride;
        stride *= d;
    }
    flat
}

/// Iterates multi-indices of a box in lexicographic order: the first
/// coordinate is most significant, the last varies fastest. `lo`/`hi` give
/// per-mode half-open ranges.
pub struct LexIndices {
    lo: Vec<usize>,
    hi: Vec<usize>,
    cur: Vec<usize>,
    done: bool,
}

impl LexIndices {
    pub fn over(dims: &[usize]) -> Self {
        Self::over_ranges(&vec![0; dims.len()], dims)
    }

    pub fn over_ranges(lo: &[usize], hi: &[usize]) -> Self {
        let done = lo.iter().zip(hi).any(|(&l, &h)| l >= h);
        LexIndices {
            lo: lo.to_vec(),
            hi: hi.to_vec(),
            cur: lo.to_vec(),
            done,
        }
    }
}

impl Iterator for LexIndices {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let out = self.cur.clone();
        // odometer increment, last coordinate fastest
        let mut k = self.cur.len();
        loop {
            if k == 0 {
                self.done = true;
                break;
            }
            k -= 1;
            self.cur[k] += 1;
            if self.cur[k] < self.hi[k] {
                break;
            }
            self.cur[k] = self.lo[k];
        }
        Some(out)
    }
}

/// Advances a multi-index one step in lexicographic order (last
/// coordinate fastest); returns false once the box is exhausted.
pub fn lex_advance(idx: &mut [usize], lo: &[usize], hi: &[usize]) -> bool {
    let mut k = idx.len();
    loop {
        if k == 0 {
            return false;
        }
        k -= 1;
        idx[k] += 1;
        if idx[k] < hi[k] {
            return true;
        }
        idx[k] = lo[k];
    }
}

/// Allocation-free lexicographic walk over a box: `f` sees each
/// multi-index in the same order as [`LexIndices`] through a reused
/// buffer. The hot loops of the simulators use this form.
pub fn for_each_lex(lo: &[usize], hi: &[usize], mut f: impl FnMut(&[usize])) {
    if lo.iter().zip(hi).any(|(&l, &h)| l >= h) {
        return;
    }
    let mut cur = lo.to_vec();
    loop {
        f(&cur);
        if !lex_advance(&mut cur, lo, hi) {
            return;
        }
    }
}

/// Largest number of values a materialized array may hold. The
/// simulators run at desk scale; anything bigger is almost certainly a
/// typo and is rejected instead of attempting the allocation.
pub const MAX_MATERIALIZED_ELEMS: usize = 1 << 28;

fn checked_elem_count(dims: &[usize]) -> Result<usize> {
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::InvalidProblem("tensor size overflows".into()))?;
    if count > MAX_MATERIALIZED_ELEMS {
        return Err(Error::InvalidProblem(format!(
            "tensor with {count} entries exceeds the materialization limit ({MAX_MATERIALIZED_ELEMS})"
        )));
    }
    Ok(count)
}

/// Dense N-way tensor, N >= 2.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor {
    dims: Vec<usize>,
    values: Vec<f64>,
}

impl DenseTensor {
    pub fn new(dims: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::InvalidProblem(format!(
                "tensor order must be at least 2, got {}",
                dims.len()
            )));
        }
        if dims.contains(&0) {
            return Err(Error::InvalidProblem("zero tensor dimension".into()));
        }
        let count = checked_elem_count(&dims)?;
        if count != values.len() {
            return Err(Error::InvalidProblem(format!(
                "expected {} values, got {}",
                count,
                values.len()
            )));
        }
        Ok(DenseTensor { dims, values })
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        let count = checked_elem_count(&dims)?;
        DenseTensor::new(dims, vec![0.0; count])
    }

    pub fn synthetic(dims: Vec<usize>, rng: &mut Xorshift64Star) -> Result<Self> {
        let count = checked_elem_count(&dims)?;
        let values = (0..count).map(|_| rng.next_signed_unit()).collect();
        DenseTensor::new(dims, values)
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Total number of entries.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, idx: &[usize]) -> f64 {
        self.values[flat_index(&self.dims, idx)]
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        flat_index(&self.dims, idx)
    }
}

/// Dense matrix with `rows x cols` entries stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl FactorMatrix {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if rows == 0 {
            return Err(Error::InvalidProblem("factor matrix with zero rows".into()));
        }
        let count = rows
            .checked_mul(cols)
            .filter(|&c| c <= MAX_MATERIALIZED_ELEMS)
            .ok_or_else(|| Error::InvalidProblem("matrix too large to materialize".into()))?;
        if count != values.len() {
            return Err(Error::InvalidProblem(format!(
                "expected {} values, got {}",
                count,
                values.len()
            )));
        }
        Ok(FactorMatrix { rows, cols, values })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        FactorMatrix {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn synthetic(rows: usize, cols: usize, rng: &mut Xorshift64Star) -> Self {
        let values = (0..rows * cols).map(|_| rng.next_signed_unit()).collect();
        FactorMatrix { rows, cols, values }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        debug_assert!(row < self.rows && col < self.cols);
        self.values[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        debug_assert!(row < self.rows && col < self.cols);
        self.values[row * self.cols + col] = v;
    }

    pub fn add(&mut self, row: usize, col: usize, v: f64) {
        debug_assert!(row < self.rows && col < self.cols);
        self.values[row * self.cols + col] += v;
    }

    pub fn row_mut(&mut self, row: usize) -> &mut [f64] {
        &mut self.values[row * self.cols..(row + 1) * self.cols]
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Row-major flat offset of (row, col).
    pub fn offset(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    /// Largest absolute difference relative to the largest magnitude of
    /// either matrix; 0 when both are identically zero.
    pub fn rel_error(&self, other: &FactorMatrix) -> f64 {
        assert_eq!(self.rows, other.rows);
        assert_eq!(self.cols, other.cols);
        let mut diff: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for (a, b) in self.values.iter().zip(&other.values) {
            diff = diff.max((a - b).abs());
            scale = scale.max(a.abs()).max(b.abs());
        }
        if scale == 0.0 {
            diff
        } else {
            diff / scale
        }
    }
}

/// One MTTKRP instance: tensor, target mode, rank, and the N-1 input
/// factor matrices for the modes other than `mode`, in ascending mode
/// order. Mode indices are 0-based in the API (1-based in files and on
/// the command line).
#[derive(Debug, Clone)]
pub struct MttkrpProblem {
    pub tensor: DenseTensor,
    pub factors: Vec<FactorMatrix>,
    pub mode: usize,
    pub rank: usize,
}

impl MttkrpProblem {
    pub fn new(
        tensor: DenseTensor,
        factors: Vec<FactorMatrix>,
        mode: usize,
        rank: usize,
    ) -> Result<Self> {
        let n = tensor.order();
        if mode >= n {
            return Err(Error::InvalidProblem(format!(
                "mode {} out of range for order {}",
                mode, n
            )));
        }
        if factors.len() != n - 1 {
            return Err(Error::InvalidProblem(format!(
                "expected {} factor matrices, got {}",
                n - 1,
                factors.len()
            )));
        }
        let inputs: Vec<usize> = (0..n).filter(|&k| k != mode).collect();
        for (f, &k) in factors.iter().zip(&inputs) {
            if f.rows() != tensor.dims()[k] {
                return Err(Error::InvalidProblem(format!(
                    "factor for mode {} has {} rows, expected {}",
                    k + 1,
                    f.rows(),
                    tensor.dims()[k]
                )));
            }
            if f.cols() != rank {
                return Err(Error::InvalidProblem(format!(
                    "factor for mode {} has {} columns, expected rank {}",
                    k + 1,
                    f.cols(),
                    rank
                )));
            }
        }
        Ok(MttkrpProblem {
            tensor,
            factors,
            mode,
            rank,
        })
    }

    /// Synthetic problem: tensor entries first, then each input factor in
    /// ascending mode order, all drawn from one seeded generator.
    pub fn synthetic(dims: &[usize], rank: usize, mode: usize, seed: u64) -> Result<Self> {
        let mut rng = Xorshift64Star::new(seed);
        let tensor = DenseTensor::synthetic(dims.to_vec(), &mut rng)?;
        for (k, &d) in dims.iter().enumerate() {
            if k != mode && d.checked_mul(rank).map_or(true, |c| c > MAX_MATERIALIZED_ELEMS) {
                return Err(Error::InvalidProblem(
                    "factor matrix too large to materialize".into(),
                ));
            }
        }
        let factors = dims
            .iter()
            .enumerate()
            .filter(|&(k, _)| k != mode)
            .map(|(_, &d)| FactorMatrix::synthetic(d, rank, &mut rng))
            .collect();
        MttkrpProblem::new(tensor, factors, mode, rank)
    }

    pub fn order(&self) -> usize {
        self.tensor.order()
    }

    pub fn dims(&self) -> &[usize] {
        self.tensor.dims()
    }

    /// Modes with input factors (all but `mode`), ascending.
    pub fn input_modes(&self) -> Vec<usize> {
        (0..self.order()).filter(|&k| k != self.mode).collect()
    }

    /// Input factor matrix for mode `k != mode`.
    pub fn factor_for_mode(&self, k: usize) -> &FactorMatrix {
        assert_ne!(k, self.mode);
        let pos = if k < self.mode { k } else { k - 1 };
        &self.factors[pos]
    }

    pub fn output_rows(&self) -> usize {
        self.dims()[self.mode]
    }
}
