//! Block-size and processor-grid selection, the matrix-multiplication
//! baseline model, and strong-scaling sweeps.
//!
//! Grid selection enumerates ordered factorizations of P exhaustively via
//! the prime factorization (the candidate count depends on the divisor
//! structure of P, so this stays cheap even at P = 2^30) and minimizes the
//! closed-form per-processor word count, breaking ties toward the
//! lexicographically smallest grid tuple.

use crate::bounds::{lb_par_memind_general, lb_par_memind_rect, ProblemShape};
use crate::error::{Error, Result};
use crate::parsim::ProcessorGrid;
use crate::seq::block_footprint;

/// Largest block size `b` with `b^N + N*b <= M`; at least 1 whenever
/// `M >= N + 1`.
pub fn choose_block_size(order: usize, memory: u128) -> Result<usize> {
    let mut best = 0usize;
    loop {
        let next = best + 1;
        if block_footprint(order, next) <= memory {
            best = next;
        } else {
            break;
        }
    }
    if best == 0 {
        return Err(Error::InfeasiblePlan(format!(
            "no feasible block size: M = {memory} < N + 1 = {}",
            order + 1
        )));
    }
    Ok(best)
}

fn ceil_div(a: u128, b: u128) -> u128 {
    a.div_ceil(b)
}

/// Closed-form per-processor word count of the general parallel algorithm
/// for a given grid, with ceilings for uneven divisions:
/// `(P_0-1) * maxX + sum_k (P/(P_0 P_k) - 1) * maxA_k`. With P_0 = 1 this
/// is the stationary algorithm's count. Equals the simulator's measured
/// max words sent per processor whenever everything divides evenly.
pub fn predicted_words(dims: &[u64], rank: u64, grid: &ProcessorGrid) -> u128 {
    let p = grid.total();
    let p0 = grid.col as u128;
    let block: u128 = dims
        .iter()
        .zip(&grid.modes)
        .map(|(&d, &pk)| ceil_div(d as u128, pk as u128))
        .product();
    let mut words = (p0 - 1) * ceil_div(block, p0);
    for (&d, &pk) in dims.iter().zip(&grid.modes) {
        let q = p / (p0 * pk as u128);
        let part = ceil_div(
            ceil_div(d as u128, pk as u128) * ceil_div(rank as u128, p0),
            q,
        );
        words += (q - 1) * part;
    }
    words
}

/// Which parallel algorithm a grid is being planned for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParAlg {
    Stationary,
    General,
}

#[derive(Debug, Clone)]
pub struct GridChoice {
    pub grid: ProcessorGrid,
    pub words: u128,
}

fn factorize(mut v: u128) -> Vec<(u128, u32)> {
    let mut out = Vec::new();
    let mut d = 2u128;
    while d * d <= v {
        if v.is_multiple_of(d) {
            let mut e = 0;
            while v.is_multiple_of(d) {
                v /= d;
                e += 1;
            }
            out.push((d, e));
        }
        d += 1;
    }
    if v > 1 {
        out.push((v, 1));
    }
    out
}

/// All divisors of the number with the given remaining prime exponents,
/// each with its exponent vector, sorted ascending.
fn divisors_of(primes: &[(u128, u32)], rem: &[u32]) -> Vec<(u128, Vec<u32>)> {
    let mut out: Vec<(u128, Vec<u32>)> = vec![(1, vec![0; primes.len()])];
    for (i, &(p, _)) in primes.iter().enumerate() {
        let mut next = Vec::with_capacity(out.len() * (rem[i] as usize + 1));
        for (v, e) in &out {
            let mut pv = 1u128;
            for ei in 0..=rem[i] {
                let mut e2 = e.clone();
                e2[i] = ei;
                next.push((v * pv, e2));
                pv = pv.saturating_mul(p);
            }
        }
        out = next;
    }
    out.sort_by_key(|(v, _)| *v);
    out
}

struct GridSearch<'a> {
    primes: Vec<(u128, u32)>,
    caps: Vec<u128>,
    suffix_cap: Vec<u128>,
    dims: &'a [u64],
    rank: u64,
    best: Option<(u128, Vec<usize>)>,
}

impl GridSearch<'_> {
    fn dfs(&mut self, axis: usize, rem_value: u128, rem_exp: &[u32], tuple: &mut Vec<usize>) {
        if rem_value > self.suffix_cap[axis] {
            return;
        }
        if axis == self.caps.len() - 1 {
            if rem_value > self.caps[axis] {
                return;
            }
            tuple.push(rem_value as usize);
            let grid = ProcessorGrid {
                col: tuple[0],
                modes: tuple[1..].to_vec(),
            };
            let words = predicted_words(self.dims, self.rank, &grid);
            // ascending divisor order makes the first hit the lexicographically
            // smallest tuple of its cost, so strict improvement keeps ties right
            if self.best.as_ref().map(|(w, _)| words < *w).unwrap_or(true) {
                self.best = Some((words, tuple.clone()));
            }
            tuple.pop();
            return;
        }
        for (v, e) in divisors_of(&self.primes, rem_exp) {
            if v > self.caps[axis] {
                break;
            }
            let rest: Vec<u32> = rem_exp.iter().zip(&e).map(|(r, ei)| r - ei).collect();
            tuple.push(v as usize);
            self.dfs(axis + 1, rem_value / v, &rest, tuple);
            tuple.pop();
        }
    }
}

/// Minimizes [`predicted_words`] over all feasible ordered factorizations
/// `P = P_0 * P_1 * ... * P_N` with `P_k <= I_k` and `P_0 <= R` (P_0
/// forced to 1 for the stationary algorithm); ties break toward the
/// lexicographically smallest tuple.
pub fn choose_grid(dims: &[u64], rank: u64, procs: u128, alg: ParAlg) -> Result<GridChoice> {
    if procs == 0 {
        return Err(Error::InfeasiblePlan("P must be positive".into()));
    }
    let n = dims.len();
    let cap0 = match alg {
        ParAlg::Stationary => 1,
        ParAlg::General => (rank as u128).max(1),
    };
    let caps: Vec<u128> = std::iter::once(cap0)
        .chain(dims.iter().map(|&d| d as u128))
        .collect();
    let mut suffix_cap = vec![1u128; n + 2];
    for i in (0..=n).rev() {
        suffix_cap[i] = suffix_cap[i + 1].saturating_mul(caps[i]);
    }
    if procs > suffix_cap[0] {
        return Err(Error::InfeasiblePlan(format!(
            "P = {procs} exceeds the largest feasible grid ({})",
            suffix_cap[0]
        )));
    }

    let primes = factorize(procs);
    let full_exp: Vec<u32> = primes.iter().map(|&(_, e)| e).collect();
    let mut search = GridSearch {
        primes,
        caps,
        suffix_cap,
        dims,
        rank,
        best: None,
    };
    let mut tuple = Vec::with_capacity(n + 1);
    search.dfs(0, procs, &full_exp, &mut tuple);
    match search.best {
        Some((words, tuple)) => Ok(GridChoice {
            grid: ProcessorGrid {
                col: tuple[0],
                modes: tuple[1..].to_vec(),
            },
            words,
        }),
        None => Err(Error::InfeasiblePlan(format!(
            "no feasible factorization of P = {procs} under the dimension caps"
        ))),
    }
}

/// Communication model for MTTKRP cast as a matricized-tensor times
/// Khatri-Rao-product matrix multiplication, `(I^(1/N) x I^((N-1)/N))`
/// times `(I^((N-1)/N) x R)`, with the Khatri-Rao product assumed formed
/// for free. Three regimes are modeled; the baseline takes the cheapest
/// applicable one.
#[derive(Debug, Clone)]
pub struct MatmulModel {
    /// short output dimension, I^(1/N)
    pub m: f64,
    /// contracted dimension, I^((N-1)/N)
    pub k: f64,
    /// rank dimension
    pub n: f64,
    i: f64,
    r: f64,
}

impl MatmulModel {
    pub fn for_cubical(dims: &[u64], rank: u64) -> Result<Self> {
        if dims.len() < 2 || dims.iter().any(|&d| d != dims[0]) {
            return Err(Error::Shape(
                "matrix-multiplication baseline assumes a cubical tensor".into(),
            ));
        }
        let i: f64 = dims.iter().map(|&d| d as f64).product();
        let m = dims[0] as f64;
        Ok(MatmulModel {
            m,
            k: i / m,
            n: rank as f64,
            i,
            r: rank as f64,
        })
    }

    /// One large (contracted) dimension: split k across processors and
    /// allreduce the m-by-n output; a ring allreduce moves
    /// `2 (P-1)/P * m * n` words per processor. Applicable while the
    /// contracted dimension can be split P ways.
    pub fn one_large(&self, p: u128) -> Option<f64> {
        if (p as f64) <= self.k {
            Some(2.0 * (p as f64 - 1.0) / p as f64 * self.m * self.n)
        } else {
            None
        }
    }

    /// Two large dimensions: an output-replicating q1 x q2 slab grid at
    /// `m k / q1 + k n / q2 + m n` words, minimized over divisor pairs.
    pub fn two_large_slabs(&self, p: u128) -> f64 {
        let mut bestv = f64::INFINITY;
        let mut d = 1u128;
        while d * d <= p {
            if p.is_multiple_of(d) {
                for (q1, q2) in [(d, p / d), (p / d, d)] {
                    let c = self.m * self.k / q1 as f64
                        + self.k * self.n / q2 as f64
                        + self.m * self.n;
                    bestv = bestv.min(c);
                }
            }
            d += 1;
        }
        bestv
    }

    /// Three large dimensions (replicated 3D decomposition):
    /// `(I R / P)^(2/3)` words per processor.
    pub fn three_large(&self, p: u128) -> f64 {
        (self.i * self.r / p as f64).cbrt().powi(2)
    }

    /// The 3D regime needs `P >= I / R^2` and enough memory for the
    /// replicated blocks; granting each node a constant multiple of its
    /// even share of the problem data, it applies only when
    /// `3 (IR/P)^(2/3) <= (mk + kn + mn) / P`.
    pub fn three_large_applicable(&self, p: u128) -> bool {
        if self.r <= 0.0 || (p as f64) < self.i / (self.r * self.r) {
            return false;
        }
        let data_share = (self.m * self.k + self.k * self.n + self.m * self.n) / p as f64;
        3.0 * self.three_large(p) <= data_share
    }

    /// Cheapest applicable regime; zero on one processor.
    pub fn baseline_words(&self, p: u128) -> f64 {
        if p <= 1 {
            return 0.0;
        }
        let mut w = self.two_large_slabs(p);
        if let Some(c) = self.one_large(p) {
            w = w.min(c);
        }
        if self.three_large_applicable(p) {
            w = w.min(self.three_large(p));
        }
        w
    }
}

/// Convenience wrapper over [`MatmulModel::baseline_words`].
pub fn matmul_baseline_words(dims: &[u64], rank: u64, procs: u128) -> Result<f64> {
    Ok(MatmulModel::for_cubical(dims, rank)?.baseline_words(procs))
}

/// A strong-scaling sweep request.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub dims: Vec<u64>,
    pub rank: u64,
    pub procs: Vec<u128>,
}

impl SweepSpec {
    /// The 3-way cubical configuration with `I = 2^45`, `R = 2^15`, and
    /// `P` from 1 up to the number of entries in a factor matrix (2^30).
    pub fn fig3() -> Self {
        SweepSpec {
            dims: vec![1 << 15; 3],
            rank: 1 << 15,
            procs: (0..=30).map(|q| 1u128 << q).collect(),
        }
    }
}

/// One row of the sweep: modeled per-processor words for both parallel
/// algorithms under their chosen grids, the matmul baseline, and the two
/// memory-independent lower bounds (clamped, with gamma = delta = 1).
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub procs: u128,
    pub alg3_words: u128,
    pub alg4_words: u128,
    pub mm_words: Option<f64>,
    pub lb_memind: f64,
    pub lb_rect: f64,
    pub grid3: ProcessorGrid,
    pub grid4: ProcessorGrid,
}

pub fn scaling_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    let mm = MatmulModel::for_cubical(&spec.dims, spec.rank).ok();
    let mut rows = Vec::with_capacity(spec.procs.len());
    for &p in &spec.procs {
        let c3 = choose_grid(&spec.dims, spec.rank, p, ParAlg::Stationary)?;
        let c4 = choose_grid(&spec.dims, spec.rank, p, ParAlg::General)?;
        let shape = ProblemShape::new(spec.dims.clone(), spec.rank)?.with_procs(p);
        rows.push(SweepRow {
            procs: p,
            alg3_words: c3.words,
            alg4_words: c4.words,
            mm_words: mm.as_ref().map(|m| m.baseline_words(p)),
            lb_memind: lb_par_memind_general(&shape)?.value,
            lb_rect: lb_par_memind_rect(&shape)?.value,
            grid3: c3.grid,
            grid4: c4.grid,
        });
    }
    Ok(rows)
}

pub const SWEEP_HEADER: &[&str] = &[
    "P",
    "alg3_words",
    "alg4_words",
    "mm_words",
    "lb_memind",
    "lb_rect",
    "grid3",
    "grid4",
];

/// Renders sweep rows as a delimited table (comma for CSV, space for a
/// plotting-friendly .dat file).
pub fn sweep_table(rows: &[SweepRow], sep: &str) -> String {
    let mut out = String::new();
    out.push_str(&SWEEP_HEADER.join(sep));
    out.push('\n');
    for r in rows {
        let mm = r.mm_words.map(|w| format!("{w}")).unwrap_or_default();
        out.push_str(&format!(
            "{}{sep}{}{sep}{}{sep}{}{sep}{}{sep}{}{sep}{}{sep}{}\n",
            r.procs, r.alg3_words, r.alg4_words, mm, r.lb_memind, r.lb_rect, r.grid3, r.grid4
        ));
    }
    out
}
