//! Closed-form communication lower bounds for dense MTTKRP, together with
//! the inequalities used to derive them: the constrained product/sum
//! optima, the linear program over projection exponents, and the
//! Hölder-Brascamp-Lieb set inequality itself (as an empirical checker).
//!
//! Every bound evaluator returns both the raw formula value and the value
//! clamped at zero; the bounds legitimately degenerate negative outside
//! their useful parameter range.

use std::collections::HashSet;

use crate::error::{Error, Result};

/// Problem parameters a bound can be evaluated for. `memory` and `procs`
/// are optional because not every bound needs them; `gamma`/`delta` are
/// the data-distribution imbalance constants (>= 1, 1 = perfectly even).
#[derive(Debug, Clone)]
pub struct ProblemShape {
    pub dims: Vec<u64>,
    pub rank: u64,
    pub memory: Option<u128>,
    pub procs: Option<u128>,
    pub gamma: f64,
    pub delta: f64,
}

impl ProblemShape {
    pub fn new(dims: Vec<u64>, rank: u64) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::Shape("need N >= 2 positive dimensions".into()));
        }
        Ok(ProblemShape {
            dims,
            rank,
            memory: None,
            procs: None,
            gamma: 1.0,
            delta: 1.0,
        })
    }

    pub fn with_memory(mut self, m: u128) -> Self {
        self.memory = Some(m);
        self
    }

    pub fn with_procs(mut self, p: u128) -> Self {
        self.procs = Some(p);
        self
    }

    pub fn with_balance(mut self, gamma: f64, delta: f64) -> Result<Self> {
        if gamma < 1.0 || delta < 1.0 {
            return Err(Error::Shape("gamma and delta must be >= 1".into()));
        }
        self.gamma = gamma;
        self.delta = delta;
        Ok(self)
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    /// Total tensor entries.
    pub fn tensor_elems(&self) -> u128 {
        self.dims.iter().map(|&d| d as u128).product()
    }

    /// Sum over modes of I_k * R (all factor-matrix entries, output included).
    pub fn factor_elems(&self) -> u128 {
        self.dims.iter().map(|&d| d as u128 * self.rank as u128).sum()
    }

    pub fn is_cubical(&self) -> bool {
        self.dims.iter().all(|&d| d == self.dims[0])
    }

    fn memory_f(&self) -> Result<f64> {
        self.memory
            .map(|m| m as f64)
            .ok_or_else(|| Error::Shape("bound requires a memory size M".into()))
    }

    fn procs_f(&self) -> Result<f64> {
        self.procs
            .map(|p| p as f64)
            .ok_or_else(|| Error::Shape("bound requires a processor count P".into()))
    }
}

/// A lower-bound value: `raw` as the formula produces it, `value` clamped
/// at zero for reporting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bound {
    pub raw: f64,
    pub value: f64,
}

impl Bound {
    fn from_raw(raw: f64) -> Self {
        Bound { raw, value: raw.max(0.0) }
    }
}

/// Memory-dependent sequential bound:
/// `NIR / (3^(2-1/N) * M^(1-1/N)) - M`, evaluated as
/// `NIR * (3M)^(1/N) / (9M) - M` for numerical stability.
pub fn lb_seq_memdep(shape: &ProblemShape) -> Result<Bound> {
    let m = shape.memory_f()?;
    if m < 1.0 {
        return Err(Error::Shape("memory-dependent bound requires M >= 1".into()));
    }
    let n = shape.order() as f64;
    let nir = n * shape.tensor_elems() as f64 * shape.rank as f64;
    let raw = nir * (3.0 * m).powf(1.0 / n) / (9.0 * m) - m;
    Ok(Bound::from_raw(raw))
}

/// Trivial sequential bound: `I + sum_k I_k R - 2M` (all inputs and
/// outputs must be touched, minus full warm-start and warm-end credit).
pub fn lb_seq_trivial(shape: &ProblemShape) -> Result<Bound> {
    let m = shape.memory_f()?;
    let raw = shape.tensor_elems() as f64 + shape.factor_elems() as f64 - 2.0 * m;
    Ok(Bound::from_raw(raw))
}

/// Memory-dependent parallel bound (the sequential bound applied to the
/// busiest processor): `NIR / (3^(2-1/N) * P * M^(1-1/N)) - M`.
pub fn lb_par_memdep(shape: &ProblemShape) -> Result<Bound> {
    let m = shape.memory_f()?;
    if m < 1.0 {
        return Err(Error::Shape("memory-dependent bound requires M >= 1".into()));
    }
    let p = shape.procs_f()?;
    let n = shape.order() as f64;
    let nir = n * shape.tensor_elems() as f64 * shape.rank as f64;
    let raw = nir * (3.0 * m).powf(1.0 / n) / (9.0 * m * p) - m;
    Ok(Bound::from_raw(raw))
}

/// Memory-independent parallel bound:
/// `2 (NIR/P)^(N/(2N-1)) - gamma I/P - delta sum_k I_k R / P`.
///
/// The leading constant 2 rounds up the exact constant the underlying
/// constrained-minimization argument yields,
/// `(2 - 1/N) * (N prod_j s_j^(s_j))^(-N/(2N-1))` (about 1.89 for N = 2,
/// 1.96 for N = 3), so on near-degenerate instances (e.g. P = 1 with a
/// handful of entries, where zero communication suffices) the evaluated
/// value can exceed attainable communication by a few percent of a word.
/// At any nontrivial scale the subtracted ownership terms dwarf the gap.
pub fn lb_par_memind_general(shape: &ProblemShape) -> Result<Bound> {
    let p = shape.procs_f()?;
    let n = shape.order() as f64;
    let nir = n * shape.tensor_elems() as f64 * shape.rank as f64;
    let raw = 2.0 * (nir / p).powf(n / (2.0 * n - 1.0))
        - shape.gamma * shape.tensor_elems() as f64 / p
        - shape.delta * shape.factor_elems() as f64 / p;
    Ok(Bound::from_raw(raw))
}

/// Both branches of the rectangular memory-independent bound, before the
/// min: the factor-access branch
/// `sqrt(2/(3 gamma)) N R (I/P)^(1/N) - delta sum_k I_k R / P`
/// and the tensor-access branch `gamma I / (2P)`.
pub fn lb_par_memind_rect_branches(shape: &ProblemShape) -> Result<(f64, f64)> {
    let p = shape.procs_f()?;
    let n = shape.order() as f64;
    let i = shape.tensor_elems() as f64;
    let factor_branch = (2.0 / (3.0 * shape.gamma)).sqrt()
        * n
        * shape.rank as f64
        * (i / p).powf(1.0 / n)
        - shape.delta * shape.factor_elems() as f64 / p;
    let tensor_branch = shape.gamma * i / (2.0 * p);
    Ok((factor_branch, tensor_branch))
}

/// Rectangular memory-independent parallel bound: the min of the two
/// branches above.
pub fn lb_par_memind_rect(shape: &ProblemShape) -> Result<Bound> {
    let (a, b) = lb_par_memind_rect_branches(shape)?;
    Ok(Bound::from_raw(a.min(b)))
}

/// Which memory-independent bound dominates a cubical shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombinedRegime {
    /// `NR >= (I/P)^(1-1/N)`: the general bound's term dominates.
    General,
    /// Otherwise the rectangular bound's factor term dominates.
    Rect,
}

#[derive(Debug, Clone)]
pub struct CombinedBound {
    pub regime: CombinedRegime,
    pub selected: Bound,
    pub general: Bound,
    pub rect: Bound,
}

/// Combined memory-independent bound for cubical shapes: selects the
/// dominant regime by the `NR` vs `(I/P)^(1-1/N)` threshold and reports
/// both raw values.
pub fn lb_par_combined(shape: &ProblemShape) -> Result<CombinedBound> {
    if !shape.is_cubical() {
        return Err(Error::Shape(
            "combined bound assumes a cubical tensor (all I_k equal)".into(),
        ));
    }
    let p = shape.procs_f()?;
    let n = shape.order() as f64;
    let general = lb_par_memind_general(shape)?;
    let rect = lb_par_memind_rect(shape)?;
    let threshold = (shape.tensor_elems() as f64 / p).powf(1.0 - 1.0 / n);
    let regime = if n * shape.rank as f64 >= threshold {
        CombinedRegime::General
    } else {
        CombinedRegime::Rect
    };
    let selected = match regime {
        CombinedRegime::General => general,
        CombinedRegime::Rect => rect,
    };
    Ok(CombinedBound { regime, selected, general, rect })
}

/// Analytic solution of the projection-exponent linear program:
/// `s* = (1/N, ..., 1/N, 1 - 1/N)` with objective `2 - 1/N`.
pub fn lemma_lp_solution(n: usize) -> Result<(Vec<f64>, f64)> {
    if n < 2 {
        return Err(Error::Shape("linear program needs N >= 2".into()));
    }
    let mut s = vec![1.0 / n as f64; n];
    s.push(1.0 - 1.0 / n as f64);
    Ok((s, 2.0 - 1.0 / n as f64))
}

/// Maximum of `prod x_i^(s_i)` over `x >= 0` with `sum x_i <= c`:
/// `c^S * prod (s_i/S)^(s_i)` where `S = sum s_i`. Requires `s > 0`, `c > 0`.
pub fn lemma_max_product(s: &[f64], c: f64) -> Result<f64> {
    if c <= 0.0 {
        return Err(Error::Shape("constraint constant must be positive".into()));
    }
    if s.is_empty() || s.iter().any(|&v| v <= 0.0) {
        return Err(Error::Shape("exponents must be positive".into()));
    }
    let total: f64 = s.iter().sum();
    let mut v = c.powf(total);
    for &sj in s {
        v *= (sj / total).powf(sj);
    }
    Ok(v)
}

/// Minimum of `sum x_i` over `x >= 0` with `prod x_i^(s_i) >= c`:
/// `(c / prod s_i^(s_i))^(1/S) * S`, with the convention `0^0 = 1`.
/// Requires `s >= 0` with `sum s_i > 0` and `c > 0`.
pub fn lemma_min_sum(s: &[f64], c: f64) -> Result<f64> {
    if c <= 0.0 {
        return Err(Error::Shape("constraint constant must be positive".into()));
    }
    if s.iter().any(|&v| v < 0.0) {
        return Err(Error::Shape("exponents must be non-negative".into()));
    }
    let total: f64 = s.iter().sum();
    if total <= 0.0 {
        return Err(Error::Shape("exponent sum must be positive".into()));
    }
    let mut denom = 1.0;
    for &si in s {
        if si > 0.0 {
            denom *= si.powf(si);
        }
    }
    Ok((c / denom).powf(1.0 / total) * total)
}

/// The projection incidence matrix for an order-N MTTKRP iteration space:
/// entry `(i, j)` is 1 when projection `j` keeps loop index `i`. Rows are
/// the N+1 loop indices `(i_1..i_N, r)`, columns the N+1 arrays (N factor
/// matrices, then the tensor).
pub fn projection_matrix(n: usize) -> Vec<Vec<u8>> {
    let d = n + 1;
    (0..d)
        .map(|i| (0..d).map(|j| u8::from(projection_keeps(n, i, j))).collect())
        .collect()
}

/// Whether projection `j` (0..N-1 = factor matrices, N = tensor) keeps
/// loop index `i` (0..N-1 = mode indices, N = the column index r).
fn projection_keeps(n: usize, index: usize, projection: usize) -> bool {
    if projection < n {
        index == projection || index == n
    } else {
        index < n
    }
}

/// Feasibility of an exponent vector: `0 <= s <= 1` and `Delta * s >= 1`
/// componentwise (each loop index covered with total weight >= 1).
pub fn hbl_feasible(s: &[f64]) -> bool {
    let d = s.len();
    if d < 3 {
        return false;
    }
    let n = d - 1;
    if s.iter().any(|&v| !(-1e-12..=1.0 + 1e-12).contains(&v)) {
        return false;
    }
    for index in 0..d {
        let mut cover = 0.0;
        for (j, &sj) in s.iter().enumerate() {
            if projection_keeps(n, index, j) {
                cover += sj;
            }
        }
        if cover < 1.0 - 1e-9 {
            return false;
        }
    }
    true
}

/// Result of checking `|F| <= prod_j |phi_j(F)|^(s_j)` on a point set.
#[derive(Debug, Clone)]
pub struct HblCheck {
    pub lhs: usize,
    pub rhs: f64,
    pub projection_sizes: Vec<usize>,
    pub holds: bool,
}

/// Empirically checks the set inequality for a subset `F` of the
/// iteration space Z^(N+1). Points are `(i_1..i_N, r)` tuples. Rejects
/// infeasible exponent vectors: the inequality is not claimed there.
pub fn hbl_check(points: &[Vec<i64>], s: &[f64]) -> Result<HblCheck> {
    if !hbl_feasible(s) {
        return Err(Error::Shape("exponent vector is not feasible".into()));
    }
    let d = s.len();
    let n = d - 1;
    let set: HashSet<&[i64]> = points
        .iter()
        .map(|p| {
            if p.len() != d {
                return Err(Error::Shape(format!(
                    "point of arity {}, expected {}",
                    p.len(),
                    d
                )));
            }
            Ok(p.as_slice())
        })
        .collect::<Result<_>>()?;
    let lhs = set.len();

    let mut projection_sizes = Vec::with_capacity(d);
    for j in 0..n {
        let proj: HashSet<(i64, i64)> = set.iter().map(|p| (p[j], p[n])).collect();
        projection_sizes.push(proj.len());
    }
    let tensor_proj: HashSet<Vec<i64>> = set.iter().map(|p| p[..n].to_vec()).collect();
    projection_sizes.push(tensor_proj.len());

    let mut rhs = 1.0;
    for (&size, &sj) in projection_sizes.iter().zip(s) {
        rhs *= (size as f64).powf(sj);
    }
    let holds = lhs as f64 <= rhs * (1.0 + 1e-9);
    Ok(HblCheck { lhs, rhs, projection_sizes, holds })
}

/// Which family of bounds applies to a measured count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundContext {
    Sequential,
    Parallel,
}

/// `measured / max(applicable clamped bounds)`; `None` when every
/// applicable bound clamps to zero (the ratio is undefined there).
pub fn optimality_ratio(
    shape: &ProblemShape,
    measured: f64,
    context: BoundContext,
) -> Result<Option<f64>> {
    if measured <= 0.0 {
        return Err(Error::Shape("measured communication must be positive".into()));
    }
    let mut best: f64 = 0.0;
    match context {
        BoundContext::Sequential => {
            best = best.max(lb_seq_trivial(shape)?.value);
            if shape.memory.unwrap_or(0) >= 1 {
                best = best.max(lb_seq_memdep(shape)?.value);
            }
        }
        BoundContext::Parallel => {
            best = best.max(lb_par_memind_general(shape)?.value);
            best = best.max(lb_par_memind_rect(shape)?.value);
            if shape.memory.unwrap_or(0) >= 1 {
                best = best.max(lb_par_memdep(shape)?.value);
            }
        }
    }
    if best <= 0.0 {
        Ok(None)
    } else {
        Ok(Some(measured / best))
    }
}

/// Every bound evaluable for a shape, for reporting.
#[derive(Debug, Clone, Default)]
pub struct BoundsReport {
    pub seq_mem_dependent: Option<Bound>,
    pub seq_trivial: Option<Bound>,
    pub par_mem_dependent: Option<Bound>,
    pub par_mem_independent_general: Option<Bound>,
    pub par_mem_independent_rect: Option<Bound>,
    pub par_combined: Option<CombinedBound>,
}

pub fn bounds_report(shape: &ProblemShape) -> BoundsReport {
    let mut r = BoundsReport::default();
    if let Some(m) = shape.memory {
        r.seq_trivial = lb_seq_trivial(shape).ok();
        if m >= 1 {
            r.seq_mem_dependent = lb_seq_memdep(shape).ok();
        }
    }
    if shape.procs.is_some() {
        r.par_mem_independent_general = lb_par_memind_general(shape).ok();
        r.par_mem_independent_rect = lb_par_memind_rect(shape).ok();
        if shape.memory.unwrap_or(0) >= 1 {
            r.par_mem_dependent = lb_par_memdep(shape).ok();
        }
        if shape.is_cubical() {
            r.par_combined = lb_par_combined(shape).ok();
        }
    }
    r
}
