//! Deterministic distributed-memory MTTKRP simulator.
//!
//! Virtual processors live on an (N+1)-way logical grid `P_0 x P_1 x ...
//! x P_N`: one column-dimension factor (always 1 for the stationary
//! algorithm) and one factor per tensor mode. All collectives are the
//! bucket algorithms from [`collectives`], simulated step-synchronously
//! in a fixed lexicographic processor order, so ledgers are bit-identical
//! across runs and independent of any real scheduling.

pub mod collectives;

use std::collections::BTreeMap;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::memmodel::ArrayId;
use crate::tensor::{flat_index, for_each_lex, FactorMatrix, LexIndices, MttkrpProblem};
use collectives::{bucket_all_gather, bucket_reduce_scatter, TrafficDelta};

/// Factorization of P into `P_0 * P_1 * ... * P_N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessorGrid {
    /// Column-dimension factor P_0 (splits the rank dimension).
    pub col: usize,
    /// Per-mode factors P_1..P_N.
    pub modes: Vec<usize>,
}

impl ProcessorGrid {
    pub fn new(col: usize, modes: Vec<usize>) -> Result<Self> {
        if col == 0 || modes.is_empty() || modes.contains(&0) {
            return Err(Error::InfeasiblePlan("grid factors must be positive".into()));
        }
        Ok(ProcessorGrid { col, modes })
    }

    /// Grid with P_0 = 1 (the stationary algorithm's shape).
    pub fn stationary(modes: Vec<usize>) -> Result<Self> {
        ProcessorGrid::new(1, modes)
    }

    pub fn total(&self) -> u128 {
        self.modes
            .iter()
            .fold(self.col as u128, |acc, &p| acc * p as u128)
    }

    /// All grid axes: the column axis first, then one per mode.
    pub fn axes(&self) -> Vec<usize> {
        let mut a = Vec::with_capacity(self.modes.len() + 1);
        a.push(self.col);
        a.extend_from_slice(&self.modes);
        a
    }

    /// Checks the grid against a problem: `P_k <= I_k` and `P_0 <= R`
    /// (P_0 = 1 is always allowed).
    pub fn validate(&self, dims: &[usize], rank: usize) -> Result<()> {
        if self.modes.len() != dims.len() {
            return Err(Error::InfeasiblePlan(format!(
                "grid has {} mode factors for an order-{} tensor",
                self.modes.len(),
                dims.len()
            )));
        }
        for (k, (&p, &d)) in self.modes.iter().zip(dims).enumerate() {
            if p > d {
                return Err(Error::InfeasiblePlan(format!(
                    "P_{} = {} exceeds I_{} = {}",
                    k + 1,
                    p,
                    k + 1,
                    d
                )));
            }
        }
        if self.col > 1 && self.col > rank {
            return Err(Error::InfeasiblePlan(format!(
                "P_0 = {} exceeds R = {}",
                self.col, rank
            )));
        }
        Ok(())
    }
}

impl std::fmt::Display for ProcessorGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.col)?;
        for p in &self.modes {
            write!(f, "x{p}")?;
        }
        Ok(())
    }
}

/// Splits `0..len` into `q` contiguous parts whose sizes differ by at
/// most one, the first `len % q` parts one element larger.
pub fn balanced_parts(len: usize, q: usize) -> Vec<Range<usize>> {
    assert!(q > 0);
    let base = len / q;
    let rem = len % q;
    let mut parts = Vec::with_capacity(q);
    let mut at = 0;
    for i in 0..q {
        let sz = base + usize::from(i < rem);
        parts.push(at..at + sz);
        at += sz;
    }
    parts
}

/// Index partitions for one problem/grid pair: contiguous per-mode parts
/// of each `[I_k]` and a contiguous partition of the rank dimension.
#[derive(Debug, Clone)]
pub struct DataDistribution {
    pub grid: ProcessorGrid,
    pub dims: Vec<usize>,
    pub rank: usize,
    pub mode: usize,
    /// mode_parts[k][p_k]: rows of mode k owned by grid coordinate p_k.
    pub mode_parts: Vec<Vec<Range<usize>>>,
    /// col_parts[p_0]: columns owned by column coordinate p_0.
    pub col_parts: Vec<Range<usize>>,
}

impl DataDistribution {
    pub fn build(
        dims: &[usize],
        rank: usize,
        mode: usize,
        grid: &ProcessorGrid,
    ) -> Result<Self> {
        grid.validate(dims, rank)?;
        if mode >= dims.len() {
            return Err(Error::Distribution(format!("mode {mode} out of range")));
        }
        let mode_parts = dims
            .iter()
            .zip(&grid.modes)
            .map(|(&d, &p)| balanced_parts(d, p))
            .collect();
        let col_parts = balanced_parts(rank, grid.col);
        Ok(DataDistribution {
            grid: grid.clone(),
            dims: dims.to_vec(),
            rank,
            mode,
            mode_parts,
            col_parts,
        })
    }

    pub fn proc_count(&self) -> usize {
        self.grid.total() as usize
    }

    /// All processor coordinates `(p_0, p_1..p_N)` in lexicographic order;
    /// a processor's id is its position in this order.
    pub fn coords(&self) -> Vec<Vec<usize>> {
        LexIndices::over(&self.grid.axes()).collect()
    }

    fn coord_id(&self, coord: &[usize]) -> usize {
        let axes = self.grid.axes();
        let mut id = 0;
        for (c, a) in coord.iter().zip(&axes) {
            id = id * a + c;
        }
        id
    }

    /// Groups of processors that agree on the given grid axes (axis 0 is
    /// the column axis, axis 1+k is mode k). Each group lists processor
    /// ids in lexicographic coordinate order; groups come out sorted by
    /// their fixed coordinate values.
    pub fn groups_fixing(&self, fixed_axes: &[usize]) -> Vec<Vec<usize>> {
        let mut map: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
        for (id, coord) in self.coords().iter().enumerate() {
            let key: Vec<usize> = fixed_axes.iter().map(|&a| coord[a]).collect();
            map.entry(key).or_default().push(id);
        }
        map.into_values().collect()
    }

    /// Local dimensions of the tensor block at mode coordinates `pk`.
    pub fn block_dims(&self, pk: &[usize]) -> Vec<usize> {
        pk.iter()
            .enumerate()
            .map(|(k, &c)| self.mode_parts[k][c].len())
            .collect()
    }

    /// Measured distribution imbalance (gamma, delta): the largest
    /// per-processor tensor / factor-entry ownership relative to a
    /// perfectly even split. Both are exactly 1 for even divisions.
    pub fn measured_imbalance(&self) -> (f64, f64) {
        let p = self.proc_count() as f64;
        let tensor_total: f64 = self.dims.iter().map(|&d| d as f64).product();
        let factor_total: f64 = self
            .dims
            .iter()
            .map(|&d| d as f64 * self.rank as f64)
            .sum();
        let mut max_tensor = 0usize;
        let mut max_factor = 0usize;
        for coord in self.coords() {
            let (p0, pk) = (coord[0], &coord[1..]);
            let block: usize = self.block_dims(pk).iter().product();
            let t_own = balanced_parts(block, self.grid.col)[p0].len();
            max_tensor = max_tensor.max(t_own);

            let mut f_own = 0;
            for (k, &p_k) in pk.iter().enumerate() {
                let rows = self.mode_parts[k][p_k].len();
                let cols = self.col_parts[p0].len();
                let group = self.proc_count() / (self.grid.col * self.grid.modes[k]);
                let member = self.member_rank_in_factor_group(&coord, k);
                f_own += balanced_parts(rows * cols, group)[member].len();
            }
            max_factor = max_factor.max(f_own);
        }
        let gamma = if tensor_total > 0.0 {
            (max_tensor as f64 * p / tensor_total).max(1.0)
        } else {
            1.0
        };
        let delta = if factor_total > 0.0 {
            (max_factor as f64 * p / factor_total).max(1.0)
        } else {
            1.0
        };
        (gamma, delta)
    }

    /// Rank of `coord` within its mode-k factor group (processors that
    /// agree with it on the column axis and the mode-k axis).
    fn member_rank_in_factor_group(&self, coord: &[usize], k: usize) -> usize {
        let axes = self.grid.axes();
        let mut rank = 0;
        for (a, (&c, &sz)) in coord.iter().zip(&axes).enumerate() {
            if a == 0 || a == 1 + k {
                continue;
            }
            rank = rank * sz + c;
        }
        rank
    }
}

/// Per-processor counters for one parallel run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProcCounters {
    pub words_sent: u128,
    pub words_received: u128,
    pub additions: u128,
    pub nary_multiplies: u128,
    pub scalar_multiplies: u128,
    /// Largest number of array words simultaneously live on the processor.
    pub peak_words: u128,
}

/// One collective line of an algorithm, aggregated over its simultaneous
/// groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollectiveStat {
    pub label: String,
    pub array: ArrayId,
    pub group_size: usize,
    pub max_sent_per_proc: u128,
    pub total_words: u128,
}

/// Communication ledger for a parallel run: per-processor counters, a
/// per-collective breakdown, and per-array traffic attribution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommLedger {
    pub procs: Vec<ProcCounters>,
    pub collectives: Vec<CollectiveStat>,
    pub array_words: BTreeMap<ArrayId, u128>,
}

impl CommLedger {
    fn new(proc_count: usize, dims: usize, mode: usize) -> Self {
        let mut array_words = BTreeMap::new();
        array_words.insert(ArrayId::Tensor, 0);
        for k in 0..dims {
            if k != mode {
                array_words.insert(ArrayId::Factor(k), 0);
            }
        }
        array_words.insert(ArrayId::Output, 0);
        CommLedger {
            procs: vec![ProcCounters::default(); proc_count],
            collectives: Vec::new(),
            array_words,
        }
    }

    fn charge(&mut self, members: &[usize], deltas: &[TrafficDelta], array: ArrayId) -> (u128, u128) {
        let mut max_sent = 0u128;
        let mut total = 0u128;
        for (&id, d) in members.iter().zip(deltas) {
            let p = &mut self.procs[id];
            p.words_sent += d.sent;
            p.words_received += d.received;
            p.additions += d.additions;
            max_sent = max_sent.max(d.sent);
            total += d.sent;
        }
        *self.array_words.get_mut(&array).unwrap() += total;
        (max_sent, total)
    }

    fn record_collective(
        &mut self,
        label: &str,
        array: ArrayId,
        group_size: usize,
        max_sent: u128,
        total: u128,
    ) {
        if group_size <= 1 {
            return;
        }
        if let Some(s) = self.collectives.iter_mut().find(|s| s.label == label) {
            s.max_sent_per_proc = s.max_sent_per_proc.max(max_sent);
            s.total_words += total;
        } else {
            self.collectives.push(CollectiveStat {
                label: label.to_string(),
                array,
                group_size,
                max_sent_per_proc: max_sent,
                total_words: total,
            });
        }
    }

    pub fn max_words_sent(&self) -> u128 {
        self.procs.iter().map(|p| p.words_sent).max().unwrap_or(0)
    }

    pub fn max_words_sent_plus_received(&self) -> u128 {
        self.procs
            .iter()
            .map(|p| p.words_sent + p.words_received)
            .max()
            .unwrap_or(0)
    }

    pub fn total_sent(&self) -> u128 {
        self.procs.iter().map(|p| p.words_sent).sum()
    }

    pub fn total_received(&self) -> u128 {
        self.procs.iter().map(|p| p.words_received).sum()
    }

    pub fn tensor_words(&self) -> u128 {
        self.array_words[&ArrayId::Tensor]
    }
}

/// How local multiplications are carried out (communication is identical
/// in both modes).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithMode {
    /// Atomic N-ary multiplies, one per iteration-space point.
    Atomic,
    /// Explicit local Khatri-Rao product followed by a matrix multiply.
    KrpMatmul,
}

/// Result of a parallel run: the assembled output matrix and the ledger.
#[derive(Debug, Clone)]
pub struct ParRun {
    pub output: FactorMatrix,
    pub ledger: CommLedger,
}

/// Reduced arithmetic count of the Khatri-Rao + matmul local kernel,
/// `R * prod_k |S_k| * (2 + 1/|S_n|)`, for reporting next to the atomic
/// count `N * R * prod_k |S_k|`.
pub fn local_krp_matmul_flops(local_dims: &[usize], mode: usize, rank: usize) -> f64 {
    let prod: f64 = local_dims.iter().map(|&d| d as f64).product();
    rank as f64 * prod * (2.0 + 1.0 / local_dims[mode] as f64)
}

/// Parallel stationary algorithm: the tensor never moves. Requires a grid
/// with P_0 = 1. Per mode k != n the factor block-rows are All-Gathered
/// within that mode's hyperslices; the local MTTKRP contributions are then
/// Reduce-Scattered within the output mode's hyperslices.
pub fn par_stationary_mttkrp(
    problem: &MttkrpProblem,
    grid: &ProcessorGrid,
    arith: ArithMode,
) -> Result<ParRun> {
    if grid.col != 1 {
        return Err(Error::InfeasiblePlan(
            "stationary algorithm requires P_0 = 1".into(),
        ));
    }
    let dist = DataDistribution::build(problem.dims(), problem.rank, problem.mode, grid)?;
    let n = problem.order();
    let mode = problem.mode;
    let mut ledger = CommLedger::new(dist.proc_count(), n, mode);
    let coords = dist.coords();

    // Gather factor block-rows within each mode hyperslice.
    let mut gathered: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for k in 0..n {
        if k == mode {
            continue;
        }
        let label = format!("all_gather:{}", ArrayId::Factor(k));
        for group in dist.groups_fixing(&[1 + k]) {
            let p_k = coords[group[0]][1 + k];
            let block = factor_block(problem.factor_for_mode(k), &dist.mode_parts[k][p_k], &(0..problem.rank));
            let parts = owned_slices(&block, group.len());
            let (full, deltas) = bucket_all_gather(&parts);
            debug_assert_eq!(full, block);
            let (max_sent, total) = ledger.charge(&group, &deltas, ArrayId::Factor(k));
            ledger.record_collective(&label, ArrayId::Factor(k), group.len(), max_sent, total);
            gathered.insert((k, p_k), full);
        }
    }

    // Local MTTKRP on the owned block against the gathered block-rows.
    let mut contributions: Vec<Vec<f64>> = Vec::with_capacity(dist.proc_count());
    for coord in &coords {
        let pk = &coord[1..];
        let block_ranges: Vec<Range<usize>> = (0..n).map(|k| dist.mode_parts[k][pk[k]].clone()).collect();
        let xb = tensor_block(problem, &block_ranges);
        let local_dims = dist.block_dims(pk);
        let factors: Vec<&[f64]> = (0..n)
            .filter(|&k| k != mode)
            .map(|k| gathered[&(k, pk[k])].as_slice())
            .collect();
        let id = dist.coord_id(coord);
        let c = local_kernel(
            &xb,
            &local_dims,
            mode,
            &factors,
            problem.rank,
            arith,
            &mut ledger.procs[id],
        );
        let live = xb.len() as u128
            + factors.iter().map(|f| f.len() as u128).sum::<u128>()
            + c.len() as u128;
        ledger.procs[id].peak_words = ledger.procs[id].peak_words.max(live);
        contributions.push(c);
    }

    // Reduce-Scatter the contributions within each output hyperslice.
    let mut output = FactorMatrix::zeros(problem.output_rows(), problem.rank);
    let label = "reduce_scatter:output".to_string();
    for group in dist.groups_fixing(&[1 + mode]) {
        let p_n = coords[group[0]][1 + mode];
        let rows = dist.mode_parts[mode][p_n].clone();
        let arrays: Vec<Vec<f64>> = group.iter().map(|&id| contributions[id].clone()).collect();
        let chunks = balanced_parts(rows.len() * problem.rank, group.len());
        let (results, deltas) = bucket_reduce_scatter(&arrays, &chunks)?;
        let (max_sent, total) = ledger.charge(&group, &deltas, ArrayId::Output);
        ledger.record_collective(&label, ArrayId::Output, group.len(), max_sent, total);
        scatter_into_output(&mut output, &rows, &(0..problem.rank), &chunks, &results);
    }

    debug_assert_eq!(ledger.total_sent(), ledger.total_received());
    Ok(ParRun { output, ledger })
}

/// Parallel general algorithm: also parallelizes the rank dimension.
/// Tensor blocks are All-Gathered along the column axis first; factor
/// gathers and the output Reduce-Scatter then run within the smaller
/// hyperslices that agree on the column coordinate.
pub fn par_general_mttkrp(
    problem: &MttkrpProblem,
    grid: &ProcessorGrid,
    arith: ArithMode,
) -> Result<ParRun> {
    let dist = DataDistribution::build(problem.dims(), problem.rank, problem.mode, grid)?;
    let n = problem.order();
    let mode = problem.mode;
    let mut ledger = CommLedger::new(dist.proc_count(), n, mode);
    let coords = dist.coords();

    // Gather tensor blocks along the column-axis fibers.
    let mut blocks: BTreeMap<Vec<usize>, Vec<f64>> = BTreeMap::new();
    let fiber_axes: Vec<usize> = (1..=n).collect();
    for group in dist.groups_fixing(&fiber_axes) {
        let pk: Vec<usize> = coords[group[0]][1..].to_vec();
        let block_ranges: Vec<Range<usize>> = (0..n).map(|k| dist.mode_parts[k][pk[k]].clone()).collect();
        let block = tensor_block(problem, &block_ranges);
        let parts = owned_slices(&block, group.len());
        let (full, deltas) = bucket_all_gather(&parts);
        debug_assert_eq!(full, block);
        let (max_sent, total) = ledger.charge(&group, &deltas, ArrayId::Tensor);
        ledger.record_collective("all_gather:tensor", ArrayId::Tensor, group.len(), max_sent, total);
        blocks.insert(pk, full);
    }

    // Gather factor blocks within each (column, mode-k) hyperslice.
    let mut gathered: BTreeMap<(usize, usize, usize), Vec<f64>> = BTreeMap::new();
    for k in 0..n {
        if k == mode {
            continue;
        }
        let label = format!("all_gather:{}", ArrayId::Factor(k));
        for group in dist.groups_fixing(&[0, 1 + k]) {
            let p0 = coords[group[0]][0];
            let p_k = coords[group[0]][1 + k];
            let block = factor_block(
                problem.factor_for_mode(k),
                &dist.mode_parts[k][p_k],
                &dist.col_parts[p0],
            );
            let parts = owned_slices(&block, group.len());
            let (full, deltas) = bucket_all_gather(&parts);
            debug_assert_eq!(full, block);
            let (max_sent, total) = ledger.charge(&group, &deltas, ArrayId::Factor(k));
            ledger.record_collective(&label, ArrayId::Factor(k), group.len(), max_sent, total);
            gathered.insert((k, p_k, p0), full);
        }
    }

    // Local MTTKRP over the owned column range.
    let mut contributions: Vec<Vec<f64>> = Vec::with_capacity(dist.proc_count());
    for coord in &coords {
        let (p0, pk) = (coord[0], &coord[1..]);
        let xb = &blocks[&pk.to_vec()];
        let local_dims = dist.block_dims(pk);
        let cols = dist.col_parts[p0].len();
        let factors: Vec<&[f64]> = (0..n)
            .filter(|&k| k != mode)
            .map(|k| gathered[&(k, pk[k], p0)].as_slice())
            .collect();
        let id = dist.coord_id(coord);
        let c = local_kernel(
            xb,
            &local_dims,
            mode,
            &factors,
            cols,
            arith,
            &mut ledger.procs[id],
        );
        let live = xb.len() as u128
            + factors.iter().map(|f| f.len() as u128).sum::<u128>()
            + c.len() as u128;
        ledger.procs[id].peak_words = ledger.procs[id].peak_words.max(live);
        contributions.push(c);
    }

    // Reduce-Scatter within each (column, output-mode) hyperslice.
    let mut output = FactorMatrix::zeros(problem.output_rows(), problem.rank);
    for group in dist.groups_fixing(&[0, 1 + mode]) {
        let p0 = coords[group[0]][0];
        let p_n = coords[group[0]][1 + mode];
        let rows = dist.mode_parts[mode][p_n].clone();
        let cols = dist.col_parts[p0].clone();
        let arrays: Vec<Vec<f64>> = group.iter().map(|&id| contributions[id].clone()).collect();
        let chunks = balanced_parts(rows.len() * cols.len(), group.len());
        let (results, deltas) = bucket_reduce_scatter(&arrays, &chunks)?;
        let (max_sent, total) = ledger.charge(&group, &deltas, ArrayId::Output);
        ledger.record_collective("reduce_scatter:output", ArrayId::Output, group.len(), max_sent, total);
        scatter_into_output(&mut output, &rows, &cols, &chunks, &results);
    }

    debug_assert_eq!(ledger.total_sent(), ledger.total_received());
    Ok(ParRun { output, ledger })
}

/// Extracts a tensor block in local generalized column-major order.
fn tensor_block(problem: &MttkrpProblem, ranges: &[Range<usize>]) -> Vec<f64> {
    let lens: Vec<usize> = ranges.iter().map(|r| r.len()).collect();
    let total: usize = lens.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut idx = vec![0usize; ranges.len()];
    for flat in 0..total {
        let mut rem = flat;
        for (k, r) in ranges.iter().enumerate() {
            idx[k] = r.start + rem % lens[k];
            rem /= lens[k];
        }
        out.push(problem.tensor.at(&idx));
    }
    out
}

/// Extracts a factor block in local row-major order.
fn factor_block(f: &FactorMatrix, rows: &Range<usize>, cols: &Range<usize>) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows.len() * cols.len());
    for i in rows.clone() {
        for c in cols.clone() {
            out.push(f.at(i, c));
        }
    }
    out
}

/// The balanced contiguous chunks of `block` owned by a q-member group.
fn owned_slices(block: &[f64], q: usize) -> Vec<Vec<f64>> {
    balanced_parts(block.len(), q)
        .into_iter()
        .map(|r| block[r].to_vec())
        .collect()
}

/// Writes reduce-scatter results (chunks of the row-major `rows x cols`
/// block) into the global output matrix.
fn scatter_into_output(
    output: &mut FactorMatrix,
    rows: &Range<usize>,
    cols: &Range<usize>,
    chunks: &[Range<usize>],
    results: &[Vec<f64>],
) {
    let width = cols.len();
    for (chunk, values) in chunks.iter().zip(results) {
        for (off, v) in chunk.clone().zip(values) {
            let row = rows.start + off / width;
            let col = cols.start + off % width;
            output.set(row, col, *v);
        }
    }
}

/// Local MTTKRP contribution: a row-major `|S_n| x cols` matrix. The
/// atomic mode evaluates one N-ary multiply per iteration point; the
/// Khatri-Rao mode forms the local KRP column explicitly and multiplies.
fn local_kernel(
    xb: &[f64],
    local_dims: &[usize],
    mode: usize,
    factors: &[&[f64]],
    cols: usize,
    arith: ArithMode,
    counters: &mut ProcCounters,
) -> Vec<f64> {
    let out_rows = local_dims[mode];
    let mut c = vec![0.0; out_rows * cols];
    let inputs: Vec<usize> = (0..local_dims.len()).filter(|&k| k != mode).collect();
    match arith {
        ArithMode::Atomic => {
            let lo = vec![0usize; local_dims.len()];
            let mut narys = 0u128;
            for_each_lex(&lo, local_dims, |idx| {
                let x = xb[flat_index(local_dims, idx)];
                for r in 0..cols {
                    let mut prod = x;
                    for (fi, &k) in inputs.iter().enumerate() {
                        prod *= factors[fi][idx[k] * cols + r];
                    }
                    c[idx[mode] * cols + r] += prod;
                }
                narys += cols as u128;
            });
            counters.nary_multiplies += narys;
            counters.additions += narys;
        }
        ArithMode::KrpMatmul => {
            let reduced: Vec<usize> = inputs.iter().map(|&k| local_dims[k]).collect();
            let rlo = vec![0usize; reduced.len()];
            for r in 0..cols {
                // nested Khatri-Rao column: ascending input-mode order,
                // last mode fastest
                let mut krp: Vec<f64> = vec![1.0];
                for (fi, &rd) in reduced.iter().enumerate() {
                    let mut next = Vec::with_capacity(krp.len() * rd);
                    for &e in &krp {
                        for i in 0..rd {
                            next.push(e * factors[fi][i * cols + r]);
                        }
                    }
                    if fi > 0 {
                        counters.scalar_multiplies += next.len() as u128;
                    }
                    krp = next;
                }
                let mut idx = vec![0usize; local_dims.len()];
                for i_n in 0..out_rows {
                    idx[mode] = i_n;
                    let mut j = 0;
                    let mut acc = c[i_n * cols + r];
                    for_each_lex(&rlo, &reduced, |red| {
                        for (pos, &k) in inputs.iter().enumerate() {
                            idx[k] = red[pos];
                        }
                        acc += xb[flat_index(local_dims, &idx)] * krp[j];
                        j += 1;
                    });
                    c[i_n * cols + r] = acc;
                    counters.scalar_multiplies += j as u128;
                    counters.additions += j as u128;
                }
            }
        }
    }
    c
}
