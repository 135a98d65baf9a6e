//! Two-level sequential memory machine: a fast memory of `M` words in
//! front of unbounded slow memory. The machine audits the instruction
//! stream an algorithm declares (loads, dirty/clean evictions, arithmetic)
//! rather than modeling any replacement policy; eviction is always
//! algorithm-directed.
//!
//! Addresses are symbolic: an array identifier plus the element's flat
//! offset within that array. Loading an already-resident address or
//! evicting a non-resident one is treated as a driver bug.

use crate::error::{Error, Result};
use crate::tensor::MttkrpProblem;

/// Identifies one of the arrays touched by an MTTKRP instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ArrayId {
    Tensor,
    /// Input factor matrix of the given (0-based) mode.
    Factor(usize),
    /// The output matrix being accumulated.
    Output,
}

impl std::fmt::Display for ArrayId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ArrayId::Tensor => write!(f, "tensor"),
            ArrayId::Factor(k) => write!(f, "factor{}", k + 1),
            ArrayId::Output => write!(f, "output"),
        }
    }
}

/// Symbolic address: array plus flat element offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Address {
    pub array: ArrayId,
    pub offset: usize,
}

impl Address {
    pub fn tensor(offset: usize) -> Self {
        Address { array: ArrayId::Tensor, offset }
    }

    pub fn factor(mode: usize, offset: usize) -> Self {
        Address { array: ArrayId::Factor(mode), offset }
    }

    pub fn output(offset: usize) -> Self {
        Address { array: ArrayId::Output, offset }
    }
}

/// Non-decreasing counters for one sequential run. 128-bit so large
/// parameter sweeps cannot overflow.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CostLedger {
    pub loads: u128,
    pub stores: u128,
    pub nary_multiplies: u128,
    pub additions: u128,
}

impl CostLedger {
    pub fn words_moved(&self) -> u128 {
        self.loads + self.stores
    }
}

/// Serializes a ledger as the CSV row `alg,N,dims,R,M,b,loads,stores,nary,adds`.
/// `dims` are joined with `x`; `block` is empty for the unblocked algorithm.
pub fn ledger_csv_row(
    alg: &str,
    dims: &[usize],
    rank: usize,
    memory: usize,
    block: Option<usize>,
    ledger: &CostLedger,
) -> String {
    let dims_s = dims
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("x");
    let block_s = block.map(|b| b.to_string()).unwrap_or_default();
    format!(
        "{alg},{n},{dims_s},{rank},{memory},{block_s},{loads},{stores},{nary},{adds}",
        n = dims.len(),
        loads = ledger.loads,
        stores = ledger.stores,
        nary = ledger.nary_multiplies,
        adds = ledger.additions,
    )
}

/// Header matching [`ledger_csv_row`].
pub const LEDGER_CSV_HEADER: &str = "alg,N,dims,R,M,b,loads,stores,nary,adds";

/// The machine itself. Residency is tracked per address in a dense bit
/// arena (one bit per array element) so that full instruction traces of
/// multi-million-entry tensors stay cheap to audit.
#[derive(Debug, Clone)]
pub struct MemoryMachine {
    capacity: usize,
    n_modes: usize,
    /// arena base offset per slot: 0 = tensor, 1..=N = factors, N+1 = output
    bases: Vec<usize>,
    bits: Vec<u64>,
    /// Addresses whose first touch was covered by warm start.
    warm_bits: Vec<u64>,
    resident: usize,
    /// Remaining free first-touch loads when warm start is enabled.
    warm_left: usize,
    ledger: CostLedger,
}

impl MemoryMachine {
    /// Machine sized for `problem`. `factor_lens[mode]` is zero since the
    /// target mode has no input factor.
    pub fn for_problem(problem: &MttkrpProblem, capacity: usize) -> Self {
        let n = problem.order();
        let mut lens = vec![0usize; n + 2];
        lens[0] = problem.tensor.len();
        for &k in &problem.input_modes() {
            lens[1 + k] = problem.factor_for_mode(k).values().len();
        }
        lens[n + 1] = problem.output_rows() * problem.rank;
        Self::with_spaces(capacity, n, &lens)
    }

    /// Machine over a single anonymous array of `cells` tensor addresses.
    pub fn simple(capacity: usize, cells: usize) -> Self {
        Self::with_spaces(capacity, 0, &[cells, 0])
    }

    fn with_spaces(capacity: usize, n_modes: usize, lens: &[usize]) -> Self {
        let mut bases = Vec::with_capacity(lens.len() + 1);
        let mut total = 0usize;
        for &l in lens {
            bases.push(total);
            total += l;
        }
        bases.push(total);
        MemoryMachine {
            capacity,
            n_modes,
            bases,
            bits: vec![0u64; total.div_ceil(64)],
            warm_bits: vec![0u64; total.div_ceil(64)],
            resident: 0,
            warm_left: 0,
            ledger: CostLedger::default(),
        }
    }

    /// Pre-populate fast memory: the first touch of each of the first `M`
    /// distinct addresses loaded is not counted, modeling inputs that
    /// begin resident. Reloads after an eviction count normally. This is
    /// the load-side half of the 2M allowance the trivial lower bound
    /// grants; stores remain explicit instructions and are always counted.
    pub fn enable_warm_start(&mut self) {
        self.warm_left = self.capacity;
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn resident_words(&self) -> usize {
        self.resident
    }

    pub fn ledger(&self) -> &CostLedger {
        &self.ledger
    }

    pub fn count_nary_multiply(&mut self) {
        self.ledger.nary_multiplies += 1;
    }

    pub fn count_addition(&mut self) {
        self.ledger.additions += 1;
    }

    /// Bulk arithmetic accounting for inner loops that know their trip
    /// counts up front.
    pub fn count_arith(&mut self, nary_multiplies: u128, additions: u128) {
        self.ledger.nary_multiplies += nary_multiplies;
        self.ledger.additions += additions;
    }

    fn slot(&self, array: ArrayId) -> usize {
        match array {
            ArrayId::Tensor => 0,
            ArrayId::Factor(k) => {
                assert!(k < self.n_modes, "factor mode out of range");
                1 + k
            }
            ArrayId::Output => 1 + self.n_modes,
        }
    }

    fn bit_index(&self, addr: Address) -> Result<usize> {
        let s = self.slot(addr.array);
        let base = self.bases[s];
        let end = self.bases[s + 1];
        let idx = base + addr.offset;
        if idx >= end {
            return Err(Error::SimulatorBug(format!(
                "address {}[{}] out of range",
                addr.array, addr.offset
            )));
        }
        Ok(idx)
    }

    fn is_set(&self, bit: usize) -> bool {
        self.bits[bit / 64] >> (bit % 64) & 1 == 1
    }

    /// Load one word from slow memory into fast memory.
    pub fn load(&mut self, addr: Address) -> Result<()> {
        let bit = self.bit_index(addr)?;
        if self.is_set(bit) {
            return Err(Error::SimulatorBug(format!(
                "load of already-resident address {}[{}]",
                addr.array, addr.offset
            )));
        }
        if self.resident >= self.capacity {
            return Err(Error::CapacityViolation(format!(
                "load of {}[{}] with all {} fast-memory words occupied",
                addr.array, addr.offset, self.capacity
            )));
        }
        self.bits[bit / 64] |= 1 << (bit % 64);
        self.resident += 1;
        let warm_seen = self.warm_bits[bit / 64] >> (bit % 64) & 1 == 1;
        if self.warm_left > 0 && !warm_seen {
            self.warm_bits[bit / 64] |= 1 << (bit % 64);
            self.warm_left -= 1;
        } else {
            self.ledger.loads += 1;
        }
        Ok(())
    }

    /// Remove a word from fast memory; a dirty eviction writes it back to
    /// slow memory and counts as a store.
    pub fn evict(&mut self, addr: Address, dirty: bool) -> Result<()> {
        let bit = self.bit_index(addr)?;
        if !self.is_set(bit) {
            return Err(Error::SimulatorBug(format!(
                "evict of non-resident address {}[{}]",
                addr.array, addr.offset
            )));
        }
        self.bits[bit / 64] &= !(1 << (bit % 64));
        self.resident -= 1;
        if dirty {
            self.ledger.stores += 1;
        }
        Ok(())
    }
}
