//! The direct-summation MTTKRP reference and the two sequential
//! algorithms, expressed as full instruction traces against the memory
//! machine.
//!
//! The reference and the unblocked algorithm iterate multi-indices
//! `(i_1,...,i_N)` lexicographically with the column index innermost, so
//! they produce bit-identical results. The blocked algorithm re-associates
//! the summation per block and is compared with a tolerance.

use crate::error::{Error, Result};
use crate::memmodel::{Address, CostLedger, MemoryMachine};
use crate::tensor::{for_each_lex, lex_advance, FactorMatrix, MttkrpProblem};

/// Input factor views resolved once per run so the inner loops do plain
/// slice arithmetic: `(mode, values, columns)` in ascending mode order.
fn factor_views(problem: &MttkrpProblem) -> Vec<(usize, &[f64], usize)> {
    problem
        .input_modes()
        .iter()
        .map(|&k| {
            let f = problem.factor_for_mode(k);
            (k, f.values(), f.cols())
        })
        .collect()
}

/// One atomic N-ary multiply: the tensor entry times the input factor
/// entries in column `r`, multiplied left to right in ascending mode
/// order.
#[inline]
fn nary_multiply(x: f64, factors: &[(usize, &[f64], usize)], idx: &[usize], r: usize) -> f64 {
    let mut prod = x;
    for &(k, values, cols) in factors {
        prod *= values[idx[k] * cols + r];
    }
    prod
}

/// Direct summation in a fixed order; the semantic reference for every
/// other implementation in the crate.
pub fn mttkrp_oracle(problem: &MttkrpProblem) -> FactorMatrix {
    let mut out = FactorMatrix::zeros(problem.output_rows(), problem.rank);
    let factors = factor_views(problem);
    let dims = problem.dims();
    let mode = problem.mode;
    for_each_lex(&vec![0; dims.len()], dims, |idx| {
        let x = problem.tensor.at(idx);
        for r in 0..problem.rank {
            out.add(idx[mode], r, nary_multiply(x, &factors, idx, r));
        }
    });
    out
}

/// Sequential unblocked algorithm: one load per operand per use, output
/// element loaded and stored once per (i, r) iteration. Requires
/// `M >= N + 2` so an N-ary multiply's operands and its output element
/// are all simultaneously resident.
pub fn mttkrp_seq_unblocked(
    problem: &MttkrpProblem,
    machine: &mut MemoryMachine,
) -> Result<(FactorMatrix, CostLedger)> {
    let n = problem.order();
    if machine.capacity() < n + 2 {
        return Err(Error::InfeasibleMachine(format!(
            "capacity {} below N + 2 = {}",
            machine.capacity(),
            n + 2
        )));
    }
    let factors = factor_views(problem);
    let mode = problem.mode;
    let dims = problem.dims().to_vec();
    let lo = vec![0usize; dims.len()];
    let mut out = FactorMatrix::zeros(problem.output_rows(), problem.rank);
    let mut idx = lo.clone();
    loop {
        let t_addr = Address::tensor(problem.tensor.flat(&idx));
        machine.load(t_addr)?;
        let x = problem.tensor.values()[t_addr.offset];
        for r in 0..problem.rank {
            for &(k, _, cols) in &factors {
                machine.load(Address::factor(k, idx[k] * cols + r))?;
            }
            let b_off = out.offset(idx[mode], r);
            machine.load(Address::output(b_off))?;
            out.add(idx[mode], r, nary_multiply(x, &factors, &idx, r));
            machine.count_nary_multiply();
            machine.count_addition();
            machine.evict(Address::output(b_off), true)?;
            for &(k, _, cols) in &factors {
                machine.evict(Address::factor(k, idx[k] * cols + r), false)?;
            }
        }
        machine.evict(t_addr, false)?;
        if !lex_advance(&mut idx, &lo, &dims) {
            break;
        }
    }
    Ok((out, machine.ledger().clone()))
}

/// Sequential blocked algorithm with block size `b`: loads a `b^N`
/// subtensor once, then for each column streams the touched subvectors of
/// the factor matrices and of the output.
pub fn mttkrp_seq_blocked(
    problem: &MttkrpProblem,
    machine: &mut MemoryMachine,
    b: usize,
) -> Result<(FactorMatrix, CostLedger)> {
    let n = problem.order();
    check_block_size(n, machine.capacity(), b)?;
    let factors = factor_views(problem);
    let mode = problem.mode;
    let dims = problem.dims().to_vec();
    let mut out = FactorMatrix::zeros(problem.output_rows(), problem.rank);
    let tensor = problem.tensor.values();
    let strides: Vec<usize> = {
        let mut s = Vec::with_capacity(n);
        let mut acc = 1;
        for &d in &dims {
            s.push(acc);
            acc *= d;
        }
        s
    };

    let grid: Vec<usize> = dims.iter().map(|&d| d.div_ceil(b)).collect();
    let gzero = vec![0usize; n];
    let mut origin = gzero.clone();
    // Per block point: tensor flat index, output row base, one factor row
    // base per input mode. Walking the block once per block instead of
    // once per column keeps large sweeps cheap.
    let point_width = 2 + factors.len();
    let mut points: Vec<usize> = Vec::new();
    loop {
        let lo: Vec<usize> = origin.iter().map(|&j| j * b).collect();
        let hi: Vec<usize> = lo
            .iter()
            .zip(&dims)
            .map(|(&l, &d)| (l + b).min(d))
            .collect();
        let block_len: usize = lo.iter().zip(&hi).map(|(&l, &h)| h - l).product();

        points.clear();
        let mut idx = lo.clone();
        loop {
            let flat: usize = idx.iter().zip(&strides).map(|(&i, &s)| i * s).sum();
            machine.load(Address::tensor(flat))?;
            points.push(flat);
            points.push(idx[mode] * problem.rank);
            for &(k, _, cols) in &factors {
                points.push(idx[k] * cols);
            }
            if !lex_advance(&mut idx, &lo, &hi) {
                break;
            }
        }
        for r in 0..problem.rank {
            for &(k, _, cols) in &factors {
                for i in lo[k]..hi[k] {
                    machine.load(Address::factor(k, i * cols + r))?;
                }
            }
            for i in lo[mode]..hi[mode] {
                machine.load(Address::output(out.offset(i, r)))?;
            }
            let out_values = out.values_mut();
            for point in points.chunks_exact(point_width) {
                let mut prod = tensor[point[0]];
                for (fi, &(_, values, _)) in factors.iter().enumerate() {
                    prod *= values[point[2 + fi] + r];
                }
                out_values[point[1] + r] += prod;
            }
            machine.count_arith(block_len as u128, block_len as u128);
            for i in lo[mode]..hi[mode] {
                machine.evict(Address::output(out.offset(i, r)), true)?;
            }
            for &(k, _, cols) in &factors {
                for i in lo[k]..hi[k] {
                    machine.evict(Address::factor(k, i * cols + r), false)?;
                }
            }
        }
        for point in points.chunks_exact(point_width) {
            machine.evict(Address::tensor(point[0]), false)?;
        }
        if !lex_advance(&mut origin, &gzero, &grid) {
            break;
        }
    }
    Ok((out, machine.ledger().clone()))
}

/// Verifies `b^N + N*b <= M`.
pub fn check_block_size(n: usize, capacity: usize, b: usize) -> Result<()> {
    if b == 0 {
        return Err(Error::InfeasibleBlock("block size must be positive".into()));
    }
    let need = block_footprint(n, b);
    if need > capacity as u128 {
        return Err(Error::InfeasibleBlock(format!(
            "b = {b} needs b^N + N*b = {need} words, capacity is {capacity}"
        )));
    }
    Ok(())
}

/// `b^N + N*b`, saturating on overflow.
pub fn block_footprint(n: usize, b: usize) -> u128 {
    let bn = (b as u128)
        .checked_pow(n as u32)
        .unwrap_or(u128::MAX);
    bn.saturating_add(n as u128 * b as u128)
}

/// Exact load+store count of the unblocked algorithm: `I + I*R*(N+1)`.
pub fn unblocked_word_count(dims: &[usize], rank: usize) -> u128 {
    let i: u128 = dims.iter().map(|&d| d as u128).product();
    i + i * rank as u128 * (dims.len() as u128 + 1)
}

/// Exact load+store count of the blocked algorithm: per block, the block
/// itself plus per column the touched input subvectors and the output
/// subvector twice.
pub fn blocked_word_count_exact(dims: &[usize], rank: usize, mode: usize, b: usize) -> u128 {
    let grid: Vec<usize> = dims.iter().map(|&d| d.div_ceil(b)).collect();
    let mut total = 0u128;
    for_each_lex(&vec![0; dims.len()], &grid, |origin| {
        let lens: Vec<u128> = origin
            .iter()
            .zip(dims)
            .map(|(&j, &d)| ((j * b + b).min(d) - j * b) as u128)
            .collect();
        let block: u128 = lens.iter().product();
        // every subvector loaded once, the output subvector also stored
        let per_rank: u128 = lens.iter().sum::<u128>() + lens[mode];
        total += block + rank as u128 * per_rank;
    });
    total
}

/// Upper-bound form `I + prod_k ceil(I_k/b) * R * (N+1) * b`; equals the
/// exact count when `b` divides every dimension.
pub fn blocked_word_count_ceil(dims: &[usize], rank: usize, b: usize) -> u128 {
    let i: u128 = dims.iter().map(|&d| d as u128).product();
    let blocks: u128 = dims.iter().map(|&d| d.div_ceil(b) as u128).product();
    i + blocks * rank as u128 * (dims.len() as u128 + 1) * b as u128
}
