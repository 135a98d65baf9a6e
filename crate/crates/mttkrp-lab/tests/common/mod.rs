//! Shared oracles for the integration and acceptance suites. Everything
//! here recomputes expected values independently of the library code
//! paths it checks: a double-double evaluator for the bound formulas, a
//! simplex solver for the exponent program, composition-grid searches for
//! the constrained optima, and a per-entry brute-force MTTKRP.

// each test binary links this module and uses its own subset
#![allow(dead_code)]

pub mod dd;
pub mod simplex;

use dd::Dd;
use mttkrp_lab::tensor::{FactorMatrix, LexIndices, MttkrpProblem, Xorshift64Star};

/// Brute-force MTTKRP: one accumulator per output entry, summed over the
/// reduced index space. Deliberately structured differently from the
/// library's reference (which streams the full iteration space).
pub fn brute_force_mttkrp(p: &MttkrpProblem) -> FactorMatrix {
    let mut out = FactorMatrix::zeros(p.output_rows(), p.rank);
    let reduced: Vec<usize> = p
        .dims()
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != p.mode)
        .map(|(_, &d)| d)
        .collect();
    for i_n in 0..p.output_rows() {
        for r in 0..p.rank {
            let mut acc = 0.0;
            for red in LexIndices::over(&reduced) {
                let mut idx = Vec::with_capacity(p.order());
                let mut j = 0;
                for k in 0..p.order() {
                    if k == p.mode {
                        idx.push(i_n);
                    } else {
                        idx.push(red[j]);
                        j += 1;
                    }
                }
                let mut term = p.tensor.at(&idx);
                for k in 0..p.order() {
                    if k != p.mode {
                        term *= p.factor_for_mode(k).at(idx[k], r);
                    }
                }
                acc += term;
            }
            out.set(i_n, r, acc);
        }
    }
    out
}

/// `N I R (3M)^(1/N) / (9M) - M` in double-double arithmetic.
pub fn dd_seq_memdep(n: u32, tensor_elems: u128, rank: u64, memory: u128) -> f64 {
    let nir = Dd::from_u128(tensor_elems)
        .mul(Dd::from_u128(rank as u128))
        .mul(Dd::from_f64(n as f64));
    let m = Dd::from_u128(memory);
    let root = Dd::from_f64(3.0).mul(m).nth_root(n);
    nir.mul(root)
        .div(Dd::from_f64(9.0).mul(m))
        .sub(m)
        .to_f64()
}

/// `2 (NIR/P)^(N/(2N-1)) - I/P - (sum_k I_k R)/P` in double-double
/// arithmetic (gamma = delta = 1).
pub fn dd_par_memind_general(dims: &[u64], rank: u64, procs: u128) -> f64 {
    let n = dims.len() as u32;
    let i: u128 = dims.iter().map(|&d| d as u128).product();
    let sum_ir: u128 = dims.iter().map(|&d| d as u128 * rank as u128).sum();
    let p = Dd::from_u128(procs);
    let base = Dd::from_u128(i)
        .mul(Dd::from_u128(rank as u128))
        .mul(Dd::from_f64(n as f64))
        .div(p);
    // base^(N/(2N-1)) = (base^N)^(1/(2N-1))
    let powered = base.powi(n).nth_root(2 * n - 1);
    Dd::from_f64(2.0)
        .mul(powered)
        .sub(Dd::from_u128(i).div(p))
        .sub(Dd::from_u128(sum_ir).div(p))
        .to_f64()
}

/// Both branches of the rectangular bound in double-double arithmetic
/// (gamma = delta = 1): `sqrt(2/3) N R (I/P)^(1/N) - (sum I_k R)/P` and
/// `I / (2P)`.
pub fn dd_par_memind_rect(dims: &[u64], rank: u64, procs: u128) -> (f64, f64) {
    let n = dims.len() as u32;
    let i: u128 = dims.iter().map(|&d| d as u128).product();
    let sum_ir: u128 = dims.iter().map(|&d| d as u128 * rank as u128).sum();
    let p = Dd::from_u128(procs);
    let coeff = Dd::from_f64(2.0).div(Dd::from_f64(3.0)).nth_root(2);
    let factor_branch = coeff
        .mul(Dd::from_f64(n as f64))
        .mul(Dd::from_u128(rank as u128))
        .mul(Dd::from_u128(i).div(p).nth_root(n))
        .sub(Dd::from_u128(sum_ir).div(p))
        .to_f64();
    let tensor_branch = Dd::from_u128(i)
        .div(Dd::from_f64(2.0).mul(p))
        .to_f64();
    (factor_branch, tensor_branch)
}

/// Constraint system of the projection-exponent program, built from the
/// loop-nest structure directly: index i < N is kept by factor i and the
/// tensor; the column index is kept by every factor.
pub fn exponent_program(n: usize) -> (Vec<f64>, Vec<Vec<f64>>, Vec<f64>) {
    let d = n + 1;
    let mut a = vec![vec![0.0; d]; d];
    for i in 0..n {
        a[i][i] = 1.0; // factor i keeps index i
        a[i][n] = 1.0; // tensor keeps every mode index
    }
    for j in 0..n {
        a[n][j] = 1.0; // every factor keeps the column index
    }
    (vec![1.0; d], a, vec![1.0; d])
}

/// Lattice max of `prod x^s` over `sum x = c`: compositions `x = c a / G`.
pub fn grid_max_product(s: &[f64], c: f64, min_samples: usize) -> (f64, usize) {
    let m = s.len();
    let g = granularity(m, min_samples);
    let mut best = f64::NEG_INFINITY;
    let mut count = 0;
    for comp in compositions(g, m) {
        let mut v = 1.0;
        for (ai, si) in comp.iter().zip(s) {
            v *= (c * *ai as f64 / g as f64).powf(*si);
        }
        best = best.max(v);
        count += 1;
    }
    (best, count)
}

/// Lattice min of `sum x` over `prod x^s >= c`: interior direction grid,
/// each direction scaled onto the constraint surface.
pub fn grid_min_sum(s: &[f64], c: f64, min_samples: usize) -> (f64, usize) {
    let m = s.len();
    let g = granularity(m, min_samples) + m as u64;
    let total: f64 = s.iter().sum();
    let mut best = f64::INFINITY;
    let mut count = 0;
    for mut comp in compositions(g - m as u64, m) {
        for a in comp.iter_mut() {
            *a += 1; // strictly interior directions
        }
        let mut prod = 1.0;
        for (ai, si) in comp.iter().zip(s) {
            prod *= (*ai as f64).powf(*si);
        }
        let lambda = (c / prod).powf(1.0 / total);
        let sum: f64 = comp.iter().map(|&a| a as f64).sum::<f64>() * lambda;
        best = best.min(sum);
        count += 1;
    }
    (best, count)
}

fn granularity(m: usize, min_samples: usize) -> u64 {
    let mut g = m as u64;
    while n_compositions(g, m) < min_samples as u64 {
        g += 1;
    }
    g
}

fn n_compositions(g: u64, m: usize) -> u64 {
    // C(g + m - 1, m - 1), small enough to compute directly
    let mut v = 1u64;
    for i in 0..(m as u64 - 1) {
        v = v * (g + i + 1) / (i + 1);
    }
    v
}

/// All weak compositions of `g` into `m` parts.
pub fn compositions(g: u64, m: usize) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    let mut cur = vec![0u64; m];
    fn rec(out: &mut Vec<Vec<u64>>, cur: &mut Vec<u64>, level: usize, left: u64) {
        if level + 1 == cur.len() {
            cur[level] = left;
            out.push(cur.clone());
            return;
        }
        for v in 0..=left {
            cur[level] = v;
            rec(out, cur, level + 1, left - v);
        }
    }
    rec(&mut out, &mut cur, 0, g);
    out
}

/// Random subset of the box `[side]^d`, each point kept with probability
/// ~1/2, plus a guaranteed first point.
pub fn random_box_subset(side: i64, d: usize, rng: &mut Xorshift64Star) -> Vec<Vec<i64>> {
    let mut points = Vec::new();
    let total = (side as u64).pow(d as u32);
    for flat in 0..total {
        if rng.next_u64() & 1 == 0 {
            let mut p = Vec::with_capacity(d);
            let mut rem = flat;
            for _ in 0..d {
                p.push((rem % side as u64) as i64);
                rem /= side as u64;
            }
            points.push(p);
        }
    }
    if points.is_empty() {
        points.push(vec![0; d]);
    }
    points
}
