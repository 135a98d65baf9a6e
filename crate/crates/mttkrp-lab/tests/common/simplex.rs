//! Dense two-phase simplex for tiny linear programs:
//! `min c.x  subject to  A x >= b, x >= 0` with `b >= 0`.
//! Bland's rule throughout, so it cannot cycle. Built for the
//! projection-exponent programs (about a dozen variables).

pub fn solve_min(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Option<(Vec<f64>, f64)> {
    let n = c.len();
    let m = b.len();
    assert!(a.len() == m && a.iter().all(|row| row.len() == n));
    assert!(b.iter().all(|&v| v >= 0.0));
    let cols = n + 2 * m; // x, surplus, artificial
    let mut t = vec![vec![0.0; cols + 1]; m];
    for i in 0..m {
        t[i][..n].copy_from_slice(&a[i]);
        t[i][n + i] = -1.0;
        t[i][n + m + i] = 1.0;
        t[i][cols] = b[i];
    }
    let mut basis: Vec<usize> = (0..m).map(|i| n + m + i).collect();

    // phase 1: drive out the artificials
    let mut phase1 = vec![0.0; cols];
    for j in n + m..cols {
        phase1[j] = 1.0;
    }
    optimize(&mut t, &mut basis, &phase1, cols)?;
    let infeasibility: f64 = basis
        .iter()
        .zip(&t)
        .map(|(&bv, row)| if bv >= n + m { row[cols] } else { 0.0 })
        .sum();
    if infeasibility > 1e-7 {
        return None;
    }

    // phase 2: original objective, artificial columns barred
    let mut phase2 = vec![0.0; cols];
    phase2[..n].copy_from_slice(c);
    optimize(&mut t, &mut basis, &phase2, n + m)?;

    let mut x = vec![0.0; n];
    for (i, &bv) in basis.iter().enumerate() {
        if bv < n {
            x[bv] = t[i][cols];
        }
    }
    let obj = x.iter().zip(c).map(|(xi, ci)| xi * ci).sum();
    Some((x, obj))
}

/// Simplex iterations over the first `usable` columns; returns None on an
/// unbounded direction.
fn optimize(
    t: &mut [Vec<f64>],
    basis: &mut [usize],
    cost: &[f64],
    usable: usize,
) -> Option<()> {
    let m = t.len();
    let cols = cost.len();
    loop {
        let mut entering = None;
        for j in 0..usable {
            let mut reduced = cost[j];
            for i in 0..m {
                reduced -= cost[basis[i]] * t[i][j];
            }
            if reduced < -1e-9 {
                entering = Some(j); // Bland: lowest index
                break;
            }
        }
        let Some(j) = entering else { return Some(()) };

        let mut leaving: Option<usize> = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            if t[i][j] > 1e-12 {
                let ratio = t[i][cols] / t[i][j];
                let tie = (ratio - best).abs() <= 1e-12;
                if ratio < best - 1e-12
                    || (tie && leaving.map(|l| basis[i] < basis[l]).unwrap_or(false))
                {
                    best = ratio;
                    leaving = Some(i);
                }
            }
        }
        let Some(i) = leaving else { return None };

        let pivot = t[i][j];
        for v in t[i].iter_mut() {
            *v /= pivot;
        }
        for r in 0..m {
            if r != i {
                let f = t[r][j];
                if f != 0.0 {
                    for k in 0..=cols {
                        t[r][k] -= f * t[i][k];
                    }
                }
            }
        }
        basis[i] = j;
    }
}
