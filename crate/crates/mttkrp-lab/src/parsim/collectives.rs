//! Bucket (ring) All-Gather and Reduce-Scatter, simulated step by step.
//!
//! A bucket collective over `q` processors runs `q-1` synchronous steps;
//! at each step every processor passes one array left around the ring.
//! Word counts fall out of the simulation rather than a formula, so
//! unequal part sizes are handled exactly.

use std::ops::Range;

use crate::error::{Error, Result};

/// Per-member traffic produced by one collective.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TrafficDelta {
    pub sent: u128,
    pub received: u128,
    pub additions: u128,
}

/// Ring All-Gather: member `j` starts with `parts[j]` and ends with the
/// concatenation of all parts in index order. Returns the concatenation
/// and each member's traffic.
pub fn bucket_all_gather(parts: &[Vec<f64>]) -> (Vec<f64>, Vec<TrafficDelta>) {
    let q = parts.len();
    let mut deltas = vec![TrafficDelta::default(); q];
    if q <= 1 {
        return (parts.concat(), deltas);
    }

    // slots[j][i]: part i as held by member j; send_idx[j]: the slot j
    // forwards at the next step (its own part initially).
    let mut slots: Vec<Vec<Option<Vec<f64>>>> = (0..q)
        .map(|j| {
            (0..q)
                .map(|i| if i == j { Some(parts[i].clone()) } else { None })
                .collect()
        })
        .collect();
    let mut send_idx: Vec<usize> = (0..q).collect();

    for _step in 1..q {
        let mut pending: Vec<(usize, usize, Vec<f64>)> = Vec::with_capacity(q);
        for j in 0..q {
            let idx = send_idx[j];
            let part = slots[j][idx]
                .clone()
                .expect("ring invariant: sender holds its slot");
            let dst = (j + q - 1) % q;
            deltas[j].sent += part.len() as u128;
            deltas[dst].received += part.len() as u128;
            pending.push((dst, idx, part));
        }
        for (dst, idx, part) in pending {
            slots[dst][idx] = Some(part);
            send_idx[dst] = idx;
        }
    }

    let gathered: Vec<f64> = slots[0]
        .iter()
        .flat_map(|s| s.as_ref().expect("all parts delivered").iter().copied())
        .collect();
    (gathered, deltas)
}

/// Ring Reduce-Scatter: every member contributes an equal-length array;
/// member `j` ends with slice `chunks[j]` of the elementwise sum. Partial
/// sums travel leftward, each member adding its local contribution, so
/// the summation order is fixed by the ring. Returns each member's final
/// chunk and traffic (additions counted per accumulated element).
pub fn bucket_reduce_scatter(
    arrays: &[Vec<f64>],
    chunks: &[Range<usize>],
) -> Result<(Vec<Vec<f64>>, Vec<TrafficDelta>)> {
    let q = arrays.len();
    if q == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    let len = arrays[0].len();
    if arrays.iter().any(|a| a.len() != len) {
        return Err(Error::Distribution(
            "reduce-scatter arrays differ in length".into(),
        ));
    }
    if chunks.len() != q {
        return Err(Error::Distribution(
            "reduce-scatter needs one chunk per member".into(),
        ));
    }
    let mut deltas = vec![TrafficDelta::default(); q];
    if q == 1 {
        return Ok((vec![arrays[0][chunks[0].clone()].to_vec()], deltas));
    }

    // carry[j]: the partial for chunk (j + t) % q that j sends at step t.
    let mut carry: Vec<Vec<f64>> = (0..q)
        .map(|j| arrays[j][chunks[(j + 1) % q].clone()].to_vec())
        .collect();
    let mut result: Vec<Vec<f64>> = vec![Vec::new(); q];

    for t in 1..q {
        let mut incoming: Vec<Vec<f64>> = Vec::with_capacity(q);
        for j in 0..q {
            let dst = (j + q - 1) % q;
            deltas[j].sent += carry[j].len() as u128;
            deltas[dst].received += carry[j].len() as u128;
            incoming.push(carry[j].clone());
        }
        for j in 0..q {
            // j receives from its right neighbor the partial for chunk c
            let c = (j + 1 + t) % q;
            let mut part = incoming[(j + 1) % q].clone();
            let local = &arrays[j][chunks[c].clone()];
            for (acc, &v) in part.iter_mut().zip(local) {
                *acc += v;
            }
            deltas[j].additions += local.len() as u128;
            if t == q - 1 {
                debug_assert_eq!(c, j);
                result[j] = part;
            } else {
                carry[j] = part;
            }
        }
    }
    Ok((result, deltas))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_gather_equal_parts() {
        // q = 4, parts of 8 words: every member sends (q-1)*w = 24
        let parts: Vec<Vec<f64>> = (0..4).map(|j| vec![j as f64; 8]).collect();
        let (gathered, deltas) = bucket_all_gather(&parts);
        assert_eq!(gathered.len(), 32);
        for d in &deltas {
            assert_eq!(d.sent, 24);
            assert_eq!(d.received, 24);
        }
        assert_eq!(gathered, parts.concat());
    }

    #[test]
    fn all_gather_single_member_is_free() {
        let parts = vec![vec![1.0, 2.0]];
        let (gathered, deltas) = bucket_all_gather(&parts);
        assert_eq!(gathered, vec![1.0, 2.0]);
        assert_eq!(deltas[0], TrafficDelta::default());
    }

    #[test]
    fn all_gather_unequal_parts_bounded_by_largest() {
        let parts = vec![vec![0.0; 3], vec![1.0; 3], vec![2.0; 3], vec![3.0; 2]];
        let (gathered, deltas) = bucket_all_gather(&parts);
        assert_eq!(gathered.len(), 11);
        let total: u128 = parts.iter().map(|p| p.len() as u128).sum();
        for (j, d) in deltas.iter().enumerate() {
            assert!(d.sent <= 3 * 3, "member {j} sent {}", d.sent);
            assert_eq!(d.received, total - parts[j].len() as u128);
        }
        let sent: u128 = deltas.iter().map(|d| d.sent).sum();
        let recv: u128 = deltas.iter().map(|d| d.received).sum();
        assert_eq!(sent, recv);
    }

    #[test]
    fn reduce_scatter_two_members() {
        let arrays = vec![vec![1.0, 2.0, 3.0, 4.0], vec![10.0, 20.0, 30.0, 40.0]];
        let chunks = vec![0..2, 2..4];
        let (result, deltas) = bucket_reduce_scatter(&arrays, &chunks).unwrap();
        assert_eq!(result[0], vec![11.0, 22.0]);
        assert_eq!(result[1], vec![33.0, 44.0]);
        for d in &deltas {
            assert_eq!(d.sent, 2);
            assert_eq!(d.additions, 2);
        }
    }

    #[test]
    fn reduce_scatter_single_member() {
        let arrays = vec![vec![5.0, 6.0]];
        let (result, deltas) = bucket_reduce_scatter(&arrays, &[0..2]).unwrap();
        assert_eq!(result[0], vec![5.0, 6.0]);
        assert_eq!(deltas[0], TrafficDelta::default());
    }

    #[test]
    fn reduce_scatter_matches_direct_sum() {
        let q = 5;
        let len = 13;
        let mut rng = crate::tensor::Xorshift64Star::new(99);
        let arrays: Vec<Vec<f64>> = (0..q)
            .map(|_| (0..len).map(|_| rng.next_signed_unit()).collect())
            .collect();
        let chunks = crate::parsim::balanced_parts(len, q);
        let (result, deltas) = bucket_reduce_scatter(&arrays, &chunks).unwrap();
        for (j, chunk) in chunks.iter().enumerate() {
            for (off, i) in chunk.clone().enumerate() {
                let direct: f64 = arrays.iter().map(|a| a[i]).sum();
                assert!((result[j][off] - direct).abs() < 1e-12);
            }
        }
        // additions and words per member stay below (q-1) * largest chunk
        let w = chunks.iter().map(|c| c.len()).max().unwrap() as u128;
        for d in &deltas {
            assert!(d.sent <= (q as u128 - 1) * w);
            assert!(d.additions <= (q as u128 - 1) * w);
        }
    }

    #[test]
    fn reduce_scatter_rejects_mismatched_lengths() {
        let arrays = vec![vec![1.0, 2.0], vec![1.0]];
        match bucket_reduce_scatter(&arrays, &[0..1, 1..2]) {
            Err(Error::Distribution(_)) => {}
            other => panic!("expected distribution error, got {other:?}"),
        }
    }
}
