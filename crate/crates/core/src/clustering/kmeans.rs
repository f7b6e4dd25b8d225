//! Lloyd's algorithm with farthest-point seeding.

use rand::{Rng, SeedableRng};

use super::{canonical_order, euclidean_sq, ClusterAssignment, ClusterMethod};
use crate::error::{PursuitError, Result};
use crate::membership::MembershipMatrix;
use crate::rng::SimRng;

pub const MAX_ITERATIONS: usize = 100;

/// Partitions the rows of `matrix` into `k` clusters.
///
/// Rows are processed in a canonical (lexicographic) order so the partition
/// does not depend on how the caller ordered the evaders.
pub fn kmeans(matrix: &MembershipMatrix, k: usize, seed: u64) -> Result<ClusterAssignment> {
    let n = matrix.rows();
    if k == 0 || k > n {
        return Err(PursuitError::InvalidK { k, rows: n });
    }
    let order = canonical_order(matrix);
    let rows: Vec<&[f64]> = order.iter().map(|&i| matrix.row(i)).collect();
    let dim = matrix.cols();

    let mut rng = SimRng::seed_from_u64(seed);
    let mut centroids: Vec<Vec<f64>> = vec![rows[rng.gen_range(0..n)].to_vec()];
    let mut nearest: Vec<f64> = rows.iter().map(|r| euclidean_sq(r, &centroids[0])).collect();
    while centroids.len() < k {
        let mut far = 0;
        for i in 1..n {
            if nearest[i] > nearest[far] {
                far = i;
            }
        }
        let c = rows[far].to_vec();
        for (d, r) in nearest.iter_mut().zip(&rows) {
            *d = d.min(euclidean_sq(r, &c));
        }
        centroids.push(c);
    }

    let mut labels = vec![usize::MAX; n];
    for _ in 0..MAX_ITERATIONS {
        let mut changed = false;
        for (i, r) in rows.iter().enumerate() {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, centroid) in centroids.iter().enumerate() {
                let d = euclidean_sq(r, centroid);
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if labels[i] != best {
                labels[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (r, &l) in rows.iter().zip(&labels) {
            counts[l] += 1;
            for (s, v) in sums[l].iter_mut().zip(r.iter()) {
                *s += v;
            }
        }
        for c in 0..k {
            // an emptied cluster keeps its previous centroid
            if counts[c] > 0 {
                centroids[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            }
        }
    }

    let mut raw = vec![0; n];
    for (pos, &orig) in order.iter().enumerate() {
        raw[orig] = labels[pos];
    }
    Ok(ClusterAssignment::from_raw(
        matrix.evader_ids.clone(),
        &raw,
        ClusterMethod::Kmeans,
    ))
}
