//! Density-based clustering. Noise rows become singleton groups.

use super::{canonical_order, euclidean_sq, ClusterAssignment, ClusterMethod};
use crate::error::{PursuitError, Result};
use crate::membership::MembershipMatrix;

pub fn dbscan(matrix: &MembershipMatrix, eps: f64, min_pts: usize) -> Result<ClusterAssignment> {
    if eps.is_nan() || eps <= 0.0 || min_pts < 1 {
        return Err(PursuitError::config("DBSCAN needs eps > 0 and min_pts >= 1"));
    }
    let n = matrix.rows();
    let order = canonical_order(matrix);
    let rows: Vec<&[f64]> = order.iter().map(|&i| matrix.row(i)).collect();
    let eps_sq = eps * eps;
    let neighbours: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| euclidean_sq(rows[i], rows[j]) <= eps_sq)
                .collect()
        })
        .collect();
    let core: Vec<bool> = neighbours.iter().map(|nb| nb.len() >= min_pts).collect();

    let mut labels: Vec<Option<usize>> = vec![None; n];
    let mut next = 0;
    for i in 0..n {
        if labels[i].is_some() || !core[i] {
            continue;
        }
        let cluster = next;
        next += 1;
        labels[i] = Some(cluster);
        let mut frontier = vec![i];
        while let Some(p) = frontier.pop() {
            for &q in &neighbours[p] {
                if labels[q].is_none() {
                    labels[q] = Some(cluster);
                    if core[q] {
                        frontier.push(q);
                    }
                }
            }
        }
    }
    let mut raw = vec![0; n];
    for (pos, &orig) in order.iter().enumerate() {
        raw[orig] = labels[pos].unwrap_or_else(|| {
            next += 1;
            next - 1
        });
    }
    Ok(ClusterAssignment::from_raw(
        matrix.evader_ids.clone(),
        &raw,
        ClusterMethod::Dbscan,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_rows_form_one_cluster() {
        let m = MembershipMatrix::from_vectors(vec![vec![0.4, 0.4]; 5]).unwrap();
        assert_eq!(dbscan(&m, 0.01, 3).unwrap().group_count(), 1);
    }

    #[test]
    fn sparse_points_are_all_singletons() {
        let m = MembershipMatrix::from_vectors(vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]])
            .unwrap();
        let a = dbscan(&m, 0.5, 2).unwrap();
        assert_eq!(a.group_count(), 4);
        assert_eq!(a.labels.len(), 4);
    }

    #[test]
    fn rejects_bad_parameters() {
        let m = MembershipMatrix::from_vectors(vec![vec![0.0]]).unwrap();
        assert!(dbscan(&m, 0.0, 1).is_err());
        assert!(dbscan(&m, 1.0, 0).is_err());
    }
}
