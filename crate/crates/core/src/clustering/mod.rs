//! Grouping evaders by their membership vectors.
//!
//! [`sofm`] is the competitive-learning grouping; [`kmeans`] and [`dbscan`]
//! are comparison baselines. `SINGLETON` puts every evader in its own group.

pub mod dbscan;
pub mod kmeans;
pub mod sofm;

use std::cmp::Ordering;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use dbscan::dbscan;
pub use kmeans::kmeans;
pub use sofm::{assign, train_sofm, SofmConfig, SofmNetwork};

use crate::error::{PursuitError, Result};
use crate::grid_world::AgentId;
use crate::membership::MembershipMatrix;
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ClusterMethod {
    Sofm,
    Kmeans,
    Dbscan,
    Singleton,
}

impl ClusterMethod {
    pub fn name(self) -> &'static str {
        match self {
            ClusterMethod::Sofm => "SOFM",
            ClusterMethod::Kmeans => "KMEANS",
            ClusterMethod::Dbscan => "DBSCAN",
            ClusterMethod::Singleton => "SINGLETON",
        }
    }
}

impl fmt::Display for ClusterMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClusterMethod {
    type Err = PursuitError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "SOFM" => Ok(ClusterMethod::Sofm),
            "KMEANS" | "KMEAN" => Ok(ClusterMethod::Kmeans),
            "DBSCAN" => Ok(ClusterMethod::Dbscan),
            "SINGLETON" => Ok(ClusterMethod::Singleton),
            _ => Err(PursuitError::UnknownMethod(s.to_string())),
        }
    }
}

/// Group label per evader, in matrix row order. Labels are contiguous from 0
/// and numbered by first appearance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub evader_ids: Vec<AgentId>,
    pub labels: Vec<usize>,
    pub method: ClusterMethod,
}

impl ClusterAssignment {
    pub fn from_raw(evader_ids: Vec<AgentId>, raw: &[usize], method: ClusterMethod) -> Self {
        let mut map: Vec<(usize, usize)> = Vec::new();
        let labels = raw
            .iter()
            .map(|&r| match map.iter().find(|(k, _)| *k == r) {
                Some(&(_, v)) => v,
                None => {
                    let v = map.len();
                    map.push((r, v));
                    v
                }
            })
            .collect();
        ClusterAssignment {
            evader_ids,
            labels,
            method,
        }
    }

    pub fn singleton(evader_ids: Vec<AgentId>) -> Self {
        let labels = (0..evader_ids.len()).collect();
        ClusterAssignment {
            evader_ids,
            labels,
            method: ClusterMethod::Singleton,
        }
    }

    pub fn group_count(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    pub fn label_of(&self, evader: AgentId) -> Option<usize> {
        self.evader_ids
            .iter()
            .position(|&e| e == evader)
            .map(|i| self.labels[i])
    }

    /// Evader ids of each group, indexed by label.
    pub fn groups(&self) -> Vec<Vec<AgentId>> {
        let mut out = vec![Vec::new(); self.group_count()];
        for (&id, &l) in self.evader_ids.iter().zip(&self.labels) {
            out[l].push(id);
        }
        out
    }

    /// The partition as a sorted set of sorted id lists; equal partitions
    /// compare equal regardless of labelling.
    pub fn partition(&self) -> Vec<Vec<AgentId>> {
        let mut groups = self.groups();
        for g in &mut groups {
            g.sort();
        }
        groups.sort();
        groups
    }

    /// `evader_id,group_index,method` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["evader_id", "group_index", "method"])?;
        for (id, l) in self.evader_ids.iter().zip(&self.labels) {
            w.write_record([id.to_string(), l.to_string(), self.method.to_string()])?;
        }
        w.flush().map_err(|e| PursuitError::io("<assignment csv>", e))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClusterParams {
    #[serde(default)]
    pub sofm: SofmConfig,
    pub kmeans_k: usize,
    pub kmeans_seed: u64,
    pub dbscan_eps: f64,
    pub dbscan_min_pts: usize,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams {
            sofm: SofmConfig::default(),
            kmeans_k: 3,
            kmeans_seed: 0,
            dbscan_eps: 0.1,
            dbscan_min_pts: 2,
        }
    }
}

impl ClusterParams {
    pub fn validate(&self) -> Result<()> {
        self.sofm.validate()?;
        if self.kmeans_k == 0 {
            return Err(PursuitError::config("kmeans_k must be at least 1"));
        }
        if self.dbscan_eps.is_nan() || self.dbscan_eps <= 0.0 || self.dbscan_min_pts == 0 {
            return Err(PursuitError::config("DBSCAN needs eps > 0 and min_pts >= 1"));
        }
        Ok(())
    }
}

/// Clusters `matrix` with `method`. SOFM trains a fresh network seeded from
/// `params.sofm.seed`.
pub fn cluster(
    matrix: &MembershipMatrix,
    method: ClusterMethod,
    params: &ClusterParams,
) -> Result<ClusterAssignment> {
    if matrix.rows() == 0 {
        return Err(PursuitError::EmptyMatrix);
    }
    match method {
        ClusterMethod::Singleton => Ok(ClusterAssignment::singleton(matrix.evader_ids.clone())),
        ClusterMethod::Sofm => {
            let net = train_sofm(matrix, &params.sofm)?;
            assign(&net, matrix)
        }
        ClusterMethod::Kmeans => kmeans(matrix, params.kmeans_k, params.kmeans_seed),
        ClusterMethod::Dbscan => dbscan(matrix, params.dbscan_eps, params.dbscan_min_pts),
    }
}

/// Clustering state carried through a simulation run: keeps the last SOFM
/// for warm starts and draws every seed from the run's clustering stream.
#[derive(Debug, Clone)]
pub struct Clusterer {
    pub method: ClusterMethod,
    pub params: ClusterParams,
    rng: SimRng,
    network: Option<SofmNetwork>,
}

impl Clusterer {
    pub fn new(method: ClusterMethod, params: ClusterParams, rng: SimRng) -> Self {
        Clusterer {
            method,
            params,
            rng,
            network: None,
        }
    }

    pub fn network(&self) -> Option<&SofmNetwork> {
        self.network.as_ref()
    }

    /// Groups the rows of `matrix`. KMeans' `k` is capped at the row count.
    pub fn run(&mut self, matrix: &MembershipMatrix) -> Result<ClusterAssignment> {
        use rand::Rng;
        if matrix.rows() == 0 {
            return Err(PursuitError::EmptyMatrix);
        }
        match self.method {
            ClusterMethod::Singleton | ClusterMethod::Dbscan => {
                cluster(matrix, self.method, &self.params)
            }
            ClusterMethod::Kmeans => {
                let k = self.params.kmeans_k.min(matrix.rows());
                kmeans(matrix, k, self.rng.gen())
            }
            ClusterMethod::Sofm => {
                let cfg = &self.params.sofm;
                let units = cfg.units_for(matrix.rows());
                let reusable = cfg.warm_start
                    && self
                        .network
                        .as_ref()
                        .is_some_and(|n| n.units() == units && n.dim() == matrix.cols());
                if reusable {
                    let net = self.network.as_mut().expect("checked above");
                    net.train(matrix, &mut self.rng)?;
                } else {
                    self.network = Some(sofm::train_sofm_with(matrix, cfg, &mut self.rng)?);
                }
                assign(self.network.as_ref().expect("trained"), matrix)
            }
        }
    }
}

pub(crate) fn euclidean_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Row indices sorted lexicographically by row content (ties by index).
pub(crate) fn canonical_order(matrix: &MembershipMatrix) -> Vec<usize> {
    let mut order: Vec<usize> = (0..matrix.rows()).collect();
    order.sort_by(|&a, &b| {
        matrix
            .row(a)
            .iter()
            .zip(matrix.row(b))
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_are_compacted_by_first_appearance() {
        let ids = (0..4).map(AgentId).collect();
        let a = ClusterAssignment::from_raw(ids, &[7, 2, 7, 5], ClusterMethod::Sofm);
        assert_eq!(a.labels, vec![0, 1, 0, 2]);
        assert_eq!(a.group_count(), 3);
    }

    #[test]
    fn method_names_parse() {
        assert_eq!("sofm".parse::<ClusterMethod>().unwrap(), ClusterMethod::Sofm);
        assert_eq!("KMEANS".parse::<ClusterMethod>().unwrap(), ClusterMethod::Kmeans);
        assert!(matches!(
            "spectral".parse::<ClusterMethod>(),
            Err(PursuitError::UnknownMethod(_))
        ));
    }

    #[test]
    fn singleton_dispatch() {
        let m = MembershipMatrix::from_vectors(vec![vec![0.5]; 9]).unwrap();
        let a = cluster(&m, ClusterMethod::Singleton, &ClusterParams::default()).unwrap();
        assert_eq!(a.group_count(), 9);
        assert_eq!(a.labels, (0..9).collect::<Vec<_>>());
    }

    #[test]
    fn sofm_dispatch_matches_assign() {
        let m = MembershipMatrix::from_vectors(vec![
            vec![0.1, 0.2],
            vec![0.8, 0.9],
            vec![0.15, 0.2],
        ])
        .unwrap();
        let params = ClusterParams::default();
        let via_dispatch = cluster(&m, ClusterMethod::Sofm, &params).unwrap();
        let net = train_sofm(&m, &params.sofm).unwrap();
        assert_eq!(via_dispatch, assign(&net, &m).unwrap());
    }

    #[test]
    fn kmeans_dispatch_on_nine_rows() {
        let rows: Vec<Vec<f64>> = (0..9)
            .map(|i| vec![(i / 3) as f64, (i / 3) as f64 + 0.01 * (i % 3) as f64])
            .collect();
        let m = MembershipMatrix::from_vectors(rows).unwrap();
        let a = cluster(&m, ClusterMethod::Kmeans, &ClusterParams::default()).unwrap();
        assert_eq!(a.group_count(), 3);
    }

    #[test]
    fn assignment_csv() {
        let a = ClusterAssignment::singleton(vec![AgentId(4), AgentId(5)]);
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "evader_id,group_index,method\n4,0,SINGLETON\n5,1,SINGLETON\n"
        );
    }

    #[test]
    fn clusterer_warm_starts_sofm() {
        let m = MembershipMatrix::from_vectors(vec![vec![0.1, 0.2], vec![0.8, 0.9]]).unwrap();
        let mut c = Clusterer::new(
            ClusterMethod::Sofm,
            ClusterParams::default(),
            crate::rng::clustering_rng(1),
        );
        c.run(&m).unwrap();
        let first = c.network().unwrap().clone();
        c.run(&m).unwrap();
        // same shape: trained further rather than re-initialised
        assert_eq!(first.units(), c.network().unwrap().units());
        assert_ne!(&first, c.network().unwrap());
    }
}
