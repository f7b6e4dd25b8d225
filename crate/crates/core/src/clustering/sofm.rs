//! One-dimensional self-organizing feature map over membership vectors.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::{euclidean_sq, ClusterAssignment, ClusterMethod};
use crate::error::{PursuitError, Result};
use crate::membership::MembershipMatrix;
use crate::rng::SimRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SofmConfig {
    /// Output units on the lattice. `None` means one unit per input row.
    pub output_nodes: Option<usize>,
    pub epochs: usize,
    pub lr_initial: f64,
    pub lr_final: f64,
    /// Starting neighbourhood radius. `None` means half the unit count.
    pub radius_initial: Option<f64>,
    pub radius_final: f64,
    pub seed: u64,
    /// Continue from the previous network when its shape still fits.
    #[serde(default = "default_warm_start")]
    pub warm_start: bool,
}

fn default_warm_start() -> bool {
    true
}

impl Default for SofmConfig {
    fn default() -> Self {
        SofmConfig {
            output_nodes: None,
            epochs: 200,
            lr_initial: 0.5,
            lr_final: 0.01,
            radius_initial: None,
            radius_final: 0.5,
            seed: 0,
            warm_start: true,
        }
    }
}

impl SofmConfig {
    pub fn units_for(&self, rows: usize) -> usize {
        self.output_nodes.unwrap_or(rows).max(1)
    }

    pub fn radius_start(&self, units: usize) -> f64 {
        self.radius_initial
            .unwrap_or(units as f64 / 2.0)
            .max(self.radius_final)
    }

    /// Schedule checks. `epochs == 0` is accepted here and simply skips training.
    fn check_schedule(&self) -> Result<()> {
        if self.output_nodes == Some(0) {
            return Err(PursuitError::config("SOFM needs at least one output node"));
        }
        if !(self.lr_final > 0.0 && self.lr_initial >= self.lr_final) {
            return Err(PursuitError::config(
                "SOFM learning rates must satisfy lr_initial >= lr_final > 0",
            ));
        }
        if self.radius_final < 0.0 || self.radius_initial.is_some_and(|r| r < self.radius_final) {
            return Err(PursuitError::config(
                "SOFM radii must satisfy radius_initial >= radius_final >= 0",
            ));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(PursuitError::config("SOFM needs at least one epoch"));
        }
        self.check_schedule()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SofmNetwork {
    /// `units x dim`, row-major.
    weights: Vec<f64>,
    units: usize,
    dim: usize,
    pub config: SofmConfig,
}

impl SofmNetwork {
    /// Weights drawn uniformly from `[0, 1)`.
    pub fn random(units: usize, dim: usize, config: SofmConfig, rng: &mut SimRng) -> Self {
        let weights = (0..units * dim).map(|_| rng.gen::<f64>()).collect();
        SofmNetwork {
            weights,
            units,
            dim,
            config,
        }
    }

    pub fn from_weights(rows: Vec<Vec<f64>>, config: SofmConfig) -> Result<Self> {
        let units = rows.len();
        let dim = rows.first().map_or(0, Vec::len);
        if units == 0 || dim == 0 {
            return Err(PursuitError::EmptyMatrix);
        }
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(PursuitError::DimensionMismatch {
                expected: dim,
                found: r.len(),
            });
        }
        Ok(SofmNetwork {
            weights: rows.concat(),
            units,
            dim,
            config,
        })
    }

    pub fn units(&self) -> usize {
        self.units
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weight(&self, unit: usize) -> &[f64] {
        &self.weights[unit * self.dim..(unit + 1) * self.dim]
    }

    /// Nearest unit by Euclidean distance; ties go to the lowest index.
    pub fn best_matching_unit(&self, input: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for u in 0..self.units {
            let d = euclidean_sq(self.weight(u), input);
            if d < best_d {
                best_d = d;
                best = u;
            }
        }
        best
    }

    /// Mean distance from each row to its best-matching unit.
    pub fn quantization_error(&self, matrix: &MembershipMatrix) -> f64 {
        if matrix.rows() == 0 {
            return 0.0;
        }
        let total: f64 = matrix
            .iter_rows()
            .map(|r| euclidean_sq(self.weight(self.best_matching_unit(r)), r).sqrt())
            .sum();
        total / matrix.rows() as f64
    }

    /// Runs the configured schedule over `matrix`, continuing from the
    /// current weights.
    pub fn train(&mut self, matrix: &MembershipMatrix, rng: &mut SimRng) -> Result<()> {
        self.train_observed(matrix, rng, |_, _| {})
    }

    /// As [`SofmNetwork::train`], calling `observe(epoch, net)` after every epoch.
    pub fn train_observed(
        &mut self,
        matrix: &MembershipMatrix,
        rng: &mut SimRng,
        mut observe: impl FnMut(usize, &SofmNetwork),
    ) -> Result<()> {
        if matrix.is_empty() {
            return Err(PursuitError::EmptyMatrix);
        }
        if matrix.cols() != self.dim {
            return Err(PursuitError::DimensionMismatch {
                expected: self.dim,
                found: matrix.cols(),
            });
        }
        let cfg = self.config.clone();
        let epochs = cfg.epochs;
        let r0 = cfg.radius_start(self.units);
        let mut order: Vec<usize> = (0..matrix.rows()).collect();
        let mut h = vec![0.0; self.units];
        for epoch in 0..epochs {
            let frac = if epochs > 1 {
                epoch as f64 / (epochs - 1) as f64
            } else {
                0.0
            };
            let lr = cfg.lr_initial + (cfg.lr_final - cfg.lr_initial) * frac;
            let radius = r0 + (cfg.radius_final - r0) * frac;
            order.shuffle(rng);
            for &i in &order {
                let input = matrix.row(i);
                let bmu = self.best_matching_unit(input);
                neighbourhood(bmu, radius, &mut h);
                for (u, &hu) in h.iter().enumerate() {
                    let step = lr * hu;
                    if step == 0.0 {
                        continue;
                    }
                    let w = &mut self.weights[u * self.dim..(u + 1) * self.dim];
                    for (wk, &xk) in w.iter_mut().zip(input) {
                        *wk += step * (xk - *wk);
                    }
                }
            }
            observe(epoch, self);
        }
        Ok(())
    }
}

/// Gaussian neighbourhood on the 1-D lattice. A zero radius only moves the winner.
fn neighbourhood(bmu: usize, radius: f64, out: &mut [f64]) {
    for (u, h) in out.iter_mut().enumerate() {
        let d = u.abs_diff(bmu) as f64;
        *h = if radius > 0.0 {
            (-(d * d) / (2.0 * radius * radius)).exp()
        } else if d == 0.0 {
            1.0
        } else {
            0.0
        };
    }
}

/// Fresh network trained on `matrix` with randomness from `cfg.seed`.
pub fn train_sofm(matrix: &MembershipMatrix, cfg: &SofmConfig) -> Result<SofmNetwork> {
    let mut rng = SimRng::seed_from_u64(cfg.seed);
    train_sofm_with(matrix, cfg, &mut rng)
}

pub fn train_sofm_with(
    matrix: &MembershipMatrix,
    cfg: &SofmConfig,
    rng: &mut SimRng,
) -> Result<SofmNetwork> {
    if matrix.is_empty() {
        return Err(PursuitError::EmptyMatrix);
    }
    cfg.check_schedule()?;
    let units = cfg.units_for(matrix.rows());
    let mut net = SofmNetwork::random(units, matrix.cols(), cfg.clone(), rng);
    net.train(matrix, rng)?;
    Ok(net)
}

/// Labels each row with its best-matching unit, compacted to `0..groups`.
pub fn assign(net: &SofmNetwork, matrix: &MembershipMatrix) -> Result<ClusterAssignment> {
    if matrix.cols() != net.dim() {
        return Err(PursuitError::DimensionMismatch {
            expected: net.dim(),
            found: matrix.cols(),
        });
    }
    let raw: Vec<usize> = matrix
        .iter_rows()
        .map(|r| net.best_matching_unit(r))
        .collect();
    Ok(ClusterAssignment::from_raw(
        matrix.evader_ids.clone(),
        &raw,
        ClusterMethod::Sofm,
    ))
}
