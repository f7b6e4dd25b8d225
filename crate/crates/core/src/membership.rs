//! Pursuer capability statistics, the pursuer/evader membership degree,
//! evader priority and the membership matrix fed to clustering.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{PursuitError, Result};
use crate::grid_world::{count_range_invaders, AgentId, EvaderState, GridConfig, PursuerState, WorldState};

/// Lower bound of both capability statistics.
pub const CAPABILITY_FLOOR: f64 = 0.1;

/// Weights of the distance, confidence and credit terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Coefficients {
    pub coef_dist: f64,
    pub coef_conf: f64,
    pub coef_cred: f64,
}

impl Default for Coefficients {
    fn default() -> Self {
        Coefficients {
            coef_dist: 1.0,
            coef_conf: 1.0,
            coef_cred: 1.0,
        }
    }
}

impl Coefficients {
    pub fn new(coef_dist: f64, coef_conf: f64, coef_cred: f64) -> Self {
        Coefficients {
            coef_dist,
            coef_conf,
            coef_cred,
        }
    }

    /// Distance only; confidence and credit carry no weight.
    pub fn distance_only() -> Self {
        Coefficients::new(1.0, 0.0, 0.0)
    }

    pub fn sum(&self) -> f64 {
        self.coef_dist + self.coef_conf + self.coef_cred
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.coef_dist, self.coef_conf, self.coef_cred];
        if all.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(PursuitError::config("coefficients must be finite and non-negative"));
        }
        if self.sum() <= 0.0 {
            return Err(PursuitError::config("coefficients must not all be zero"));
        }
        Ok(())
    }
}

/// How the distance term enters the membership degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceTerm {
    /// `1 - dist / diagonal`: nearer pursuers score higher.
    #[default]
    Inverted,
    /// `dist / diagonal`: the formula read literally, kept for comparison runs.
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MembershipModel {
    pub coefs: Coefficients,
    #[serde(default)]
    pub distance: DistanceTerm,
}

impl MembershipModel {
    pub fn new(coefs: Coefficients) -> Self {
        MembershipModel {
            coefs,
            distance: DistanceTerm::Inverted,
        }
    }

    pub fn degree(&self, e: &EvaderState, p: &PursuerState, grid: &GridConfig) -> f64 {
        let ratio = (e.pos.euclidean(p.pos) / grid.diagonal()).min(1.0);
        let dist_term = match self.distance {
            DistanceTerm::Inverted => 1.0 - ratio,
            DistanceTerm::Raw => ratio,
        };
        let c = &self.coefs;
        (c.coef_dist * dist_term + c.coef_conf * confidence(p) + c.coef_cred * credit(p)) / c.sum()
    }
}

/// Success ratio, floored at 0.1. A pursuer with no history gets the floor.
pub fn confidence(p: &PursuerState) -> f64 {
    if p.c_t == 0 {
        return CAPABILITY_FLOOR;
    }
    (f64::from(p.c_s) / f64::from(p.c_t)).clamp(CAPABILITY_FLOOR, 1.0)
}

/// Non-abandonment ratio, kept inside `[0.1, 1]`. No history means full credit.
pub fn credit(p: &PursuerState) -> f64 {
    let denom = p.c_t + p.c_s;
    if denom == 0 {
        return 1.0;
    }
    (1.0 - f64::from(p.c_b) / f64::from(denom)).clamp(CAPABILITY_FLOOR, 1.0)
}

/// Membership degree of pursuer `p` for evader `e` with an inverted distance term.
pub fn membership(e: &EvaderState, p: &PursuerState, world: &WorldState, coefs: &Coefficients) -> f64 {
    MembershipModel::new(*coefs).degree(e, p, &world.config)
}

/// `(1 + pursuers whose range e invades) / difficulty`.
pub fn priority(e: &EvaderState, world: &WorldState) -> f64 {
    priority_from_count(count_range_invaders(e, world), e.difficulty)
}

pub fn priority_from_count(invaders: usize, difficulty: u32) -> f64 {
    (1.0 + invaders as f64) / f64::from(difficulty.max(1))
}

/// Evader-major matrix of membership degrees. Row `i` is the membership
/// vector of `evader_ids[i]` over `pursuer_ids`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembershipMatrix {
    pub evader_ids: Vec<AgentId>,
    pub pursuer_ids: Vec<AgentId>,
    values: Vec<f64>,
}

impl MembershipMatrix {
    pub fn from_rows(
        evader_ids: Vec<AgentId>,
        pursuer_ids: Vec<AgentId>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if rows.len() != evader_ids.len() {
            return Err(PursuitError::DimensionMismatch {
                expected: evader_ids.len(),
                found: rows.len(),
            });
        }
        let mut values = Vec::with_capacity(rows.len() * pursuer_ids.len());
        for row in rows {
            if row.len() != pursuer_ids.len() {
                return Err(PursuitError::DimensionMismatch {
                    expected: pursuer_ids.len(),
                    found: row.len(),
                });
            }
            values.extend(row);
        }
        Ok(MembershipMatrix {
            evader_ids,
            pursuer_ids,
            values,
        })
    }

    /// Convenience constructor for raw feature rows with synthetic ids.
    pub fn from_vectors(rows: Vec<Vec<f64>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let evaders = (0..rows.len() as u32).map(AgentId).collect();
        let pursuers = (0..cols as u32).map(AgentId).collect();
        Self::from_rows(evaders, pursuers, rows)
    }

    pub fn rows(&self) -> usize {
        self.evader_ids.len()
    }

    pub fn cols(&self) -> usize {
        self.pursuer_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows() == 0 || self.cols() == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.cols();
        &self.values[i * m..(i + 1) * m]
    }

    pub fn get(&self, evader: usize, pursuer: usize) -> f64 {
        self.values[evader * self.cols() + pursuer]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.rows()).map(move |i| self.row(i))
    }

    /// Copy with rows reordered so that row `i` is old row `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let rows = order.iter().map(|&i| self.row(i).to_vec()).collect();
        let ids = order.iter().map(|&i| self.evader_ids[i]).collect();
        Self::from_rows(ids, self.pursuer_ids.clone(), rows).expect("same shape")
    }

    /// Header of pursuer ids, then one row per evader.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["evader_id".to_string()];
        header.extend(self.pursuer_ids.iter().map(|p| format!("p{p}")));
        w.write_record(&header)?;
        for (i, id) in self.evader_ids.iter().enumerate() {
            let mut rec = vec![id.to_string()];
            rec.extend(self.row(i).iter().map(|v| format!("{v:.6}")));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| PursuitError::io("<membership csv>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| PursuitError::io(path, e))?;
        self.write_csv(file)
    }
}

/// Membership matrix over every alive evader and every pursuer.
pub fn membership_matrix(world: &WorldState, model: &MembershipModel) -> Result<MembershipMatrix> {
    let evaders: Vec<&EvaderState> = world.alive_evaders().collect();
    membership_matrix_for(world, &evaders, model)
}

/// Membership matrix restricted to `evaders`; columns follow pursuer order.
pub fn membership_matrix_for(
    world: &WorldState,
    evaders: &[&EvaderState],
    model: &MembershipModel,
) -> Result<MembershipMatrix> {
    if evaders.is_empty() {
        return Err(PursuitError::NoAliveEvaders);
    }
    if world.pursuers.is_empty() {
        return Err(PursuitError::NoPursuers);
    }
    let rows = evaders
        .iter()
        .map(|e| {
            world
                .pursuers
                .iter()
                .map(|p| model.degree(e, p, &world.config))
                .collect()
        })
        .collect();
    MembershipMatrix::from_rows(
        evaders.iter().map(|e| e.id).collect(),
        world.pursuers.iter().map(|p| p.id).collect(),
        rows,
    )
}
