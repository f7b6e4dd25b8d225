use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::clustering::{ClusterMethod, ClusterParams};
use crate::coalition::{FormationParams, GroupScore};
use crate::error::{PursuitError, Result};
use crate::grid_world::{GridConfig, Position, RangeMetric};
use crate::learning::{FieldParams, QParams};
use crate::membership::{Coefficients, DistanceTerm, MembershipModel};

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "PURSUIT_WORKERS";

/// The five compared setups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Case {
    #[serde(rename = "AGR")]
    Agr,
    #[serde(rename = "AGRMF")]
    Agrmf,
    #[serde(rename = "SOFM_AGRMF")]
    SofmAgrmf,
    #[serde(rename = "KMEANS_AGRMF")]
    KmeansAgrmf,
    #[serde(rename = "DBSCAN_AGRMF")]
    DbscanAgrmf,
}

impl Case {
    pub const ALL: [Case; 5] = [
        Case::SofmAgrmf,
        Case::KmeansAgrmf,
        Case::DbscanAgrmf,
        Case::Agrmf,
        Case::Agr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Case::Agr => "AGR",
            Case::Agrmf => "AGRMF",
            Case::SofmAgrmf => "SOFM_AGRMF",
            Case::KmeansAgrmf => "KMEANS_AGRMF",
            Case::DbscanAgrmf => "DBSCAN_AGRMF",
        }
    }

    pub fn cluster_method(self) -> ClusterMethod {
        match self {
            Case::Agr | Case::Agrmf => ClusterMethod::Singleton,
            Case::SofmAgrmf => ClusterMethod::Sofm,
            Case::KmeansAgrmf => ClusterMethod::Kmeans,
            Case::DbscanAgrmf => ClusterMethod::Dbscan,
        }
    }

    /// AGR scores pursuers by distance alone and keeps no task history.
    pub fn uses_track_record(self) -> bool {
        self != Case::Agr
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Case {
    type Err = PursuitError;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .trim()
            .chars()
            .map(|c| match c {
                '+' | '-' => '_',
                c => c.to_ascii_uppercase(),
            })
            .collect();
        match norm.as_str() {
            "AGR" => Ok(Case::Agr),
            "AGRMF" => Ok(Case::Agrmf),
            "SOFM_AGRMF" | "SOFM" => Ok(Case::SofmAgrmf),
            "KMEANS_AGRMF" | "KMEAN_AGRMF" | "KMEANS" => Ok(Case::KmeansAgrmf),
            "DBSCAN_AGRMF" | "DBSCAN" => Ok(Case::DbscanAgrmf),
            _ => Err(PursuitError::UnknownCase(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    pub obstacles: Vec<Position>,
    pub range_metric: RangeMetric,
    /// Allow pursuers to stand still.
    pub pursuer_stay: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            width: 100,
            height: 100,
            obstacles: Vec::new(),
            range_metric: RangeMetric::Chebyshev,
            pursuer_stay: false,
        }
    }
}

impl GridSpec {
    pub fn to_config(&self) -> GridConfig {
        let mut g = GridConfig::new(self.width, self.height)
            .with_obstacles(self.obstacles.iter().copied());
        g.range_metric = self.range_metric;
        g.pursuer_stay = self.pursuer_stay;
        g
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaderSpot {
    pub x: usize,
    pub y: usize,
    pub difficulty: u32,
}

/// Fixed starting positions instead of random placement.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub pursuers: Vec<Position>,
    pub evaders: Vec<EvaderSpot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentSpec {
    pub pursuers: usize,
    pub evaders: usize,
    /// Inclusive difficulty bounds.
    pub difficulty_min: u32,
    pub difficulty_max: u32,
    /// Pursuit range of every pursuer, in cells.
    pub pursuer_range: u32,
    /// Fixed reward magnitude; by default each evader's reward is its difficulty.
    pub reward_mag: Option<f64>,
    pub scenario: Option<Scenario>,
}

impl Default for AgentSpec {
    fn default() -> Self {
        AgentSpec {
            pursuers: 33,
            evaders: 9,
            difficulty_min: 2,
            difficulty_max: 4,
            pursuer_range: 10,
            reward_mag: None,
            scenario: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoalitionSpec {
    pub life: u32,
    pub coefs: Coefficients,
    pub distance_term: DistanceTerm,
    pub score: GroupScore,
}

impl Default for CoalitionSpec {
    fn default() -> Self {
        CoalitionSpec {
            life: 30,
            coefs: Coefficients::default(),
            distance_term: DistanceTerm::Inverted,
            score: GroupScore::Max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvaderPolicy {
    /// Step to the cell farthest from the nearest pursuer.
    #[default]
    Escape,
    /// Q-learning on distance to the nearest pursuer.
    Learning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub case: Case,
    pub repetitions: usize,
    pub base_seed: u64,
    pub max_ticks: u64,
    /// Parallel runs; `None` reads the environment, then uses all cores.
    pub workers: Option<usize>,
    pub grid: GridSpec,
    pub agents: AgentSpec,
    pub coalition: CoalitionSpec,
    pub clustering: ClusterParams,
    pub learning: QParams,
    pub field: FieldParams,
    pub evader_policy: EvaderPolicy,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            case: Case::SofmAgrmf,
            repetitions: 100,
            base_seed: 0,
            max_ticks: 10_000,
            workers: None,
            grid: GridSpec::default(),
            agents: AgentSpec::default(),
            coalition: CoalitionSpec::default(),
            clustering: ClusterParams::default(),
            learning: QParams::default(),
            field: FieldParams::default(),
            evader_policy: EvaderPolicy::Escape,
        }
    }
}

impl ExperimentConfig {
    pub fn for_case(case: Case) -> Self {
        ExperimentConfig {
            case,
            ..ExperimentConfig::default()
        }
    }

    pub fn with_case(&self, case: Case) -> Self {
        ExperimentConfig {
            case,
            ..self.clone()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| PursuitError::Parse {
            path: "<inline>".into(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| PursuitError::io(path, e))?;
        toml::from_str(&text).map_err(|e| PursuitError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    /// Applies `key.path=value` where the value is parsed as a TOML literal,
    /// falling back to a bare string.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| PursuitError::config(format!("override `{assignment}` lacks `=`")))?;
        let value = parse_literal(raw.trim());
        let mut doc = toml::Value::try_from(&*self).expect("config serializes");
        let mut slot = &mut doc;
        let parts: Vec<&str> = key.trim().split('.').collect();
        for (i, part) in parts.iter().enumerate() {
            let table = slot
                .as_table_mut()
                .ok_or_else(|| PursuitError::config(format!("`{key}` is not a table path")))?;
            if i + 1 == parts.len() {
                table.insert((*part).to_string(), value.clone());
                break;
            }
            slot = table
                .entry((*part).to_string())
                .or_insert_with(|| toml::Value::Table(Default::default()));
        }
        *self = doc.try_into().map_err(|e: toml::de::Error| {
            PursuitError::config(format!("override `{assignment}`: {e}"))
        })?;
        Ok(())
    }

    pub fn workers(&self) -> usize {
        self.workers
            .or_else(|| std::env::var(WORKERS_ENV).ok()?.parse().ok())
            .filter(|&w| w > 0)
            .unwrap_or_else(|| {
                std::thread::available_parallelism().map_or(1, std::num::NonZeroUsize::get)
            })
    }

    pub fn membership_model(&self) -> MembershipModel {
        let coefs = if self.case.uses_track_record() {
            self.coalition.coefs
        } else {
            Coefficients::distance_only()
        };
        MembershipModel {
            coefs,
            distance: self.coalition.distance_term,
        }
    }

    pub fn formation_params(&self) -> FormationParams {
        FormationParams {
            model: self.membership_model(),
            life: self.coalition.life,
            score: self.coalition.score,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(PursuitError::config("repetitions must be at least 1"));
        }
        if self.max_ticks == 0 {
            return Err(PursuitError::config("max_ticks must be positive"));
        }
        if self.coalition.life == 0 {
            return Err(PursuitError::config("coalition life must be positive"));
        }
        let grid = self.grid.to_config();
        grid.validate()?;
        self.coalition.coefs.validate()?;
        self.clustering.validate()?;
        self.learning.validate()?;
        if !(self.field.spread > 0.0 && self.field.spread.is_finite()) {
            return Err(PursuitError::config("field spread must be positive"));
        }
        let a = &self.agents;
        if a.pursuer_range == 0 {
            return Err(PursuitError::config("pursuer_range must be at least 1"));
        }
        if a.reward_mag.is_some_and(|r| !(r >= 0.0 && r.is_finite())) {
            return Err(PursuitError::config("reward_mag must be finite and non-negative"));
        }
        match &a.scenario {
            Some(s) => {
                if s.evaders.iter().any(|e| !(1..=4).contains(&e.difficulty)) {
                    return Err(PursuitError::config("scenario difficulties must lie in 1..=4"));
                }
                if !s.evaders.is_empty() && s.pursuers.is_empty() {
                    return Err(PursuitError::config("scenario has evaders but no pursuers"));
                }
            }
            None => {
                if a.difficulty_min == 0
                    || a.difficulty_min > a.difficulty_max
                    || a.difficulty_max > 4
                {
                    return Err(PursuitError::config(
                        "difficulty bounds must satisfy 1 <= min <= max <= 4",
                    ));
                }
                if a.evaders > 0 && a.pursuers == 0 {
                    return Err(PursuitError::config("evaders need at least one pursuer"));
                }
                let free = grid.cell_count() - grid.obstacles.len();
                if a.pursuers + a.evaders > free {
                    return Err(PursuitError::config(format!(
                        "{} agents do not fit in {free} free cells",
                        a.pursuers + a.evaders
                    )));
                }
            }
        }
        Ok(())
    }

    /// Everything except the case and worker count, for paired comparisons.
    pub(crate) fn scenario_key(&self) -> ExperimentConfig {
        ExperimentConfig {
            case: Case::Agr,
            workers: None,
            ..self.clone()
        }
    }
}

fn parse_literal(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&wrapped) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}
