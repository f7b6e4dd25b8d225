use std::collections::BTreeMap;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{EvaderPolicy, ExperimentConfig};
use crate::clustering::{ClusterAssignment, ClusterMethod, Clusterer};
use crate::coalition::{
    form_coalitions, reorganize, tick_coalitions, CoalitionEvent, FormationParams, OrganizerState,
};
use crate::error::{PursuitError, Result};
use crate::grid_world::{
    Action, AgentId, AgentKind, EvaderState, Position, PursuerState, WorldState,
};
use crate::learning::{
    evader_policy_step, nearest_pursuer_sq, pursuer_policy_step, q_update, reward_field,
    MoveModel, QTable, RewardField, TransitionRecord, Window,
};
use crate::membership::membership_matrix;
use crate::rng::{agent_rng, clustering_rng, placement_rng, SimRng};

/// Outcome of one simulated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub seed: u64,
    /// Tick of the last capture, or `max_ticks` if the run was cut off.
    pub capture_ticks: u64,
    /// False when the run hit `max_ticks` with evaders still free.
    pub completed: bool,
    pub flexibility: u32,
    /// Reward collected by all coalition members, per tick.
    pub reward_trajectory: Vec<f64>,
    /// Capture tick of each evader in id order; `None` if never caught.
    pub per_evader_capture_ticks: Vec<Option<u64>>,
}

impl RunMetrics {
    pub fn cumulative_reward(&self) -> f64 {
        self.reward_trajectory.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PursuerRecord {
    pub id: AgentId,
    pub x: usize,
    pub y: usize,
    pub group: Option<usize>,
    pub c_s: u32,
    pub c_t: u32,
    pub c_b: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaderRecord {
    pub id: AgentId,
    pub x: usize,
    pub y: usize,
    pub difficulty: u32,
    pub captured: bool,
}

/// Everything that happened in one tick, for replay traces.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TickRecord {
    pub tick: u64,
    pub reward: f64,
    pub pursuers: Vec<PursuerRecord>,
    pub evaders: Vec<EvaderRecord>,
    pub events: Vec<CoalitionEvent>,
}

/// Places agents from the scenario or uniformly at random on free cells.
/// Pursuers take ids `0..n`, evaders follow.
pub fn initial_world(cfg: &ExperimentConfig, seed: u64) -> Result<WorldState> {
    let grid = cfg.grid.to_config();
    let range = cfg.agents.pursuer_range;
    let make_evader = |i: usize, n_p: usize, pos: Position, d: u32| {
        let mut e = EvaderState::new(AgentId((n_p + i) as u32), pos, d);
        if let Some(r) = cfg.agents.reward_mag {
            e.reward_mag = r;
        }
        e
    };
    let (pursuers, evaders) = match &cfg.agents.scenario {
        Some(s) => {
            let n_p = s.pursuers.len();
            let ps = s
                .pursuers
                .iter()
                .enumerate()
                .map(|(i, &p)| PursuerState::new(AgentId(i as u32), p, range))
                .collect();
            let es = s
                .evaders
                .iter()
                .enumerate()
                .map(|(i, e)| make_evader(i, n_p, Position::new(e.x, e.y), e.difficulty))
                .collect();
            (ps, es)
        }
        None => {
            let mut rng = placement_rng(seed);
            let free: Vec<Position> = (0..grid.cell_count())
                .map(|i| grid.position(i))
                .filter(|p| !grid.obstacles.contains(p))
                .collect();
            let (n_p, n_e) = (cfg.agents.pursuers, cfg.agents.evaders);
            let picks = index::sample(&mut rng, free.len(), n_p + n_e).into_vec();
            let ps = picks[..n_p]
                .iter()
                .enumerate()
                .map(|(i, &k)| PursuerState::new(AgentId(i as u32), free[k], range))
                .collect();
            let (lo, hi) = (cfg.agents.difficulty_min, cfg.agents.difficulty_max);
            let es = picks[n_p..]
                .iter()
                .enumerate()
                .map(|(i, &k)| make_evader(i, n_p, free[k], rng.gen_range(lo..=hi)))
                .collect();
            (ps, es)
        }
    };
    WorldState::new(grid, pursuers, evaders)
}

/// A run in progress. Drive it with [`Simulation::step`] or
/// [`Simulation::run_to_end`].
pub struct Simulation {
    cfg: ExperimentConfig,
    seed: u64,
    world: WorldState,
    organizer: Option<OrganizerState>,
    clusterer: Clusterer,
    formation: FormationParams,
    model: MoveModel,
    tables: BTreeMap<usize, QTable>,
    pursuer_rngs: Vec<SimRng>,
    evader_rngs: Vec<SimRng>,
    evader_tables: Vec<QTable>,
    occupied: Vec<bool>,
    reward_trajectory: Vec<f64>,
    capture_ticks: Vec<Option<u64>>,
    pending_events: Vec<CoalitionEvent>,
}

impl Simulation {
    pub fn new(cfg: &ExperimentConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut world = initial_world(cfg, seed)?;
        let formation = cfg.formation_params();
        let mut clusterer = Clusterer::new(
            cfg.case.cluster_method(),
            cfg.clustering.clone(),
            clustering_rng(seed),
        );
        let mut organizer = None;
        let mut pending_events = Vec::new();
        if world.alive_evader_count() > 0 {
            let matrix = membership_matrix(&world, &formation.model)?;
            let assignment = match clusterer.method {
                ClusterMethod::Singleton => ClusterAssignment::singleton(matrix.evader_ids.clone()),
                _ => clusterer.run(&matrix)?,
            };
            let (state, events) = form_coalitions(&mut world, &assignment, &formation)?;
            organizer = Some(state);
            pending_events = events;
        }
        let track_record = cfg.case.uses_track_record();
        if !track_record {
            clear_counters(&mut world);
        }
        let model = MoveModel::new(&world, AgentKind::Pursuer);
        let pursuer_rngs = world.pursuers.iter().map(|p| agent_rng(seed, p.id)).collect();
        let evader_rngs = world.evaders.iter().map(|e| agent_rng(seed, e.id)).collect();
        let evader_tables = match cfg.evader_policy {
            EvaderPolicy::Escape => Vec::new(),
            EvaderPolicy::Learning => world
                .evaders
                .iter()
                .map(|e| QTable::for_world(e.id, &world, &cfg.learning))
                .collect(),
        };
        let n_e = world.evaders.len();
        let cells = world.config.cell_count();
        Ok(Simulation {
            cfg: cfg.clone(),
            seed,
            world,
            organizer,
            clusterer,
            formation,
            model,
            tables: BTreeMap::new(),
            pursuer_rngs,
            evader_rngs,
            evader_tables,
            occupied: vec![false; cells],
            reward_trajectory: Vec::new(),
            capture_ticks: vec![None; n_e],
            pending_events,
        })
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn organizer(&self) -> Option<&OrganizerState> {
        self.organizer.as_ref()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_finished(&self) -> bool {
        self.world.all_captured() || self.world.tick >= self.cfg.max_ticks
    }

    /// State before the first step, with the formation events.
    pub fn initial_record(&mut self) -> TickRecord {
        let events = std::mem::take(&mut self.pending_events);
        self.record(0.0, events)
    }

    /// Advances one tick. Returns `None` once the run is over.
    pub fn step(&mut self) -> Result<Option<TickRecord>> {
        if self.is_finished() {
            return Ok(None);
        }
        let mut events = std::mem::take(&mut self.pending_events);
        let fields = self.plan()?;
        let actions = self.choose_actions(&fields);
        let before: Vec<Position> = self.world.pursuers.iter().map(|p| p.pos).collect();
        let evader_before: Vec<Position> = self.world.evaders.iter().map(|e| e.pos).collect();
        let outcome = self.world.step_in_place(&actions)?;
        let tick = self.world.tick;
        for id in &outcome.captured {
            if let Some(i) = self.world.evaders.iter().position(|e| e.id == *id) {
                self.capture_ticks[i] = Some(tick);
            }
        }

        let reward = self.learn(&fields, &actions, &before);
        self.learn_evaders(&actions, &evader_before);
        self.reward_trajectory.push(reward);

        let track_record = self.cfg.case.uses_track_record();
        if let Some(org) = self.organizer.as_mut() {
            let report = tick_coalitions(org, &mut self.world);
            events.extend(report.events);
            if report.reorganize_needed && !self.world.all_captured() {
                events.extend(reorganize(
                    org,
                    &mut self.world,
                    &mut self.clusterer,
                    &self.formation,
                )?);
            }
            let live: Vec<usize> = org.coalitions.iter().map(|c| c.group_id).collect();
            self.tables.retain(|g, _| live.contains(g));
        }
        if !track_record {
            clear_counters(&mut self.world);
        }
        Ok(Some(self.record(reward, events)))
    }

    pub fn run_to_end(mut self) -> Result<RunMetrics> {
        while self.step()?.is_some() {}
        Ok(self.metrics())
    }

    pub fn metrics(&self) -> RunMetrics {
        let completed = self.world.all_captured();
        RunMetrics {
            seed: self.seed,
            capture_ticks: if completed {
                self.world.tick
            } else {
                self.cfg.max_ticks
            },
            completed,
            flexibility: self.organizer.as_ref().map_or(0, |o| o.flexibility_count),
            reward_trajectory: self.reward_trajectory.clone(),
            per_evader_capture_ticks: self.capture_ticks.clone(),
        }
    }

    /// Refreshes each staffed coalition's field and runs its planning sweeps.
    fn plan(&mut self) -> Result<BTreeMap<usize, RewardField>> {
        let mut fields = BTreeMap::new();
        let Some(org) = self.organizer.as_ref() else {
            return Ok(fields);
        };
        self.occupied.iter_mut().for_each(|o| *o = false);
        for p in &self.world.pursuers {
            self.occupied[self.world.config.index(p.pos)] = true;
        }
        for e in self.world.alive_evaders() {
            self.occupied[self.world.config.index(e.pos)] = true;
        }
        let q = &self.cfg.learning;
        for c in org.coalitions.iter().filter(|c| !c.pursuer_ids.is_empty()) {
            let field = reward_field(c, &self.world, &self.cfg.field, |id| {
                org.recorded_priority(id)
            })?;
            let fresh = !self.tables.contains_key(&c.group_id);
            let table = self.tables.entry(c.group_id).or_insert_with(|| {
                QTable::for_world(AgentId(c.group_id as u32), &self.world, q)
            });
            table.epsilon = q.epsilon_at(c.age(), c.life);
            let points = c
                .pursuer_ids
                .iter()
                .filter_map(|id| self.world.pursuer(*id).map(|p| p.pos))
                .chain(c.remaining_evaders().filter_map(|id| self.world.evader(id).map(|e| e.pos)));
            let window = Window::around(
                points,
                q.planning_margin,
                self.world.width(),
                self.world.height(),
            );
            let sweeps = if fresh { q.initial_sweeps } else { q.planning_sweeps };
            table.plan(
                &field,
                &self.model,
                Some(&self.occupied),
                window,
                sweeps,
                q.planning_alpha,
            );
            fields.insert(c.group_id, field);
        }
        Ok(fields)
    }

    fn choose_actions(&mut self, fields: &BTreeMap<usize, RewardField>) -> BTreeMap<AgentId, Action> {
        let mut actions = BTreeMap::new();
        let org = self.organizer.as_ref();
        for (i, p) in self.world.pursuers.iter().enumerate() {
            let coalition = org
                .and_then(|o| o.coalition_of_pursuer(p.id))
                .filter(|c| fields.contains_key(&c.group_id));
            let table = coalition.and_then(|c| self.tables.get(&c.group_id));
            let a = pursuer_policy_step(p.pos, coalition, table, &self.world, &mut self.pursuer_rngs[i]);
            actions.insert(p.id, a);
        }
        for (i, e) in self.world.evaders.iter().enumerate() {
            if !e.alive() {
                continue;
            }
            let a = match self.cfg.evader_policy {
                EvaderPolicy::Escape => evader_policy_step(e, &self.world),
                EvaderPolicy::Learning => {
                    let legal = self.world.legal_actions(e.pos, AgentKind::Evader);
                    let table = &self.evader_tables[i];
                    let rng = &mut self.evader_rngs[i];
                    if rng.gen::<f64>() < table.epsilon {
                        *legal.choose(rng).unwrap_or(&Action::Stay)
                    } else {
                        table.greedy(e.pos, &legal).unwrap_or(Action::Stay)
                    }
                }
            };
            actions.insert(e.id, a);
        }
        actions
    }

    /// Online updates from the transitions just taken. Returns the reward
    /// collected by all coalition members.
    fn learn(
        &mut self,
        fields: &BTreeMap<usize, RewardField>,
        actions: &BTreeMap<AgentId, Action>,
        before: &[Position],
    ) -> f64 {
        let Some(org) = self.organizer.as_ref() else {
            return 0.0;
        };
        let mut total = 0.0;
        for (i, p) in self.world.pursuers.iter().enumerate() {
            let Some(c) = org.coalition_of_pursuer(p.id) else {
                continue;
            };
            let (Some(field), Some(table)) = (fields.get(&c.group_id), self.tables.get_mut(&c.group_id))
            else {
                continue;
            };
            let tr = TransitionRecord {
                s_t: before[i],
                a_t: actions[&p.id],
                r_t: field.at(p.pos),
                s_next: p.pos,
            };
            total += tr.r_t;
            q_update(table, &tr);
        }
        total
    }

    fn learn_evaders(&mut self, actions: &BTreeMap<AgentId, Action>, before: &[Position]) {
        if self.evader_tables.is_empty() {
            return;
        }
        for (i, e) in self.world.evaders.iter().enumerate() {
            let Some(&a) = actions.get(&e.id) else {
                continue;
            };
            let r = (nearest_pursuer_sq(e.pos, &self.world) as f64).sqrt();
            q_update(
                &mut self.evader_tables[i],
                &TransitionRecord {
                    s_t: before[i],
                    a_t: a,
                    r_t: r,
                    s_next: e.pos,
                },
            );
        }
    }

    fn record(&self, reward: f64, events: Vec<CoalitionEvent>) -> TickRecord {
        let org = self.organizer.as_ref();
        TickRecord {
            tick: self.world.tick,
            reward,
            pursuers: self
                .world
                .pursuers
                .iter()
                .map(|p| PursuerRecord {
                    id: p.id,
                    x: p.pos.x,
                    y: p.pos.y,
                    group: org.and_then(|o| o.coalition_of_pursuer(p.id)).map(|c| c.group_id),
                    c_s: p.c_s,
                    c_t: p.c_t,
                    c_b: p.c_b,
                })
                .collect(),
            evaders: self
                .world
                .evaders
                .iter()
                .map(|e| EvaderRecord {
                    id: e.id,
                    x: e.pos.x,
                    y: e.pos.y,
                    difficulty: e.difficulty,
                    captured: e.captured,
                })
                .collect(),
            events,
        }
    }
}

// AGR keeps no task history.
fn clear_counters(world: &mut WorldState) {
    for p in &mut world.pursuers {
        p.c_s = 0;
        p.c_t = 0;
        p.c_b = 0;
    }
}

/// Runs one seed to completion.
pub fn run_single(cfg: &ExperimentConfig, seed: u64) -> Result<RunMetrics> {
    Simulation::new(cfg, seed)?
        .run_to_end()
        .map_err(|e| match e {
            PursuitError::InvalidConfig(_) => e,
            other => PursuitError::Run {
                seed,
                source: Box::new(other),
            },
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::config::{Case, EvaderSpot, Scenario};

    fn tiny(case: Case) -> ExperimentConfig {
        let mut c = ExperimentConfig::for_case(case);
        c.grid.width = 20;
        c.grid.height = 20;
        c.agents.pursuers = 8;
        c.agents.evaders = 2;
        c.agents.pursuer_range = 3;
        c.max_ticks = 2_000;
        c
    }

    #[test]
    fn lone_pursuer_catches_an_easy_evader() {
        let mut c = ExperimentConfig::for_case(Case::Agrmf);
        c.grid.width = 5;
        c.grid.height = 5;
        c.agents.scenario = Some(Scenario {
            pursuers: vec![Position::new(0, 0)],
            evaders: vec![EvaderSpot { x: 3, y: 3, difficulty: 1 }],
        });
        let m = run_single(&c, 1).unwrap();
        assert!(m.completed);
        assert!(m.capture_ticks < 10_000);
        assert_eq!(m.per_evader_capture_ticks, vec![Some(m.capture_ticks)]);
    }

    #[test]
    fn no_evaders_means_instant_success() {
        let mut c = tiny(Case::SofmAgrmf);
        c.agents.evaders = 0;
        let m = run_single(&c, 3).unwrap();
        assert_eq!(m.capture_ticks, 0);
        assert!(m.completed);
        assert!(m.reward_trajectory.is_empty());
    }

    #[test]
    fn same_seed_same_metrics() {
        for case in Case::ALL {
            let c = tiny(case);
            assert_eq!(run_single(&c, 5).unwrap(), run_single(&c, 5).unwrap(), "{case}");
        }
    }

    #[test]
    fn runs_finish_and_keep_invariants() {
        for case in Case::ALL {
            let c = tiny(case);
            let mut sim = Simulation::new(&c, 9).unwrap();
            let mut captured = 0;
            while let Some(rec) = sim.step().unwrap() {
                sim.world().check_invariants().unwrap();
                if let Some(org) = sim.organizer() {
                    org.check_conservation(sim.world()).unwrap();
                }
                let now = rec.evaders.iter().filter(|e| e.captured).count();
                assert!(now >= captured);
                captured = now;
            }
            let m = sim.metrics();
            assert!(m.capture_ticks <= c.max_ticks);
        }
    }

    #[test]
    fn placement_is_seeded_and_disjoint() {
        let c = ExperimentConfig::default();
        let a = initial_world(&c, 4).unwrap();
        let b = initial_world(&c, 4).unwrap();
        assert_eq!(a.snapshot_json(), b.snapshot_json());
        let d = initial_world(&c, 5).unwrap();
        assert_ne!(a.snapshot_json(), d.snapshot_json());
        assert!(a.evaders.iter().all(|e| (2..=4).contains(&e.difficulty)));
        assert_eq!(a.evaders[0].id, AgentId(33));
    }

    #[test]
    fn agr_keeps_no_history() {
        let c = tiny(Case::Agr);
        let mut sim = Simulation::new(&c, 2).unwrap();
        while sim.step().unwrap().is_some() {
            assert!(sim.world().pursuers.iter().all(|p| p.c_t == 0 && p.c_s == 0));
        }
    }

    #[test]
    fn learning_evaders_still_terminate() {
        let mut c = tiny(Case::Agrmf);
        c.evader_policy = EvaderPolicy::Learning;
        let m = run_single(&c, 8).unwrap();
        assert!(m.capture_ticks <= c.max_ticks);
    }
}
