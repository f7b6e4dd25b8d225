//! The organizer protocol: evaluate evaders, group them, staff each group
//! greedily by membership degree, and manage coalition lifetimes with
//! rewards, punishments and reorganization.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::clustering::{ClusterAssignment, Clusterer};
use crate::error::{PursuitError, Result};
use crate::grid_world::{AgentId, EvaderState, Position, WorldState};
use crate::membership::{confidence, credit, membership_matrix_for, priority, MembershipModel};

/// How a pursuer's fit to a multi-evader group is scored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupScore {
    /// Best membership degree over the group's evaders.
    #[default]
    Max,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormationParams {
    pub model: MembershipModel,
    /// Lifetime of a new coalition, in ticks.
    pub life: u32,
    pub score: GroupScore,
}

impl Default for FormationParams {
    fn default() -> Self {
        FormationParams {
            model: MembershipModel::default(),
            life: 30,
            score: GroupScore::Max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coalition {
    pub group_id: usize,
    /// Every evader the coalition was formed for.
    pub evader_ids: Vec<AgentId>,
    /// Members of `evader_ids` caught so far.
    pub captured: Vec<AgentId>,
    pub pursuer_ids: Vec<AgentId>,
    pub life_remaining: u32,
    pub life: u32,
    /// Pursuers requested: the summed difficulty of the group.
    pub demand: usize,
    pub formed_tick: u64,
}

impl Coalition {
    pub fn understaffed(&self) -> bool {
        self.pursuer_ids.len() < self.demand
    }

    pub fn remaining_evaders(&self) -> impl Iterator<Item = AgentId> + '_ {
        self.evader_ids
            .iter()
            .copied()
            .filter(|e| !self.captured.contains(e))
    }

    pub fn is_complete(&self) -> bool {
        self.captured.len() == self.evader_ids.len()
    }

    pub fn has_pursuer(&self, id: AgentId) -> bool {
        self.pursuer_ids.contains(&id)
    }

    /// Ticks since formation.
    pub fn age(&self) -> u32 {
        self.life - self.life_remaining
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaderRecord {
    pub id: AgentId,
    pub pos: Position,
    pub reward_mag: f64,
    pub priority: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrganizerState {
    pub organizer_id: AgentId,
    pub evader_list: Vec<EvaderRecord>,
    pub coalitions: Vec<Coalition>,
    /// Number of reorganizations performed.
    pub flexibility_count: u32,
    next_group_id: usize,
}

impl OrganizerState {
    pub fn coalition_of_pursuer(&self, id: AgentId) -> Option<&Coalition> {
        self.coalitions.iter().find(|c| c.has_pursuer(id))
    }

    pub fn coalition_of_evader(&self, id: AgentId) -> Option<&Coalition> {
        self.coalitions.iter().find(|c| c.evader_ids.contains(&id))
    }

    /// Priority recorded for `id` at the last evaluation.
    pub fn recorded_priority(&self, id: AgentId) -> Option<f64> {
        self.evader_list.iter().find(|r| r.id == id).map(|r| r.priority)
    }

    /// Each pursuer in at most one coalition, each alive evader in exactly one.
    pub fn check_conservation(&self, world: &WorldState) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for c in &self.coalitions {
            for p in &c.pursuer_ids {
                if !seen.insert(*p) {
                    return Err(PursuitError::config(format!("pursuer {p} in two coalitions")));
                }
            }
        }
        for e in world.alive_evaders() {
            let n = self
                .coalitions
                .iter()
                .filter(|c| c.remaining_evaders().any(|x| x == e.id))
                .count();
            if n != 1 {
                return Err(PursuitError::config(format!(
                    "evader {} belongs to {n} coalitions",
                    e.id
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum CoalitionEvent {
    Formed {
        group_id: usize,
        evaders: Vec<AgentId>,
        pursuers: Vec<AgentId>,
        understaffed: bool,
    },
    Joined {
        group_id: usize,
        pursuers: Vec<AgentId>,
    },
    Captured {
        group_id: usize,
        evader: AgentId,
    },
    Completed {
        group_id: usize,
    },
    Expired {
        group_id: usize,
        uncaught: Vec<AgentId>,
    },
    Reorganized {
        count: u32,
    },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TickReport {
    pub events: Vec<CoalitionEvent>,
    pub reorganize_needed: bool,
}

/// Pursuer with the highest confidence + credit; ties go to the lowest id.
pub fn select_organizer(world: &WorldState) -> Result<AgentId> {
    let mut best: Option<(f64, AgentId)> = None;
    for p in &world.pursuers {
        let score = confidence(p) + credit(p);
        let better = match best {
            None => true,
            Some((s, id)) => score > s || (score == s && p.id < id),
        };
        if better {
            best = Some((score, p.id));
        }
    }
    best.map(|(_, id)| id).ok_or(PursuitError::NoPursuers)
}

/// Pursuers needed for a group: the sum of its difficulties.
pub fn staffing_demand(group: &[&EvaderState]) -> Result<usize> {
    if group.is_empty() {
        return Err(PursuitError::EmptyGroup);
    }
    Ok(group.iter().map(|e| e.difficulty as usize).sum())
}

fn evaluate(world: &WorldState) -> Vec<EvaderRecord> {
    world
        .alive_evaders()
        .map(|e| EvaderRecord {
            id: e.id,
            pos: e.pos,
            reward_mag: e.reward_mag,
            priority: priority(e, world),
        })
        .collect()
}

/// Forms the initial coalitions for every alive evader.
pub fn form_coalitions(
    world: &mut WorldState,
    assignment: &ClusterAssignment,
    params: &FormationParams,
) -> Result<(OrganizerState, Vec<CoalitionEvent>)> {
    if assignment.evader_ids.is_empty() {
        return Err(PursuitError::EmptyAssignment);
    }
    if let Some(e) = world
        .alive_evaders()
        .find(|e| !assignment.evader_ids.contains(&e.id))
    {
        return Err(PursuitError::UncoveredEvader(e.id));
    }
    let mut state = OrganizerState {
        organizer_id: select_organizer(world)?,
        evader_list: evaluate(world),
        coalitions: Vec::new(),
        flexibility_count: 0,
        next_group_id: 0,
    };
    let mut free: Vec<AgentId> = world.pursuers.iter().map(|p| p.id).collect();
    let events = staff_groups(&mut state, world, assignment, params, &mut free)?;
    Ok((state, events))
}

struct ScoredGroup<'a> {
    label: usize,
    evaders: Vec<&'a EvaderState>,
    priority: f64,
}

fn group_score(
    world: &WorldState,
    evaders: &[&EvaderState],
    pursuer: AgentId,
    params: &FormationParams,
) -> f64 {
    let p = world.pursuer(pursuer).expect("free pursuers exist");
    let degrees = evaders
        .iter()
        .map(|e| params.model.degree(e, p, &world.config));
    match params.score {
        GroupScore::Max => degrees.fold(f64::NEG_INFINITY, f64::max),
        GroupScore::Mean => degrees.sum::<f64>() / evaders.len() as f64,
    }
}

/// Ranks `free` pursuers by fit to `evaders`, best first, ties by id.
fn rank_pursuers(
    world: &WorldState,
    evaders: &[&EvaderState],
    free: &[AgentId],
    params: &FormationParams,
) -> Vec<(AgentId, f64)> {
    let mut scored: Vec<(AgentId, f64)> = free
        .iter()
        .map(|&id| (id, group_score(world, evaders, id, params)))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored
}

fn staff_groups(
    state: &mut OrganizerState,
    world: &mut WorldState,
    assignment: &ClusterAssignment,
    params: &FormationParams,
    free: &mut Vec<AgentId>,
) -> Result<Vec<CoalitionEvent>> {
    let groups = assignment.groups();
    let mut scored: Vec<ScoredGroup> = Vec::with_capacity(groups.len());
    for (label, ids) in groups.iter().enumerate() {
        let evaders: Vec<&EvaderState> = ids
            .iter()
            .map(|id| world.evader(*id).ok_or(PursuitError::UnknownAgent(*id)))
            .collect::<Result<_>>()?;
        let priority = evaders.iter().map(|e| priority(e, world)).sum();
        scored.push(ScoredGroup {
            label,
            evaders,
            priority,
        });
    }
    scored.sort_by(|a, b| {
        b.priority
            .partial_cmp(&a.priority)
            .unwrap_or(Ordering::Equal)
            .then(a.label.cmp(&b.label))
    });

    let mut formed = Vec::with_capacity(scored.len());
    for g in &scored {
        let demand = staffing_demand(&g.evaders)?;
        let ranked = rank_pursuers(world, &g.evaders, free, params);
        let chosen: Vec<AgentId> = ranked.iter().take(demand).map(|(id, _)| *id).collect();
        free.retain(|id| !chosen.contains(id));
        formed.push(Coalition {
            group_id: state.next_group_id,
            evader_ids: g.evaders.iter().map(|e| e.id).collect(),
            captured: Vec::new(),
            pursuer_ids: chosen,
            life_remaining: params.life,
            life: params.life,
            demand,
            formed_tick: world.tick,
        });
        state.next_group_id += 1;
    }

    let mut events = Vec::with_capacity(formed.len());
    for c in formed {
        // one task per evader in the group
        let tasks = c.evader_ids.len() as u32;
        for id in &c.pursuer_ids {
            world.pursuer_mut(*id).expect("staffed pursuer exists").c_t += tasks;
        }
        events.push(CoalitionEvent::Formed {
            group_id: c.group_id,
            evaders: c.evader_ids.clone(),
            pursuers: c.pursuer_ids.clone(),
            understaffed: c.understaffed(),
        });
        state.coalitions.push(c);
    }
    Ok(events)
}

/// Advances every coalition by one tick: rewards captures, ages lifetimes
/// and punishes expired coalitions. Finished coalitions are dissolved.
pub fn tick_coalitions(state: &mut OrganizerState, world: &mut WorldState) -> TickReport {
    let mut report = TickReport::default();
    let mut keep = Vec::with_capacity(state.coalitions.len());
    for mut c in std::mem::take(&mut state.coalitions) {
        let newly: Vec<AgentId> = c
            .remaining_evaders()
            .filter(|id| world.evader(*id).is_some_and(|e| e.captured))
            .collect();
        for e in newly {
            c.captured.push(e);
            for p in &c.pursuer_ids {
                world.pursuer_mut(*p).expect("member exists").c_s += 1;
            }
            report.events.push(CoalitionEvent::Captured {
                group_id: c.group_id,
                evader: e,
            });
        }
        c.life_remaining = c.life_remaining.saturating_sub(1);
        if c.is_complete() {
            report.events.push(CoalitionEvent::Completed { group_id: c.group_id });
            report.reorganize_needed = true;
        } else if c.life_remaining == 0 {
            let uncaught: Vec<AgentId> = c.remaining_evaders().collect();
            for p in &c.pursuer_ids {
                world.pursuer_mut(*p).expect("member exists").c_b += uncaught.len() as u32;
            }
            report.events.push(CoalitionEvent::Expired {
                group_id: c.group_id,
                uncaught,
            });
            report.reorganize_needed = true;
        } else {
            keep.push(c);
        }
    }
    state.coalitions = keep;
    report
}

/// Re-forms coalitions for evaders no longer covered, using the pursuers
/// not held by a surviving coalition. Surviving coalitions keep their
/// members; understaffed ones may absorb leftover pursuers.
pub fn reorganize(
    state: &mut OrganizerState,
    world: &mut WorldState,
    clusterer: &mut Clusterer,
    params: &FormationParams,
) -> Result<Vec<CoalitionEvent>> {
    state.flexibility_count += 1;
    let mut events = vec![CoalitionEvent::Reorganized {
        count: state.flexibility_count,
    }];
    if world.all_captured() {
        return Ok(events);
    }
    state.organizer_id = select_organizer(world)?;
    state.evader_list = evaluate(world);

    let mut free: Vec<AgentId> = world
        .pursuers
        .iter()
        .map(|p| p.id)
        .filter(|id| state.coalition_of_pursuer(*id).is_none())
        .collect();
    let orphans: Vec<&EvaderState> = world
        .alive_evaders()
        .filter(|e| state.coalition_of_evader(e.id).is_none())
        .collect();
    if !orphans.is_empty() {
        let matrix = membership_matrix_for(world, &orphans, &params.model)?;
        let assignment = clusterer.run(&matrix)?;
        events.extend(staff_groups(state, world, &assignment, params, &mut free)?);
    }
    events.extend(top_up(state, world, params, &mut free));
    Ok(events)
}

fn top_up(
    state: &mut OrganizerState,
    world: &mut WorldState,
    params: &FormationParams,
    free: &mut Vec<AgentId>,
) -> Vec<CoalitionEvent> {
    let mut events = Vec::new();
    for i in 0..state.coalitions.len() {
        if free.is_empty() {
            break;
        }
        let c = &state.coalitions[i];
        if !c.understaffed() {
            continue;
        }
        let evaders: Vec<&EvaderState> = c
            .remaining_evaders()
            .filter_map(|id| world.evader(id))
            .collect();
        let missing = c.demand - c.pursuer_ids.len();
        let chosen: Vec<AgentId> = rank_pursuers(world, &evaders, free, params)
            .into_iter()
            .take(missing)
            .map(|(id, _)| id)
            .collect();
        let tasks = evaders.len() as u32;
        free.retain(|id| !chosen.contains(id));
        for id in &chosen {
            world.pursuer_mut(*id).expect("free pursuer exists").c_t += tasks;
        }
        let c = &mut state.coalitions[i];
        c.pursuer_ids.extend(&chosen);
        events.push(CoalitionEvent::Joined {
            group_id: c.group_id,
            pursuers: chosen,
        });
    }
    events
}
