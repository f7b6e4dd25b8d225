//! Motion strategy: the Gaussian group reward field, tabular Q-learning for
//! pursuers, and the evader escape policy.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::coalition::Coalition;
use crate::error::{PursuitError, Result};
use crate::grid_world::{Action, AgentId, AgentKind, EvaderState, Position, WorldState};
use crate::membership::priority;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QParams {
    pub alpha: f64,
    pub discount: f64,
    /// Exploration at coalition formation, decayed linearly to `epsilon_end`
    /// over the coalition's life.
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Model-based backups over the reward field per tick.
    pub planning_sweeps: usize,
    /// Sweeps run when a coalition's table is fresh.
    pub initial_sweeps: usize,
    /// Step size of planning backups. The field is a known deterministic
    /// model, so full backups are the default.
    pub planning_alpha: f64,
    /// Cells of margin around the coalition's bounding box swept each tick.
    pub planning_margin: usize,
}

impl Default for QParams {
    fn default() -> Self {
        QParams {
            alpha: 0.3,
            discount: 0.9,
            epsilon_start: 0.3,
            epsilon_end: 0.05,
            planning_sweeps: 2,
            initial_sweeps: 4,
            planning_alpha: 1.0,
            planning_margin: 4,
        }
    }
}

impl QParams {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.alpha) || !unit(self.planning_alpha) {
            return Err(PursuitError::config("learning rates must lie in [0, 1]"));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(PursuitError::config("discount must lie in [0, 1)"));
        }
        if !unit(self.epsilon_start) || !unit(self.epsilon_end) {
            return Err(PursuitError::config("exploration rates must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Exploration after `age` ticks of a coalition living `life` ticks.
    pub fn epsilon_at(&self, age: u32, life: u32) -> f64 {
        if life == 0 {
            return self.epsilon_end;
        }
        let frac = (f64::from(age) / f64::from(life)).min(1.0);
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }
}

/// Whether evader priority inside the field follows the live world or is
/// fixed when the coalition forms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorityMode {
    #[default]
    Recompute,
    Frozen,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldParams {
    /// Variance multiplier of each evader's Gaussian bump; 1 is one cell.
    pub spread: f64,
    #[serde(default)]
    pub priority: PriorityMode,
}

impl Default for FieldParams {
    fn default() -> Self {
        FieldParams {
            spread: 1.0,
            priority: PriorityMode::Recompute,
        }
    }
}

/// Immediate payoff of a coalition at every cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardField {
    pub group_id: usize,
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl RewardField {
    /// Sum of `weight * exp(-((x - xi)^2 + (y - yi)^2) / (2 * spread))` over
    /// `peaks`, where each weight is the evader's reward times its priority.
    pub fn from_peaks(
        group_id: usize,
        width: usize,
        height: usize,
        peaks: &[(Position, f64)],
        spread: f64,
    ) -> Self {
        let mut values = vec![0.0; width * height];
        let mut ex = vec![0.0; width];
        let mut ey = vec![0.0; height];
        for &(pos, weight) in peaks {
            // the kernel factorises over the axes
            for (x, v) in ex.iter_mut().enumerate() {
                let d = x as f64 - pos.x as f64;
                *v = (-0.5 * d * d / spread).exp();
            }
            for (y, v) in ey.iter_mut().enumerate() {
                let d = y as f64 - pos.y as f64;
                *v = weight * (-0.5 * d * d / spread).exp();
            }
            for (y, &wy) in ey.iter().enumerate() {
                if wy == 0.0 {
                    continue;
                }
                let row = &mut values[y * width..(y + 1) * width];
                for (cell, &wx) in row.iter_mut().zip(&ex) {
                    *cell += wy * wx;
                }
            }
        }
        RewardField {
            group_id,
            width,
            height,
            values,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn at(&self, p: Position) -> f64 {
        self.values[p.y * self.width + p.x]
    }

    pub(crate) fn at_index(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// Sum over all cells.
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Alive evaders of `group` with their field weights `Re * pr`.
pub fn field_peaks(
    group: &Coalition,
    world: &WorldState,
    mode: PriorityMode,
    frozen: impl Fn(AgentId) -> Option<f64>,
) -> Vec<(Position, f64)> {
    group
        .remaining_evaders()
        .filter_map(|id| world.evader(id))
        .filter(|e| e.alive())
        .map(|e| {
            let pr = match mode {
                PriorityMode::Recompute => priority(e, world),
                PriorityMode::Frozen => frozen(e.id).unwrap_or_else(|| priority(e, world)),
            };
            (e.pos, e.reward_mag * pr)
        })
        .collect()
}

/// The group's payoff at `(x, y)` evaluated term by term from the live world.
pub fn group_reward(x: usize, y: usize, group: &Coalition, world: &WorldState) -> Result<f64> {
    group_reward_with_spread(x, y, group, world, 1.0)
}

pub fn group_reward_with_spread(
    x: usize,
    y: usize,
    group: &Coalition,
    world: &WorldState,
    spread: f64,
) -> Result<f64> {
    let alive: Vec<&EvaderState> = group
        .remaining_evaders()
        .filter_map(|id| world.evader(id))
        .filter(|e| e.alive())
        .collect();
    if alive.is_empty() {
        return Err(PursuitError::EmptyGroup);
    }
    Ok(alive
        .iter()
        .map(|e| {
            let dx = x as f64 - e.pos.x as f64;
            let dy = y as f64 - e.pos.y as f64;
            e.reward_mag * priority(e, world) * (-0.5 * (dx * dx + dy * dy) / spread).exp()
        })
        .sum())
}

pub fn reward_field(
    group: &Coalition,
    world: &WorldState,
    params: &FieldParams,
    frozen: impl Fn(AgentId) -> Option<f64>,
) -> Result<RewardField> {
    let peaks = field_peaks(group, world, params.priority, frozen);
    if peaks.is_empty() {
        return Err(PursuitError::EmptyGroup);
    }
    Ok(RewardField::from_peaks(
        group.group_id,
        world.width(),
        world.height(),
        &peaks,
        params.spread,
    ))
}

/// Static movement model of a grid: successor cell index of every action at
/// every cell, and which actions are legal there.
#[derive(Debug, Clone, PartialEq)]
pub struct MoveModel {
    width: usize,
    height: usize,
    successors: Vec<[u32; 5]>,
    legal: Vec<u8>,
}

impl MoveModel {
    pub fn new(world: &WorldState, kind: AgentKind) -> Self {
        let (w, h) = (world.width(), world.height());
        let mut successors = Vec::with_capacity(w * h);
        let mut legal = Vec::with_capacity(w * h);
        for i in 0..w * h {
            let pos = world.config.position(i);
            let mut succ = [i as u32; 5];
            let mut mask = 0u8;
            if !world.is_obstacle(pos) {
                for a in world.legal_actions(pos, kind) {
                    mask |= 1 << a.index();
                    succ[a.index()] = world.config.index(world.successor(pos, a)) as u32;
                }
            }
            successors.push(succ);
            legal.push(mask);
        }
        MoveModel {
            width: w,
            height: h,
            successors,
            legal,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn is_legal(&self, cell: usize, a: Action) -> bool {
        self.legal[cell] & (1 << a.index()) != 0
    }

    pub fn legal_actions(&self, cell: usize) -> impl Iterator<Item = Action> + '_ {
        Action::ALL.into_iter().filter(move |&a| self.is_legal(cell, a))
    }

    pub fn successor(&self, cell: usize, a: Action) -> usize {
        self.successors[cell][a.index()] as usize
    }

    pub fn index(&self, p: Position) -> usize {
        p.y * self.width + p.x
    }
}

/// One observed step of an agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub s_t: Position,
    pub a_t: Action,
    pub r_t: f64,
    pub s_next: Position,
}

/// Action values over own-position states. Unvisited entries are 0.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    pub owner: AgentId,
    pub alpha: f64,
    pub discount: f64,
    pub epsilon: f64,
    width: usize,
    q: Vec<[f64; 5]>,
    sweeps_done: usize,
}

impl QTable {
    pub fn new(owner: AgentId, width: usize, height: usize, alpha: f64, discount: f64, epsilon: f64) -> Self {
        QTable {
            owner,
            alpha,
            discount,
            epsilon,
            width,
            q: vec![[0.0; 5]; width * height],
            sweeps_done: 0,
        }
    }

    pub fn for_world(owner: AgentId, world: &WorldState, params: &QParams) -> Self {
        QTable::new(
            owner,
            world.width(),
            world.height(),
            params.alpha,
            params.discount,
            params.epsilon_start,
        )
    }

    fn idx(&self, p: Position) -> usize {
        p.y * self.width + p.x
    }

    pub fn get(&self, s: Position, a: Action) -> f64 {
        self.q[self.idx(s)][a.index()]
    }

    pub fn set(&mut self, s: Position, a: Action, v: f64) {
        let i = self.idx(s);
        self.q[i][a.index()] = v;
    }

    /// Largest value among `actions` at `s`; 0 when none are given.
    pub fn max_over(&self, s: Position, actions: &[Action]) -> f64 {
        let row = &self.q[self.idx(s)];
        actions
            .iter()
            .map(|a| row[a.index()])
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
            .unwrap_or(0.0)
    }

    /// Largest of the four move values at `s`.
    pub fn max_q(&self, s: Position) -> f64 {
        self.max_over(s, &Action::MOVES)
    }

    /// `argmax` over `actions` in their given order; the first maximum wins.
    pub fn greedy(&self, s: Position, actions: &[Action]) -> Option<Action> {
        let row = &self.q[self.idx(s)];
        let mut best: Option<(Action, f64)> = None;
        for &a in actions {
            let v = row[a.index()];
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((a, v));
            }
        }
        best.map(|(a, _)| a)
    }

    /// Multiplies all values at `s` by `factor`.
    pub fn scale_state(&mut self, s: Position, factor: f64) {
        let i = self.idx(s);
        for v in &mut self.q[i] {
            *v *= factor;
        }
    }

    fn max_legal(&self, cell: usize, model: &MoveModel) -> f64 {
        let row = &self.q[cell];
        let mut m: Option<f64> = None;
        for a in Action::ALL {
            if model.is_legal(cell, a) {
                m = Some(m.map_or(row[a.index()], |m| m.max(row[a.index()])));
            }
        }
        m.unwrap_or(0.0)
    }

    /// Model-based backups `Q(s,a) += step * (r(s') + discount * max Q(s') - Q(s,a))`
    /// over every cell in `window`. Successive sweeps cycle through the four
    /// row/column orders so values spread toward every quadrant. A move into
    /// a cell flagged in `occupied` is cancelled, as in the world step.
    pub fn plan(
        &mut self,
        field: &RewardField,
        model: &MoveModel,
        occupied: Option<&[bool]>,
        window: Window,
        sweeps: usize,
        step: f64,
    ) {
        let (nx, ny) = (window.x1 - window.x0, window.y1 - window.y0);
        for _ in 0..sweeps {
            let (down, right) = SWEEP_ORDERS[self.sweeps_done % 4];
            self.sweeps_done += 1;
            for j in 0..ny {
                let y = if down { window.y0 + j } else { window.y1 - 1 - j };
                for k in 0..nx {
                    let x = if right { window.x0 + k } else { window.x1 - 1 - k };
                    let cell = y * self.width + x;
                    for a in Action::ALL {
                        if !model.is_legal(cell, a) {
                            continue;
                        }
                        let mut next = model.successor(cell, a);
                        if occupied.is_some_and(|o| o[next]) {
                            next = cell;
                        }
                        let target = field.at_index(next) + self.discount * self.max_legal(next, model);
                        let q = &mut self.q[cell][a.index()];
                        *q += step * (target - *q);
                    }
                }
            }
        }
    }
}

const SWEEP_ORDERS: [(bool, bool); 4] = [(true, true), (false, false), (true, false), (false, true)];

/// Plain online Q-learning on a static field: `episodes` walks of
/// `steps` moves from uniformly drawn start cells, acting epsilon-greedily
/// and updating after every move.
pub fn train_static<R: Rng + ?Sized>(
    table: &mut QTable,
    field: &RewardField,
    model: &MoveModel,
    episodes: usize,
    steps: usize,
    rng: &mut R,
) {
    let cells: Vec<usize> = (0..model.width() * model.height())
        .filter(|&c| model.legal[c] != 0)
        .collect();
    if cells.is_empty() {
        return;
    }
    let mut legal = Vec::with_capacity(5);
    for _ in 0..episodes {
        let mut cell = *cells.choose(rng).expect("non-empty");
        for _ in 0..steps {
            legal.clear();
            legal.extend(model.legal_actions(cell));
            let s = Position::new(cell % model.width(), cell / model.width());
            let a = choose(table, s, &legal, rng);
            let next = model.successor(cell, a);
            let s_next = Position::new(next % model.width(), next / model.width());
            let tr = TransitionRecord {
                s_t: s,
                a_t: a,
                r_t: field.at_index(next),
                s_next,
            };
            q_update(table, &tr);
            cell = next;
        }
    }
}

/// Half-open rectangle of cells `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub x0: usize,
    pub x1: usize,
    pub y0: usize,
    pub y1: usize,
}

impl Window {
    pub fn full(width: usize, height: usize) -> Self {
        Window {
            x0: 0,
            x1: width,
            y0: 0,
            y1: height,
        }
    }

    /// Bounding box of `points` grown by `margin`, clipped to the grid.
    pub fn around(
        points: impl IntoIterator<Item = Position>,
        margin: usize,
        width: usize,
        height: usize,
    ) -> Self {
        let mut w = Window {
            x0: usize::MAX,
            x1: 0,
            y0: usize::MAX,
            y1: 0,
        };
        for p in points {
            w.x0 = w.x0.min(p.x);
            w.x1 = w.x1.max(p.x + 1);
            w.y0 = w.y0.min(p.y);
            w.y1 = w.y1.max(p.y + 1);
        }
        if w.x0 == usize::MAX {
            return Window::full(width, height);
        }
        Window {
            x0: w.x0.saturating_sub(margin),
            x1: (w.x1 + margin).min(width),
            y0: w.y0.saturating_sub(margin),
            y1: (w.y1 + margin).min(height),
        }
    }
}

/// One-step Q-learning update.
pub fn q_update(table: &mut QTable, tr: &TransitionRecord) {
    let next = table.max_q(tr.s_next);
    let old = table.get(tr.s_t, tr.a_t);
    let new = (1.0 - table.alpha) * old + table.alpha * (tr.r_t + table.discount * next);
    table.set(tr.s_t, tr.a_t, new);
}

/// Epsilon-greedy choice among the pursuer's legal actions at `s`.
pub fn select_action<R: Rng + ?Sized>(
    table: &QTable,
    s: Position,
    world: &WorldState,
    rng: &mut R,
) -> Action {
    let legal = world.legal_actions(s, AgentKind::Pursuer);
    choose(table, s, &legal, rng)
}

fn choose<R: Rng + ?Sized>(table: &QTable, s: Position, legal: &[Action], rng: &mut R) -> Action {
    if legal.is_empty() {
        return Action::Stay;
    }
    if table.epsilon > 0.0 && rng.gen::<f64>() < table.epsilon {
        return *legal.choose(rng).expect("non-empty");
    }
    table.greedy(s, legal).expect("non-empty")
}

/// Action of an assigned pursuer under its coalition's field. The caller
/// completes the transition once the world has stepped, reading the reward
/// from `field` at the cell actually reached.
pub fn pursuer_policy_step<R: Rng + ?Sized>(
    p_pos: Position,
    coalition: Option<&Coalition>,
    table: Option<&QTable>,
    world: &WorldState,
    rng: &mut R,
) -> Action {
    let legal = world.legal_actions(p_pos, AgentKind::Pursuer);
    match (coalition, table) {
        (Some(_), Some(table)) => choose(table, p_pos, &legal, rng),
        _ => legal.choose(rng).copied().unwrap_or(Action::Stay),
    }
}

/// Completes a pursuer transition after the world step.
pub fn complete_transition(
    s_t: Position,
    a_t: Action,
    s_next: Position,
    field: &RewardField,
) -> TransitionRecord {
    TransitionRecord {
        s_t,
        a_t,
        r_t: field.at(s_next),
        s_next,
    }
}

/// Escape heuristic: the free neighbouring cell (or staying put) that
/// maximizes the distance to the nearest pursuer. Ties follow action order.
pub fn evader_policy_step(e: &EvaderState, world: &WorldState) -> Action {
    let mut best: Option<(Action, usize)> = None;
    for a in world.legal_actions(e.pos, AgentKind::Evader) {
        let to = world.successor(e.pos, a);
        if a != Action::Stay && !world.is_free(to) {
            continue;
        }
        let clearance = nearest_pursuer_sq(to, world);
        if best.is_none_or(|(_, b)| clearance > b) {
            best = Some((a, clearance));
        }
    }
    match best {
        Some((a, _)) => a,
        None if world.config.evader_stay => Action::Stay,
        None => world
            .legal_actions(e.pos, AgentKind::Evader)
            .first()
            .copied()
            .unwrap_or(Action::Stay),
    }
}

/// Squared Euclidean distance from `p` to the nearest pursuer.
pub fn nearest_pursuer_sq(p: Position, world: &WorldState) -> usize {
    world
        .pursuers
        .iter()
        .map(|q| q.pos.distance_sq(p))
        .min()
        .unwrap_or(usize::MAX)
}

/// Learned escape: epsilon-greedy Q-learning whose reward is the distance to
/// the nearest pursuer after the move. Not part of the default setup.
pub fn evader_learning_step<R: Rng + ?Sized>(
    e: &EvaderState,
    table: &QTable,
    world: &WorldState,
    rng: &mut R,
) -> Action {
    let legal = world.legal_actions(e.pos, AgentKind::Evader);
    choose(table, e.pos, &legal, rng)
}

/// `sum(discount^i * rewards[i])`.
pub fn discounted_return(rewards: &[f64], discount: f64) -> f64 {
    rewards
        .iter()
        .rev()
        .fold(0.0, |acc, r| r + discount * acc)
}
