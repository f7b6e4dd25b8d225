//! Discrete rectangular grid: placement, simultaneous movement, occupancy and
//! the surround-capture predicate.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{PursuitError, Result};

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct AgentId(pub u32);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Cell coordinates; `x` is the column and `y` the row, both 0-based.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default,
)]
pub struct Position {
    pub x: usize,
    pub y: usize,
}

impl Position {
    pub const fn new(x: usize, y: usize) -> Self {
        Position { x, y }
    }

    pub fn chebyshev(self, other: Position) -> usize {
        self.x.abs_diff(other.x).max(self.y.abs_diff(other.y))
    }

    pub fn manhattan(self, other: Position) -> usize {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }

    pub fn distance_sq(self, other: Position) -> usize {
        let dx = self.x.abs_diff(other.x);
        let dy = self.y.abs_diff(other.y);
        dx * dx + dy * dy
    }

    pub fn euclidean(self, other: Position) -> f64 {
        (self.distance_sq(other) as f64).sqrt()
    }

    /// The cell reached by `action`, or `None` when it leaves a `width` x `height` grid.
    pub fn offset(self, action: Action, width: usize, height: usize) -> Option<Position> {
        let (dx, dy) = action.delta();
        let x = self.x.checked_add_signed(dx)?;
        let y = self.y.checked_add_signed(dy)?;
        (x < width && y < height).then_some(Position { x, y })
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Action {
    Up,
    Down,
    Left,
    Right,
    Stay,
}

impl Action {
    /// The four moves, in tie-break order.
    pub const MOVES: [Action; 4] = [Action::Up, Action::Down, Action::Left, Action::Right];
    pub const ALL: [Action; 5] = [
        Action::Up,
        Action::Down,
        Action::Left,
        Action::Right,
        Action::Stay,
    ];

    /// `(dx, dy)`; up decreases the row index.
    pub const fn delta(self) -> (isize, isize) {
        match self {
            Action::Up => (0, -1),
            Action::Down => (0, 1),
            Action::Left => (-1, 0),
            Action::Right => (1, 0),
            Action::Stay => (0, 0),
        }
    }

    pub const fn index(self) -> usize {
        match self {
            Action::Up => 0,
            Action::Down => 1,
            Action::Left => 2,
            Action::Right => 3,
            Action::Stay => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Up => "UP",
            Action::Down => "DOWN",
            Action::Left => "LEFT",
            Action::Right => "RIGHT",
            Action::Stay => "STAY",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Metric used to decide whether an evader is inside a pursuer's range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RangeMetric {
    #[default]
    Chebyshev,
    Euclidean,
    Manhattan,
}

impl RangeMetric {
    pub fn within(self, a: Position, b: Position, range: u32) -> bool {
        let r = range as usize;
        match self {
            RangeMetric::Chebyshev => a.chebyshev(b) <= r,
            RangeMetric::Manhattan => a.manhattan(b) <= r,
            RangeMetric::Euclidean => a.distance_sq(b) <= r * r,
        }
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub width: usize,
    pub height: usize,
    #[serde(default)]
    pub obstacles: BTreeSet<Position>,
    #[serde(default)]
    pub range_metric: RangeMetric,
    /// Whether pursuers may choose `STAY`.
    #[serde(default)]
    pub pursuer_stay: bool,
    /// Whether evaders may choose `STAY`.
    #[serde(default = "default_true")]
    pub evader_stay: bool,
}

impl GridConfig {
    pub fn new(width: usize, height: usize) -> Self {
        GridConfig {
            width,
            height,
            obstacles: BTreeSet::new(),
            range_metric: RangeMetric::Chebyshev,
            pursuer_stay: false,
            evader_stay: true,
        }
    }

    pub fn with_obstacles(mut self, obstacles: impl IntoIterator<Item = Position>) -> Self {
        self.obstacles.extend(obstacles);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 2 || self.height < 2 {
            return Err(PursuitError::config(format!(
                "grid must be at least 2x2, got {}x{}",
                self.width, self.height
            )));
        }
        if let Some(p) = self.obstacles.iter().find(|p| !self.in_bounds(**p)) {
            return Err(PursuitError::config(format!("obstacle {p} is out of bounds")));
        }
        Ok(())
    }

    pub fn in_bounds(&self, p: Position) -> bool {
        p.x < self.width && p.y < self.height
    }

    pub fn cell_count(&self) -> usize {
        self.width * self.height
    }

    pub fn index(&self, p: Position) -> usize {
        p.y * self.width + p.x
    }

    pub fn position(&self, index: usize) -> Position {
        Position::new(index % self.width, index / self.width)
    }

    pub fn diagonal(&self) -> f64 {
        ((self.width * self.width + self.height * self.height) as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PursuerState {
    pub id: AgentId,
    pub pos: Position,
    /// Tasks completed successfully.
    pub c_s: u32,
    /// Tasks participated in.
    pub c_t: u32,
    /// Evaders abandoned.
    pub c_b: u32,
    /// Pursuit radius in cells.
    pub range: u32,
}

impl PursuerState {
    pub fn new(id: AgentId, pos: Position, range: u32) -> Self {
        PursuerState {
            id,
            pos,
            c_s: 0,
            c_t: 0,
            c_b: 0,
            range,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaderState {
    pub id: AgentId,
    pub pos: Position,
    /// Number of blocked neighbours needed to capture this evader.
    pub difficulty: u32,
    pub reward_mag: f64,
    pub captured: bool,
}

impl EvaderState {
    /// An evader whose reward magnitude equals its difficulty.
    pub fn new(id: AgentId, pos: Position, difficulty: u32) -> Self {
        EvaderState {
            id,
            pos,
            difficulty,
            reward_mag: f64::from(difficulty),
            captured: false,
        }
    }

    pub fn alive(&self) -> bool {
        !self.captured
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    Free,
    Obstacle,
    Pursuer(usize),
    Evader(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentKind {
    Pursuer,
    Evader,
}

/// Everything that changed during one call to [`WorldState::step_in_place`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepOutcome {
    pub captured: Vec<AgentId>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorldState {
    pub config: GridConfig,
    pub pursuers: Vec<PursuerState>,
    pub evaders: Vec<EvaderState>,
    pub tick: u64,
    #[serde(skip)]
    cells: Vec<Cell>,
}

impl WorldState {
    /// Builds a world, checking every placement invariant.
    pub fn new(
        config: GridConfig,
        pursuers: Vec<PursuerState>,
        evaders: Vec<EvaderState>,
    ) -> Result<Self> {
        config.validate()?;
        let mut cells = vec![Cell::Free; config.cell_count()];
        for &o in &config.obstacles {
            cells[config.index(o)] = Cell::Obstacle;
        }
        let mut ids = BTreeSet::new();
        let place = |id: AgentId,
                     pos: Position,
                     cell: Cell,
                     cells: &mut Vec<Cell>,
                     ids: &mut BTreeSet<AgentId>| {
            if !ids.insert(id) {
                return Err(PursuitError::config(format!("duplicate agent id {id}")));
            }
            if !config.in_bounds(pos) {
                return Err(PursuitError::config(format!("agent {id} at {pos} is out of bounds")));
            }
            let idx = config.index(pos);
            match cells[idx] {
                Cell::Free => {
                    cells[idx] = cell;
                    Ok(())
                }
                Cell::Obstacle => Err(PursuitError::config(format!(
                    "agent {id} placed on obstacle {pos}"
                ))),
                _ => Err(PursuitError::config(format!(
                    "agent {id} shares cell {pos} with another agent"
                ))),
            }
        };
        for (i, p) in pursuers.iter().enumerate() {
            if p.range < 1 {
                return Err(PursuitError::config(format!("pursuer {} has range 0", p.id)));
            }
            if p.c_s > p.c_t || p.c_b > p.c_t {
                return Err(PursuitError::config(format!(
                    "pursuer {} has inconsistent task counters",
                    p.id
                )));
            }
            place(p.id, p.pos, Cell::Pursuer(i), &mut cells, &mut ids)?;
        }
        for (i, e) in evaders.iter().enumerate() {
            if e.difficulty < 1 {
                return Err(PursuitError::config(format!("evader {} has difficulty 0", e.id)));
            }
            if e.captured {
                if !ids.insert(e.id) {
                    return Err(PursuitError::config(format!("duplicate agent id {}", e.id)));
                }
                continue;
            }
            place(e.id, e.pos, Cell::Evader(i), &mut cells, &mut ids)?;
        }
        Ok(WorldState {
            config,
            pursuers,
            evaders,
            tick: 0,
            cells,
        })
    }

    pub fn width(&self) -> usize {
        self.config.width
    }

    pub fn height(&self) -> usize {
        self.config.height
    }

    pub fn cell(&self, p: Position) -> Cell {
        self.cells[self.config.index(p)]
    }

    pub fn is_obstacle(&self, p: Position) -> bool {
        self.cell(p) == Cell::Obstacle
    }

    pub fn has_pursuer(&self, p: Position) -> bool {
        matches!(self.cell(p), Cell::Pursuer(_))
    }

    pub fn is_free(&self, p: Position) -> bool {
        self.cell(p) == Cell::Free
    }

    pub fn alive_evaders(&self) -> impl Iterator<Item = &EvaderState> {
        self.evaders.iter().filter(|e| e.alive())
    }

    pub fn alive_evader_count(&self) -> usize {
        self.alive_evaders().count()
    }

    pub fn all_captured(&self) -> bool {
        self.evaders.iter().all(|e| e.captured)
    }

    pub fn pursuer(&self, id: AgentId) -> Option<&PursuerState> {
        self.pursuers.iter().find(|p| p.id == id)
    }

    pub fn pursuer_mut(&mut self, id: AgentId) -> Option<&mut PursuerState> {
        self.pursuers.iter_mut().find(|p| p.id == id)
    }

    pub fn evader(&self, id: AgentId) -> Option<&EvaderState> {
        self.evaders.iter().find(|e| e.id == id)
    }

    /// Moves from `pos` that stay in bounds and off obstacles, in tie-break
    /// order, plus `STAY` when `kind` may stay.
    pub fn legal_actions(&self, pos: Position, kind: AgentKind) -> Vec<Action> {
        let mut out: Vec<Action> = Action::MOVES
            .into_iter()
            .filter(|&a| {
                pos.offset(a, self.width(), self.height())
                    .is_some_and(|q| !self.is_obstacle(q))
            })
            .collect();
        let may_stay = match kind {
            AgentKind::Pursuer => self.config.pursuer_stay,
            AgentKind::Evader => self.config.evader_stay,
        };
        if may_stay {
            out.push(Action::Stay);
        }
        out
    }

    /// Next cell under the movement rules ignoring other agents: blocked
    /// moves leave the agent where it is.
    pub fn successor(&self, pos: Position, action: Action) -> Position {
        match pos.offset(action, self.width(), self.height()) {
            Some(q) if !self.is_obstacle(q) => q,
            _ => pos,
        }
    }

    /// Serialized snapshot used for determinism checks.
    pub fn snapshot_json(&self) -> String {
        serde_json::to_string(self).expect("world state serializes")
    }

    /// Resolves `joint_actions` simultaneously and returns the successor world.
    pub fn step(&self, joint_actions: &BTreeMap<AgentId, Action>) -> Result<WorldState> {
        let mut next = self.clone();
        next.step_in_place(joint_actions)?;
        Ok(next)
    }

    /// In-place variant of [`WorldState::step`]. Agents without an entry stay put.
    pub fn step_in_place(
        &mut self,
        joint_actions: &BTreeMap<AgentId, Action>,
    ) -> Result<StepOutcome> {
        // (id, current position, kind, index into its list)
        let mut agents: Vec<(AgentId, Position, AgentKind, usize)> = Vec::with_capacity(
            self.pursuers.len() + self.evaders.len(),
        );
        agents.extend(
            self.pursuers
                .iter()
                .enumerate()
                .map(|(i, p)| (p.id, p.pos, AgentKind::Pursuer, i)),
        );
        agents.extend(
            self.evaders
                .iter()
                .enumerate()
                .filter(|(_, e)| e.alive())
                .map(|(i, e)| (e.id, e.pos, AgentKind::Evader, i)),
        );

        for (&id, &action) in joint_actions {
            let Some(&(_, _, kind, _)) = agents.iter().find(|a| a.0 == id) else {
                return Err(if self.evaders.iter().any(|e| e.id == id) {
                    PursuitError::DeadAgent(id)
                } else {
                    PursuitError::UnknownAgent(id)
                });
            };
            let allowed = match (kind, action) {
                (AgentKind::Pursuer, Action::Stay) => self.config.pursuer_stay,
                (AgentKind::Evader, Action::Stay) => self.config.evader_stay,
                _ => true,
            };
            if !allowed {
                return Err(PursuitError::ActionNotAllowed {
                    agent: id,
                    action: action.to_string(),
                });
            }
        }

        let n = agents.len();
        let mut target: Vec<Position> = agents
            .iter()
            .map(|&(id, pos, _, _)| {
                let action = joint_actions.get(&id).copied().unwrap_or(Action::Stay);
                self.successor(pos, action)
            })
            .collect();
        let mut moving: Vec<bool> = (0..n).map(|i| target[i] != agents[i].1).collect();

        // Contested cells go to the lowest id.
        let mut claims: BTreeMap<Position, usize> = BTreeMap::new();
        for i in (0..n).filter(|&i| moving[i]) {
            claims
                .entry(target[i])
                .and_modify(|w| {
                    if agents[i].0 < agents[*w].0 {
                        *w = i;
                    }
                })
                .or_insert(i);
        }
        for i in 0..n {
            if moving[i] && claims[&target[i]] != i {
                moving[i] = false;
                target[i] = agents[i].1;
            }
        }

        // Occupant of each cell at the start of the tick, as an index into `agents`.
        let occupant: BTreeMap<Position, usize> =
            agents.iter().enumerate().map(|(i, a)| (a.1, i)).collect();

        loop {
            let mut changed = false;
            for i in 0..n {
                if moving[i] {
                    if let Some(&j) = occupant.get(&target[i]) {
                        if !moving[j] {
                            moving[i] = false;
                            target[i] = agents[i].1;
                            changed = true;
                        }
                    }
                }
            }
            if changed {
                continue;
            }
            // Remaining moves into occupied cells form chains ending in a
            // vacated cell, or cycles (including swaps), which are cancelled.
            for i in 0..n {
                if !moving[i] {
                    continue;
                }
                let mut cycle = vec![i];
                let mut k = i;
                let closed = loop {
                    match occupant.get(&target[k]) {
                        None => break false,
                        Some(&j) if j == i => break true,
                        Some(&j) => {
                            if cycle.len() > n || !moving[j] {
                                break false;
                            }
                            cycle.push(j);
                            k = j;
                        }
                    }
                };
                if closed {
                    for c in cycle {
                        moving[c] = false;
                        target[c] = agents[c].1;
                    }
                    changed = true;
                    break;
                }
            }
            if !changed {
                break;
            }
        }

        for (i, &(_, pos, kind, idx)) in agents.iter().enumerate() {
            if !moving[i] {
                continue;
            }
            let to = target[i];
            let from_idx = self.config.index(pos);
            if self.cells[from_idx] == cell_for(kind, idx) {
                self.cells[from_idx] = Cell::Free;
            }
            match kind {
                AgentKind::Pursuer => self.pursuers[idx].pos = to,
                AgentKind::Evader => self.evaders[idx].pos = to,
            }
        }
        for (i, &(_, _, kind, idx)) in agents.iter().enumerate() {
            if moving[i] {
                let to_idx = self.config.index(target[i]);
                self.cells[to_idx] = cell_for(kind, idx);
            }
        }

        let captured: Vec<usize> = (0..self.evaders.len())
            .filter(|&i| self.evaders[i].alive() && is_captured(&self.evaders[i], self))
            .collect();
        let mut outcome = StepOutcome::default();
        for i in captured {
            let e = &mut self.evaders[i];
            e.captured = true;
            let idx = self.config.index(e.pos);
            self.cells[idx] = Cell::Free;
            outcome.captured.push(e.id);
        }
        self.tick += 1;
        Ok(outcome)
    }

    /// Checks the occupancy invariants. Used by tests after every step.
    pub fn check_invariants(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        let alive = self
            .pursuers
            .iter()
            .map(|p| (p.id, p.pos))
            .chain(self.alive_evaders().map(|e| (e.id, e.pos)));
        for (id, pos) in alive {
            if !self.config.in_bounds(pos) {
                return Err(PursuitError::config(format!("agent {id} out of bounds")));
            }
            if self.config.obstacles.contains(&pos) {
                return Err(PursuitError::config(format!("agent {id} on obstacle")));
            }
            if !seen.insert(pos) {
                return Err(PursuitError::config(format!("cell {pos} doubly occupied")));
            }
        }
        Ok(())
    }
}

fn cell_for(kind: AgentKind, idx: usize) -> Cell {
    match kind {
        AgentKind::Pursuer => Cell::Pursuer(idx),
        AgentKind::Evader => Cell::Evader(idx),
    }
}

/// The in-bounds 4-neighbourhood of `pos` (left, right, up, down).
pub fn neighbors(pos: Position, world: &WorldState) -> Vec<Position> {
    [Action::Left, Action::Right, Action::Up, Action::Down]
        .into_iter()
        .filter_map(|a| pos.offset(a, world.width(), world.height()))
        .collect()
}

/// Number of blocked sides around `pos`: pursuers, obstacles and the grid edge.
/// Evaders do not block.
pub fn blocked_sides(pos: Position, world: &WorldState) -> u32 {
    let adjacent = neighbors(pos, world);
    let walls = 4 - adjacent.len() as u32;
    walls
        + adjacent
            .into_iter()
            .map(|q| u32::from(world.has_pursuer(q)) + u32::from(world.is_obstacle(q)))
            .sum::<u32>()
}

/// An evader is caught once its blocked sides reach its difficulty.
pub fn is_captured(evader: &EvaderState, world: &WorldState) -> bool {
    evader.difficulty <= blocked_sides(evader.pos, world)
}

/// Pursuers whose range contains `evader`.
pub fn count_range_invaders(evader: &EvaderState, world: &WorldState) -> usize {
    let metric = world.config.range_metric;
    world
        .pursuers
        .iter()
        .filter(|p| metric.within(p.pos, evader.pos, p.range))
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn world(w: usize, h: usize, pursuers: &[(usize, usize)], evaders: &[(usize, usize, u32)]) -> WorldState {
        let ps = pursuers
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| PursuerState::new(AgentId(i as u32), Position::new(x, y), 1))
            .collect();
        let es = evaders
            .iter()
            .enumerate()
            .map(|(i, &(x, y, d))| {
                EvaderState::new(AgentId((pursuers.len() + i) as u32), Position::new(x, y), d)
            })
            .collect();
        WorldState::new(GridConfig::new(w, h), ps, es).unwrap()
    }

    fn actions(list: &[(u32, Action)]) -> BTreeMap<AgentId, Action> {
        list.iter().map(|&(i, a)| (AgentId(i), a)).collect()
    }

    #[test]
    fn interior_neighbors() {
        let w = world(10, 10, &[], &[]);
        let got: BTreeSet<_> = neighbors(Position::new(5, 5), &w).into_iter().collect();
        let want: BTreeSet<_> = [(4, 5), (6, 5), (5, 4), (5, 6)]
            .into_iter()
            .map(|(x, y)| Position::new(x, y))
            .collect();
        assert_eq!(got, want);
    }

    #[test]
    fn corner_and_edge_neighbors() {
        let w = world(10, 10, &[], &[]);
        let got: BTreeSet<_> = neighbors(Position::new(0, 0), &w).into_iter().collect();
        assert_eq!(
            got,
            [Position::new(1, 0), Position::new(0, 1)].into_iter().collect()
        );
        assert_eq!(neighbors(Position::new(0, 5), &w).len(), 3);
    }

    #[test]
    fn fully_surrounded_interior_evader_is_captured() {
        let w = world(10, 10, &[(4, 5), (6, 5), (5, 4), (5, 6)], &[(5, 5, 4)]);
        assert!(is_captured(&w.evaders[0], &w));
    }

    #[test]
    fn corner_walls_count_as_blocked() {
        // two walls + one pursuer = 3 >= d
        let w = world(10, 10, &[(1, 0)], &[(0, 0, 3)]);
        assert!(is_captured(&w.evaders[0], &w));
        let w = world(10, 10, &[(1, 0)], &[(0, 0, 4)]);
        assert!(!is_captured(&w.evaders[0], &w));
    }

    #[test]
    fn single_pursuer_does_not_capture_difficulty_two() {
        let w = world(10, 10, &[(4, 5)], &[(5, 5, 2)]);
        assert!(!is_captured(&w.evaders[0], &w));
    }

    #[test]
    fn obstacles_block_and_evaders_do_not() {
        let cfg = GridConfig::new(10, 10).with_obstacles([Position::new(5, 4)]);
        let ps = vec![PursuerState::new(AgentId(0), Position::new(4, 5), 1)];
        let es = vec![
            EvaderState::new(AgentId(1), Position::new(5, 5), 3),
            EvaderState::new(AgentId(2), Position::new(6, 5), 1),
        ];
        let w = WorldState::new(cfg, ps, es).unwrap();
        assert_eq!(blocked_sides(Position::new(5, 5), &w), 2);
        assert!(!is_captured(&w.evaders[0], &w));
    }

    #[test]
    fn range_invaders_boundary_inclusive() {
        let mut w = world(20, 20, &[(0, 0)], &[(10, 10, 2)]);
        assert_eq!(count_range_invaders(&w.evaders[0], &w), 0);
        w.pursuers[0].range = 10;
        assert_eq!(count_range_invaders(&w.evaders[0], &w), 1);
        w.pursuers[0].range = 9;
        assert_eq!(count_range_invaders(&w.evaders[0], &w), 0);
    }

    #[test]
    fn range_invaders_matches_brute_force() {
        let mut w = world(
            20,
            20,
            &[(9, 9), (10, 12), (12, 10), (0, 0), (19, 19)],
            &[(10, 10, 2)],
        );
        for p in &mut w.pursuers {
            p.range = 3;
        }
        let e = &w.evaders[0];
        let brute = w
            .pursuers
            .iter()
            .filter(|p| {
                let dx = (p.pos.x as i64 - e.pos.x as i64).abs();
                let dy = (p.pos.y as i64 - e.pos.y as i64).abs();
                dx.max(dy) <= i64::from(p.range)
            })
            .count();
        assert_eq!(brute, 3);
        assert_eq!(count_range_invaders(e, &w), brute);
    }

    #[test]
    fn range_metrics_differ_on_diagonals() {
        let a = Position::new(0, 0);
        let b = Position::new(2, 2);
        assert!(RangeMetric::Chebyshev.within(a, b, 2));
        assert!(!RangeMetric::Euclidean.within(a, b, 2));
        assert!(RangeMetric::Euclidean.within(a, b, 3));
        assert!(!RangeMetric::Manhattan.within(a, b, 3));
    }

    #[test]
    fn unobstructed_move() {
        let w = world(10, 10, &[(3, 3)], &[(8, 8, 2)]);
        let next = w.step(&actions(&[(0, Action::Right)])).unwrap();
        assert_eq!(next.pursuers[0].pos, Position::new(4, 3));
        assert_eq!(next.tick, 1);
        next.check_invariants().unwrap();
    }

    #[test]
    fn contested_cell_goes_to_lowest_id() {
        let w = world(10, 10, &[(3, 3), (5, 3)], &[(8, 8, 2)]);
        let next = w
            .step(&actions(&[(0, Action::Right), (1, Action::Left)]))
            .unwrap();
        assert_eq!(next.pursuers[0].pos, Position::new(4, 3));
        assert_eq!(next.pursuers[1].pos, Position::new(5, 3));
    }

    #[test]
    fn moves_into_staying_agents_and_walls_are_cancelled() {
        let w = world(10, 10, &[(0, 0), (1, 0)], &[(8, 8, 2)]);
        let next = w
            .step(&actions(&[(0, Action::Right), (1, Action::Up)]))
            .unwrap();
        assert_eq!(next.pursuers[0].pos, Position::new(0, 0));
        assert_eq!(next.pursuers[1].pos, Position::new(1, 0));
    }

    #[test]
    fn following_into_a_vacated_cell_succeeds() {
        let w = world(10, 10, &[(2, 2), (3, 2)], &[(8, 8, 2)]);
        let next = w
            .step(&actions(&[(0, Action::Right), (1, Action::Right)]))
            .unwrap();
        assert_eq!(next.pursuers[0].pos, Position::new(3, 2));
        assert_eq!(next.pursuers[1].pos, Position::new(4, 2));
    }

    #[test]
    fn swaps_are_cancelled() {
        let w = world(10, 10, &[(2, 2), (3, 2)], &[(8, 8, 2)]);
        let next = w
            .step(&actions(&[(0, Action::Right), (1, Action::Left)]))
            .unwrap();
        assert_eq!(next.pursuers[0].pos, Position::new(2, 2));
        assert_eq!(next.pursuers[1].pos, Position::new(3, 2));
    }

    #[test]
    fn rotation_cycle_is_cancelled() {
        let w = world(10, 10, &[(2, 2), (3, 2), (3, 3), (2, 3)], &[(8, 8, 2)]);
        let next = w
            .step(&actions(&[
                (0, Action::Right),
                (1, Action::Down),
                (2, Action::Left),
                (3, Action::Up),
            ]))
            .unwrap();
        for (a, b) in next.pursuers.iter().zip(&w.pursuers) {
            assert_eq!(a.pos, b.pos);
        }
    }

    #[test]
    fn capture_at_wall_corner_after_move() {
        // evader d=1 at (0,0): walls alone give 2 >= 1, so it is caught on the
        // first step regardless; use d=3 so the pursuer's arrival decides it.
        let w = world(5, 5, &[(2, 0)], &[(0, 0, 3)]);
        let next = w.step(&actions(&[(0, Action::Left)])).unwrap();
        assert_eq!(next.pursuers[0].pos, Position::new(1, 0));
        assert!(next.evaders[0].captured);
        assert!(next.is_free(Position::new(0, 0)));
    }

    #[test]
    fn rejects_unknown_and_dead_agents() {
        let w = world(5, 5, &[(2, 2)], &[(0, 0, 1)]);
        assert!(matches!(
            w.step(&actions(&[(9, Action::Up)])),
            Err(PursuitError::UnknownAgent(AgentId(9)))
        ));
        let next = w.step(&BTreeMap::new()).unwrap();
        assert!(next.evaders[0].captured);
        assert!(matches!(
            next.step(&actions(&[(1, Action::Up)])),
            Err(PursuitError::DeadAgent(AgentId(1)))
        ));
        assert!(matches!(
            w.step(&actions(&[(0, Action::Stay)])),
            Err(PursuitError::ActionNotAllowed { .. })
        ));
    }

    #[test]
    fn rejects_bad_placements() {
        let cfg = GridConfig::new(4, 4).with_obstacles([Position::new(1, 1)]);
        let on_obstacle = vec![PursuerState::new(AgentId(0), Position::new(1, 1), 1)];
        assert!(WorldState::new(cfg.clone(), on_obstacle, vec![]).is_err());
        let overlap = vec![
            PursuerState::new(AgentId(0), Position::new(0, 0), 1),
            PursuerState::new(AgentId(1), Position::new(0, 0), 1),
        ];
        assert!(WorldState::new(cfg.clone(), overlap, vec![]).is_err());
        assert!(WorldState::new(GridConfig::new(1, 5), vec![], vec![]).is_err());
        let outside = GridConfig::new(4, 4).with_obstacles([Position::new(4, 0)]);
        assert!(outside.validate().is_err());
    }
}
