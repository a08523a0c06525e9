//! Deterministic toy MDPs.
//!
//! `FourRooms` is a tabular grid whose observations are one-hot cell
//! indicators; `PointMass2D` is a continuous 2-D point with velocity. Both are
//! pure: `reset` and `step` take and return [`EnvState`] values, so a run is a
//! function of the seed and the action sequence.
//!
//! Pre-training code only ever sees a [`RewardFree`] view, which exposes the
//! dynamics but neither extrinsic rewards nor goal absorption.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::rng::RunRng;
use crate::{Error, Result};

/// What the agent sees.
#[derive(Debug, Clone, PartialEq)]
pub enum Observation {
    /// One-hot indicator of cell `index` among `count` reachable cells.
    Cell { index: usize, count: usize },
    /// Dense real-valued observation.
    Vector(Vec<f64>),
}

impl Observation {
    pub fn dim(&self) -> usize {
        match self {
            Observation::Cell { count, .. } => *count,
            Observation::Vector(v) => v.len(),
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        match self {
            Observation::Cell { index, count } => {
                let mut v = vec![0.0; *count];
                v[*index] = 1.0;
                v
            }
            Observation::Vector(v) => v.clone(),
        }
    }

    /// Cell index for tabular observations.
    pub fn cell(&self) -> Option<usize> {
        match self {
            Observation::Cell { index, .. } => Some(*index),
            Observation::Vector(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    pub observation: Observation,
    pub step_index: usize,
    pub episode_done: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridLayout {
    /// The classic 11×11 four-room layout (104 open cells).
    Classic,
    /// A 5×5 room without interior walls.
    Open5,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvKind {
    FourRooms(GridLayout),
    PointMass2D,
}

/// Fine-tuning tasks. Each gives reward 1 on reaching its goal region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskId {
    ReachNorthEast,
    ReachSouthWest,
}

impl TaskId {
    pub fn name(self) -> &'static str {
        match self {
            TaskId::ReachNorthEast => "reach-goal-NE",
            TaskId::ReachSouthWest => "reach-goal-SW",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "reach-goal-NE" | "ne" | "NE" => Some(TaskId::ReachNorthEast),
            "reach-goal-SW" | "sw" | "SW" => Some(TaskId::ReachSouthWest),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnvSpec {
    pub kind: EnvKind,
    pub horizon: usize,
    pub task: TaskId,
}

impl EnvSpec {
    pub fn four_rooms() -> Self {
        EnvSpec {
            kind: EnvKind::FourRooms(GridLayout::Classic),
            horizon: 100,
            task: TaskId::ReachNorthEast,
        }
    }

    pub fn open_room() -> Self {
        EnvSpec {
            kind: EnvKind::FourRooms(GridLayout::Open5),
            horizon: 200,
            task: TaskId::ReachNorthEast,
        }
    }

    pub fn point_mass() -> Self {
        EnvSpec {
            kind: EnvKind::PointMass2D,
            horizon: 100,
            task: TaskId::ReachNorthEast,
        }
    }

    /// Short environment name: `fourrooms`, `open5` or `pointmass`.
    pub fn name(&self) -> &'static str {
        match self.kind {
            EnvKind::FourRooms(GridLayout::Classic) => "fourrooms",
            EnvKind::FourRooms(GridLayout::Open5) => "open5",
            EnvKind::PointMass2D => "pointmass",
        }
    }

    /// Default spec for an environment name.
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "fourrooms" => Some(EnvSpec::four_rooms()),
            "open5" => Some(EnvSpec::open_room()),
            "pointmass" => Some(EnvSpec::point_mass()),
            _ => None,
        }
    }
}

/// Result of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub state: EnvState,
    pub extrinsic_reward: f64,
    pub done: bool,
    /// True when the episode ended by reaching the goal rather than the horizon.
    pub terminal: bool,
}

const CLASSIC: [&str; 11] = [
    "     #     ",
    "     #     ",
    "           ",
    "     #     ",
    "     #     ",
    "# ####     ",
    "     ### ##",
    "     #     ",
    "     #     ",
    "           ",
    "     #     ",
];

/// Moves for FourRooms: up, right, down, left.
const GRID_MOVES: [(isize, isize); 4] = [(-1, 0), (0, 1), (1, 0), (0, -1)];

#[derive(Debug, Clone)]
struct Grid {
    rows: usize,
    cols: usize,
    /// Cell id for each (row, col), `None` for walls.
    ids: Vec<Option<usize>>,
    /// (row, col) for each cell id, row-major order.
    cells: Vec<(usize, usize)>,
    start: usize,
}

impl Grid {
    fn new(layout: GridLayout) -> Self {
        let (rows, cols, walls): (usize, usize, Vec<bool>) = match layout {
            GridLayout::Classic => (
                11,
                11,
                CLASSIC.iter().flat_map(|r| r.bytes().map(|b| b == b'#')).collect(),
            ),
            GridLayout::Open5 => (5, 5, vec![false; 25]),
        };
        let mut ids = vec![None; rows * cols];
        let mut cells = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                if !walls[r * cols + c] {
                    ids[r * cols + c] = Some(cells.len());
                    cells.push((r, c));
                }
            }
        }
        let start = ids[0].expect("top-left corner is open");
        Grid {
            rows,
            cols,
            ids,
            cells,
            start,
        }
    }

    fn id(&self, r: usize, c: usize) -> Option<usize> {
        self.ids[r * self.cols + c]
    }

    fn goal(&self, task: TaskId) -> usize {
        let (r, c) = match task {
            TaskId::ReachNorthEast => (0, self.cols - 1),
            TaskId::ReachSouthWest => (self.rows - 1, 0),
        };
        self.id(r, c).expect("goal corners are open")
    }

    fn next_cell(&self, cell: usize, action: usize) -> usize {
        let (r, c) = self.cells[cell];
        let (dr, dc) = GRID_MOVES[action];
        let nr = r as isize + dr;
        let nc = c as isize + dc;
        if nr < 0 || nc < 0 || nr >= self.rows as isize || nc >= self.cols as isize {
            return cell;
        }
        self.id(nr as usize, nc as usize).unwrap_or(cell)
    }
}

const VELOCITY_DECAY: f64 = 0.9;
const THRUST: f64 = 0.1;
const DT: f64 = 0.1;
const GOAL_RADIUS: f64 = 0.15;

fn thrust_direction(action: usize) -> (f64, f64) {
    let angle = action as f64 * core::f64::consts::FRAC_PI_4;
    (libm::cos(angle), libm::sin(angle))
}

/// A constructed environment.
///
/// FourRooms cells are numbered row-major over open squares; the agent starts
/// in the top-left corner. PointMass2D integrates
/// `v ← 0.9·v + 0.1·u`, `p ← clamp(p + 0.1·v, [-1, 1]²)` and zeroes the
/// velocity component of any clamped axis; it starts near the origin.
#[derive(Debug, Clone)]
pub struct Env {
    spec: EnvSpec,
    grid: Option<Grid>,
}

impl Env {
    pub fn new(spec: EnvSpec) -> Result<Self> {
        if spec.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        let grid = match spec.kind {
            EnvKind::FourRooms(layout) => Some(Grid::new(layout)),
            EnvKind::PointMass2D => None,
        };
        Ok(Env { spec, grid })
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn horizon(&self) -> usize {
        self.spec.horizon
    }

    pub fn num_actions(&self) -> usize {
        match self.spec.kind {
            EnvKind::FourRooms(_) => 4,
            EnvKind::PointMass2D => 8,
        }
    }

    pub fn obs_dim(&self) -> usize {
        match &self.grid {
            Some(g) => g.cells.len(),
            None => 4,
        }
    }

    /// Number of discrete states, `None` for continuous environments.
    pub fn num_states(&self) -> Option<usize> {
        self.grid.as_ref().map(|g| g.cells.len())
    }

    pub fn is_discrete(&self) -> bool {
        self.grid.is_some()
    }

    /// Grid coordinates of a cell, for diagnostics.
    pub fn cell_position(&self, cell: usize) -> Option<(usize, usize)> {
        self.grid.as_ref().and_then(|g| g.cells.get(cell).copied())
    }

    pub fn reset(&self, seed: u64) -> EnvState {
        let observation = match &self.grid {
            Some(g) => Observation::Cell {
                index: g.start,
                count: g.cells.len(),
            },
            None => {
                let mut rng = crate::rng::stream(seed, crate::rng::Stream::Env);
                let x = rng.random_range(-0.1..0.1);
                let y = rng.random_range(-0.1..0.1);
                Observation::Vector(vec![x, y, 0.0, 0.0])
            }
        };
        EnvState {
            observation,
            step_index: 0,
            episode_done: false,
        }
    }

    /// Resets using a caller-owned stream (one draw per episode).
    pub fn reset_with(&self, rng: &mut RunRng) -> EnvState {
        self.reset(rng.random())
    }

    fn check(&self, state: &EnvState, action: usize) -> Result<()> {
        if state.episode_done {
            return Err(Error::EpisodeDone);
        }
        if action >= self.num_actions() {
            return Err(Error::InvalidAction {
                action,
                num_actions: self.num_actions(),
            });
        }
        if state.observation.dim() != self.obs_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.obs_dim(),
                actual: state.observation.dim(),
            });
        }
        Ok(())
    }

    fn dynamics(&self, state: &EnvState, action: usize) -> Observation {
        match (&self.grid, &state.observation) {
            (Some(g), Observation::Cell { index, count }) => Observation::Cell {
                index: g.next_cell(*index, action),
                count: *count,
            },
            (None, Observation::Vector(v)) => {
                let (ux, uy) = thrust_direction(action);
                let mut vx = VELOCITY_DECAY * v[2] + THRUST * ux;
                let mut vy = VELOCITY_DECAY * v[3] + THRUST * uy;
                let mut x = v[0] + DT * vx;
                let mut y = v[1] + DT * vy;
                if !(-1.0..=1.0).contains(&x) {
                    x = x.clamp(-1.0, 1.0);
                    vx = 0.0;
                }
                if !(-1.0..=1.0).contains(&y) {
                    y = y.clamp(-1.0, 1.0);
                    vy = 0.0;
                }
                Observation::Vector(vec![x, y, vx, vy])
            }
            _ => unreachable!("observation kind checked against environment"),
        }
    }

    /// Whether `obs` lies in the goal region of `task`.
    pub fn at_goal(&self, obs: &Observation, task: TaskId) -> bool {
        match (&self.grid, obs) {
            (Some(g), Observation::Cell { index, .. }) => *index == g.goal(task),
            (None, Observation::Vector(v)) => {
                let (gx, gy) = match task {
                    TaskId::ReachNorthEast => (0.7, 0.7),
                    TaskId::ReachSouthWest => (-0.7, -0.7),
                };
                let dx = v[0] - gx;
                let dy = v[1] - gy;
                dx * dx + dy * dy <= GOAL_RADIUS * GOAL_RADIUS
            }
            _ => false,
        }
    }

    /// Goal cell of a task on grid environments.
    pub fn goal_cell(&self, task: TaskId) -> Option<usize> {
        self.grid.as_ref().map(|g| g.goal(task))
    }

    /// Dynamics plus horizon only: no reward, no goal absorption.
    pub fn transition(&self, state: &EnvState, action: usize) -> Result<EnvState> {
        self.check(state, action)?;
        let step_index = state.step_index + 1;
        Ok(EnvState {
            observation: self.dynamics(state, action),
            step_index,
            episode_done: step_index >= self.spec.horizon,
        })
    }

    /// Full step under the configured task: reward 1 and termination on
    /// reaching the goal, 0 otherwise; the horizon also ends the episode.
    pub fn step(&self, state: &EnvState, action: usize) -> Result<Step> {
        let mut next = self.transition(state, action)?;
        let terminal = self.at_goal(&next.observation, self.spec.task);
        next.episode_done |= terminal;
        Ok(Step {
            extrinsic_reward: if terminal { 1.0 } else { 0.0 },
            done: next.episode_done,
            terminal,
            state: next,
        })
    }

    /// All reachable observations, in cell order.
    pub fn enumerate_states(&self) -> Result<Vec<Observation>> {
        let g = self
            .grid
            .as_ref()
            .ok_or(Error::Unsupported("enumerate_states on a continuous environment"))?;
        // breadth-first search from the start cell
        let mut seen = vec![false; g.cells.len()];
        let mut queue = VecDeque::from([g.start]);
        seen[g.start] = true;
        while let Some(cell) = queue.pop_front() {
            for a in 0..GRID_MOVES.len() {
                let next = g.next_cell(cell, a);
                if !seen[next] {
                    seen[next] = true;
                    queue.push_back(next);
                }
            }
        }
        Ok((0..g.cells.len())
            .filter(|&i| seen[i])
            .map(|index| Observation::Cell {
                index,
                count: g.cells.len(),
            })
            .collect())
    }
}

/// Reward-stripped view handed to pre-training.
#[derive(Debug, Clone, Copy)]
pub struct RewardFree<'a> {
    env: &'a Env,
}

impl<'a> RewardFree<'a> {
    pub fn new(env: &'a Env) -> Self {
        RewardFree { env }
    }

    pub fn num_actions(&self) -> usize {
        self.env.num_actions()
    }

    pub fn obs_dim(&self) -> usize {
        self.env.obs_dim()
    }

    pub fn num_states(&self) -> Option<usize> {
        self.env.num_states()
    }

    pub fn reset_with(&self, rng: &mut RunRng) -> EnvState {
        self.env.reset_with(rng)
    }

    /// Next state and whether the horizon was reached.
    pub fn step(&self, state: &EnvState, action: usize) -> Result<(EnvState, bool)> {
        let next = self.env.transition(state, action)?;
        let done = next.episode_done;
        Ok((next, done))
    }
}
