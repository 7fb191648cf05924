//! Obstacle World: a 5x5 grid with a ring road, hidden obstacles on the
//! border lanes, four corner cameras and a first-person camera.

pub mod bfs;
pub mod dataset;
pub mod layout;
pub mod render;

use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::rng;

pub use bfs::{bfs_shortest, classify_detour, path_len};
pub use layout::{layouts, Layout, LAYOUT_COUNT};
pub use render::{render, CameraImage, CAMERA_COUNT};

pub const GRID: usize = 5;
pub const MAX_STEPS: usize = 20;
pub const PALETTE_SIZE: usize = 6;
pub const CONE_PROBABILITY: f64 = 0.1;

#[derive(Debug, Error, PartialEq)]
pub enum WorldError {
    #[error("invalid layout data: {0}")]
    Layout(String),
    #[error("action index {0} out of range")]
    BadAction(usize),
    #[error("bad record: {0}")]
    Record(String),
    #[error("camera {0} out of range")]
    BadCamera(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub const fn new(row: usize, col: usize) -> Self {
        Cell { row, col }
    }

    pub fn all() -> impl Iterator<Item = Cell> {
        (0..GRID).flat_map(|r| (0..GRID).map(move |c| Cell::new(r, c)))
    }

    pub fn on_border(self) -> bool {
        self.row == 0 || self.col == 0 || self.row == GRID - 1 || self.col == GRID - 1
    }

    /// Neighbour one step in `dir`, if inside the grid.
    pub fn offset(self, dir: Dir) -> Option<Cell> {
        let (dr, dc) = dir.delta();
        let r = self.row.checked_add_signed(dr)?;
        let c = self.col.checked_add_signed(dc)?;
        (r < GRID && c < GRID).then_some(Cell::new(r, c))
    }

    pub fn neighbours(self) -> impl Iterator<Item = Cell> {
        Dir::ALL.into_iter().filter_map(move |d| self.offset(d))
    }

    pub fn index(self) -> usize {
        self.row * GRID + self.col
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.row, self.col)
    }
}

pub const START: Cell = Cell::new(0, 0);

/// Compass direction; also the agent's facing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Dir {
    N,
    S,
    E,
    W,
}

impl Dir {
    /// Tie-break order for shortest paths.
    pub const ALL: [Dir; 4] = [Dir::N, Dir::S, Dir::E, Dir::W];

    pub fn delta(self) -> (isize, isize) {
        match self {
            Dir::N => (-1, 0),
            Dir::S => (1, 0),
            Dir::E => (0, 1),
            Dir::W => (0, -1),
        }
    }

    /// Direction to the viewer's left and right.
    pub fn sides(self) -> (Dir, Dir) {
        match self {
            Dir::N => (Dir::W, Dir::E),
            Dir::S => (Dir::E, Dir::W),
            Dir::E => (Dir::N, Dir::S),
            Dir::W => (Dir::S, Dir::N),
        }
    }

    pub fn letter(self) -> char {
        match self {
            Dir::N => 'N',
            Dir::S => 'S',
            Dir::E => 'E',
            Dir::W => 'W',
        }
    }

    pub fn from_letter(c: char) -> Option<Dir> {
        Dir::ALL.into_iter().find(|d| d.letter() == c)
    }
}

/// Discrete action; index 0 is stop (also "stay"), 1..=4 move N, S, E, W.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Action {
    Stop,
    Move(Dir),
}

pub const ACTION_COUNT: usize = 5;

impl Action {
    pub fn index(self) -> usize {
        match self {
            Action::Stop => 0,
            Action::Move(Dir::N) => 1,
            Action::Move(Dir::S) => 2,
            Action::Move(Dir::E) => 3,
            Action::Move(Dir::W) => 4,
        }
    }

    pub fn from_index(i: usize) -> Result<Action, WorldError> {
        match i {
            0 => Ok(Action::Stop),
            1..=4 => Ok(Action::Move(Dir::ALL[i - 1])),
            _ => Err(WorldError::BadAction(i)),
        }
    }

    pub fn letter(self) -> char {
        match self {
            Action::Stop => '0',
            Action::Move(d) => d.letter(),
        }
    }

    pub fn from_letter(c: char) -> Option<Action> {
        if c == '0' {
            Some(Action::Stop)
        } else {
            Dir::from_letter(c).map(Action::Move)
        }
    }
}

pub fn actions_to_string(actions: &[Action]) -> String {
    actions.iter().map(|a| a.letter()).collect()
}

pub fn actions_from_str(s: &str) -> Option<Vec<Action>> {
    s.chars().map(Action::from_letter).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Shape {
    Box,
    Ball,
    Cone,
}

impl Shape {
    pub fn name(self) -> &'static str {
        match self {
            Shape::Box => "box",
            Shape::Ball => "ball",
            Shape::Cone => "cone",
        }
    }

    pub fn from_name(s: &str) -> Option<Shape> {
        [Shape::Box, Shape::Ball, Shape::Cone].into_iter().find(|v| v.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Obstacle {
    pub cell: Cell,
    pub shape: Shape,
    /// Index into the render palette, `0..PALETTE_SIZE`.
    pub color: usize,
}

/// How the agent's initial facing is chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum StartFacing {
    /// East or south with equal probability.
    #[default]
    Random,
    /// Always east.
    Fixed,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct World {
    pub seed: u64,
    pub layout_id: usize,
    pub agent: Cell,
    pub facing: Dir,
    pub goal: Cell,
    pub obstacles: Vec<Obstacle>,
    pub steps: usize,
}

/// Map cell codes fed to the map encoder.
pub const CODE_WALL: u8 = 0;
pub const CODE_ROAD: u8 = 1;
pub const CODE_AGENT: u8 = 2;
pub const CODE_GOAL: u8 = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Moved,
    CrashWall,
    CrashObstacle,
    ReachedGoal,
    Stopped,
}

impl Outcome {
    pub fn is_terminal(self) -> bool {
        self != Outcome::Moved
    }
}

const RETRIES: u64 = 64;

impl World {
    /// Deterministic world for `seed`.
    pub fn generate(seed: u64, facing: StartFacing) -> World {
        for attempt in 0.. {
            let mut r = rng::stream(rng::derive(seed, "world", attempt / RETRIES), attempt % RETRIES);
            if let Some(w) = Self::try_generate(seed, facing, &mut r) {
                return w;
            }
        }
        unreachable!()
    }

    fn try_generate(seed: u64, facing: StartFacing, r: &mut impl Rng) -> Option<World> {
        let layout_id = r.gen_range(0..LAYOUT_COUNT);
        let layout = &layouts()[layout_id];
        // Drawn in both modes so the rest of the world does not depend on the mode.
        let south = r.gen_bool(0.5);
        let facing = if facing == StartFacing::Random && south { Dir::S } else { Dir::E };
        let mut lanes: Vec<Cell> = layout.road_cells().filter(|c| c.on_border() && *c != START).collect();
        let count = r.gen_range(1..=3);
        let mut obstacles = Vec::with_capacity(count);
        for _ in 0..count {
            let cell = lanes.swap_remove(r.gen_range(0..lanes.len()));
            let shape = if r.gen_bool(CONE_PROBABILITY) {
                Shape::Cone
            } else if r.gen_bool(0.5) {
                Shape::Box
            } else {
                Shape::Ball
            };
            obstacles.push(Obstacle {
                cell,
                shape,
                color: r.gen_range(0..PALETTE_SIZE),
            });
        }
        obstacles.sort_by_key(|o| o.cell);
        let blocked: Vec<Cell> = obstacles.iter().map(|o| o.cell).collect();
        let reachable: Vec<Cell> = bfs::distances(layout, START, &blocked)
            .iter()
            .enumerate()
            .filter(|(i, d)| d.is_some() && *i != START.index())
            .map(|(i, _)| Cell::new(i / GRID, i % GRID))
            .collect();
        if reachable.is_empty() {
            return None;
        }
        let goal = reachable[r.gen_range(0..reachable.len())];
        Some(World {
            seed,
            layout_id,
            agent: START,
            facing,
            goal,
            obstacles,
            steps: 0,
        })
    }

    pub fn layout(&self) -> &'static Layout {
        &layouts()[self.layout_id]
    }

    pub fn obstacle_at(&self, cell: Cell) -> Option<&Obstacle> {
        self.obstacles.iter().find(|o| o.cell == cell)
    }

    pub fn obstacle_cells(&self) -> Vec<Cell> {
        self.obstacles.iter().map(|o| o.cell).collect()
    }

    /// Map codes, row-major. Obstacles are not shown; the agent's code wins
    /// when it stands on the goal.
    pub fn map_grid(&self) -> [u8; GRID * GRID] {
        let layout = self.layout();
        let mut g = [CODE_WALL; GRID * GRID];
        for c in Cell::all() {
            if layout.is_road(c) {
                g[c.index()] = CODE_ROAD;
            }
        }
        g[self.goal.index()] = CODE_GOAL;
        g[self.agent.index()] = CODE_AGENT;
        g
    }

    /// Shortest obstacle-avoiding action sequence from the current cell.
    pub fn oracle_actions(&self) -> Option<Vec<Action>> {
        bfs_shortest(self.layout(), self.agent, self.goal, Some(&self.obstacle_cells()))
    }

    pub fn step(&mut self, action: Action) -> Outcome {
        self.steps += 1;
        match action {
            Action::Stop if self.agent == self.goal => Outcome::ReachedGoal,
            Action::Stop => Outcome::Stopped,
            Action::Move(dir) => match self.agent.offset(dir) {
                Some(next) if self.layout().is_road(next) => {
                    if self.obstacle_at(next).is_some() {
                        return Outcome::CrashObstacle;
                    }
                    self.agent = next;
                    self.facing = dir;
                    Outcome::Moved
                }
                _ => Outcome::CrashWall,
            },
        }
    }

    pub fn step_index(&mut self, action: usize) -> Result<Outcome, WorldError> {
        Ok(self.step(Action::from_index(action)?))
    }
}
