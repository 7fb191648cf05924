//! Episode records: generation with a balanced detour split and a
//! line-oriented text format (`key=value` fields, one episode per line).
//! Images are not stored; worlds are regenerated from their seeds.

use std::fmt::Write as _;
use std::path::Path;

use super::{actions_from_str, actions_to_string, bfs_shortest, classify_detour, Action, Cell, Dir, Obstacle, Shape, StartFacing, World, WorldError, START};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// Seed of the `index`-th candidate world. Train and test draw from the
/// disjoint ranges `[base, base + 2^32)` and `[base + 2^32, base + 2^33)`.
pub fn world_seed(dataset_seed: u64, split: Split, index: u64) -> u64 {
    assert!(index < 1 << 32);
    let base = dataset_seed.wrapping_mul(1 << 34);
    let offset = match split {
        Split::Train => 0,
        Split::Test => 1 << 32,
    };
    base.wrapping_add(offset).wrapping_add(index)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EpisodeRecord {
    pub seed: u64,
    pub layout_id: usize,
    pub facing: Dir,
    pub start: Cell,
    pub goal: Cell,
    pub obstacles: Vec<Obstacle>,
    /// Shortest obstacle-avoiding path, ending in stop.
    pub actions: Vec<Action>,
    pub detour: bool,
}

impl EpisodeRecord {
    pub fn from_world(world: &World) -> Option<Self> {
        let blocked = world.obstacle_cells();
        Some(EpisodeRecord {
            seed: world.seed,
            layout_id: world.layout_id,
            facing: world.facing,
            start: world.agent,
            goal: world.goal,
            obstacles: world.obstacles.clone(),
            actions: world.oracle_actions()?,
            detour: classify_detour(world.layout(), world.agent, world.goal, &blocked)?,
        })
    }

    /// The world at the start of the episode.
    pub fn world(&self) -> World {
        let mut w = World::generate(self.seed, StartFacing::Random);
        w.facing = self.facing;
        w
    }

    pub fn to_line(&self) -> String {
        let mut obs = String::new();
        for (i, o) in self.obstacles.iter().enumerate() {
            if i > 0 {
                obs.push(';');
            }
            let _ = write!(obs, "{}:{}:{}", o.cell, o.shape.name(), o.color);
        }
        format!(
            "seed={} layout={} facing={} start={} goal={} obstacles={} actions={} detour={}",
            self.seed,
            self.layout_id,
            self.facing.letter(),
            self.start,
            self.goal,
            obs,
            actions_to_string(&self.actions),
            self.detour as u8
        )
    }

    /// Parses a line and checks it against the regenerated world.
    pub fn from_line(line: &str) -> Result<Self, WorldError> {
        let bad = |m: String| WorldError::Record(m);
        let field = |key: &str| {
            line.split_whitespace()
                .find_map(|f| f.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
                .ok_or_else(|| bad(format!("missing {key}")))
        };
        let cell = |s: &str| -> Result<Cell, WorldError> {
            let (r, c) = s.split_once(',').ok_or_else(|| bad(format!("bad cell {s:?}")))?;
            let p = |v: &str| v.parse::<usize>().ok().filter(|&v| v < super::GRID);
            Ok(Cell::new(p(r).ok_or_else(|| bad(format!("bad cell {s:?}")))?, p(c).ok_or_else(|| bad(format!("bad cell {s:?}")))?))
        };
        let seed = field("seed")?.parse().map_err(|_| bad("bad seed".into()))?;
        let layout_id = field("layout")?.parse().map_err(|_| bad("bad layout".into()))?;
        let facing = field("facing")?
            .chars()
            .next()
            .and_then(Dir::from_letter)
            .ok_or_else(|| bad("bad facing".into()))?;
        let mut obstacles = Vec::new();
        for part in field("obstacles")?.split(';').filter(|p| !p.is_empty()) {
            let mut it = part.split(':');
            let (c, s, k) = (it.next(), it.next(), it.next());
            let (Some(c), Some(s), Some(k), None) = (c, s, k, it.next()) else {
                return Err(bad(format!("bad obstacle {part:?}")));
            };
            obstacles.push(Obstacle {
                cell: cell(c)?,
                shape: Shape::from_name(s).ok_or_else(|| bad(format!("bad shape {s:?}")))?,
                color: k.parse().map_err(|_| bad(format!("bad colour {k:?}")))?,
            });
        }
        let rec = EpisodeRecord {
            seed,
            layout_id,
            facing,
            start: cell(field("start")?)?,
            goal: cell(field("goal")?)?,
            obstacles,
            actions: actions_from_str(field("actions")?).ok_or_else(|| bad("bad actions".into()))?,
            detour: match field("detour")? {
                "0" => false,
                "1" => true,
                v => return Err(bad(format!("bad detour flag {v:?}"))),
            },
        };
        let expect = EpisodeRecord::from_world(&rec.world()).ok_or_else(|| bad("unsolvable world".into()))?;
        if expect != rec {
            return Err(bad(format!("record for seed {seed} does not match its world")));
        }
        Ok(rec)
    }
}

/// `n` episodes, exactly `n / 2` of them detour-required, taken in seed order
/// from the split's seed range.
pub fn gen_dataset(n: usize, dataset_seed: u64, split: Split, facing: StartFacing) -> Vec<EpisodeRecord> {
    let mut quota = [n - n / 2, n / 2];
    let mut out = Vec::with_capacity(n);
    let mut index = 0;
    while out.len() < n {
        let world = World::generate(world_seed(dataset_seed, split, index), facing);
        index += 1;
        let rec = EpisodeRecord::from_world(&world).expect("generated worlds are solvable");
        let slot = &mut quota[rec.detour as usize];
        if *slot > 0 {
            *slot -= 1;
            out.push(rec);
        }
    }
    out
}

pub fn write_records(path: &Path, records: &[EpisodeRecord]) -> std::io::Result<()> {
    let mut s = String::from("# privnav episodes v1\n");
    for r in records {
        s.push_str(&r.to_line());
        s.push('\n');
    }
    std::fs::write(path, s)
}

pub fn read_records(path: &Path) -> Result<Vec<EpisodeRecord>, Box<dyn std::error::Error + Send + Sync>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        out.push(EpisodeRecord::from_line(line)?);
    }
    Ok(out)
}

/// Replays `actions` from the record's start and reports whether it ends on the goal.
pub fn replays_to_goal(rec: &EpisodeRecord) -> bool {
    let mut w = rec.world();
    debug_assert_eq!(w.agent, START);
    for &a in &rec.actions {
        match w.step(a) {
            super::Outcome::Moved => {}
            super::Outcome::ReachedGoal => return true,
            _ => return false,
        }
    }
    false
}

/// Shortest obstacle-aware path length for a world, in moves.
pub fn optimal_len(world: &World) -> Option<usize> {
    bfs_shortest(world.layout(), world.agent, world.goal, Some(&world.obstacle_cells())).map(|a| super::path_len(&a))
}
