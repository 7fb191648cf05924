use std::collections::HashSet;
use std::path::PathBuf;

use privnav::world::dataset::{gen_dataset, read_records, replays_to_goal, world_seed, write_records, EpisodeRecord, Split};
use privnav::world::render::{lane, obstacle_bounds, AGENT_CAMERA, HEIGHT, WIDTH};
use privnav::world::{
    bfs_shortest, classify_detour, layouts, path_len, render, Action, Cell, Dir, Layout, Obstacle, Outcome, Shape, StartFacing,
    World, GRID, LAYOUT_COUNT, START,
};
use privnav::rng;
use rand::Rng;

/// Every simple path from `start`, tracking the shortest length to `goal` and
/// the first such path in N, S, E, W order.
fn exhaustive(layout: &Layout, start: Cell, goal: Cell, blocked: &[Cell]) -> Option<(usize, Vec<Action>)> {
    fn go(
        layout: &Layout,
        cur: Cell,
        goal: Cell,
        blocked: &[Cell],
        seen: &mut [bool; GRID * GRID],
        path: &mut Vec<Action>,
        best: &mut Option<(usize, Vec<Action>)>,
    ) {
        if cur == goal {
            let better = match best {
                None => true,
                Some((len, _)) => path.len() < *len,
            };
            if better {
                *best = Some((path.len(), path.clone()));
            }
            return;
        }
        if best.as_ref().is_some_and(|(len, _)| path.len() >= *len) {
            return;
        }
        for d in Dir::ALL {
            if let Some(n) = cur.offset(d) {
                if layout.is_road(n) && !blocked.contains(&n) && !seen[n.index()] {
                    seen[n.index()] = true;
                    path.push(Action::Move(d));
                    go(layout, n, goal, blocked, seen, path, best);
                    path.pop();
                    seen[n.index()] = false;
                }
            }
        }
    }
    let mut seen = [false; GRID * GRID];
    seen[start.index()] = true;
    let mut best = None;
    go(layout, start, goal, blocked, &mut seen, &mut Vec::new(), &mut best);
    best
}

#[test]
fn layouts_are_connected_rings() {
    assert_eq!(layouts().len(), LAYOUT_COUNT);
    let mut distinct = HashSet::new();
    for l in layouts() {
        assert!(Cell::all().filter(|c| c.on_border()).all(|c| l.is_road(c)));
        distinct.insert(Cell::all().map(|c| l.is_road(c)).collect::<Vec<_>>());
    }
    assert_eq!(distinct.len(), LAYOUT_COUNT);
}

#[test]
fn generation_is_deterministic_and_solvable() {
    let mut counts = [0usize; 4];
    let mut cones = 0;
    let mut total_obstacles = 0;
    for seed in 0..10_000u64 {
        let w = World::generate(seed, StartFacing::Random);
        assert_eq!(w, World::generate(seed, StartFacing::Random));
        assert_eq!(w.agent, START);
        assert!(matches!(w.facing, Dir::E | Dir::S));
        assert!(w.oracle_actions().is_some(), "seed {seed} unsolvable");
        assert!((1..=3).contains(&w.obstacles.len()));
        for o in &w.obstacles {
            assert!(o.cell.on_border() && o.cell != START && o.cell != w.goal);
        }
        counts[w.obstacles.len()] += 1;
        cones += w.obstacles.iter().filter(|o| o.shape == Shape::Cone).count();
        total_obstacles += w.obstacles.len();
        let fixed = World::generate(seed, StartFacing::Fixed);
        assert_eq!(fixed.facing, Dir::E);
        assert_eq!((fixed.goal, &fixed.obstacles), (w.goal, &w.obstacles));
    }
    assert!(counts[1..].iter().all(|&c| c > 2_000), "{counts:?}");
    let freq = cones as f64 / total_obstacles as f64;
    assert!((freq - 0.10).abs() <= 0.02, "cone frequency {freq}");
}

#[test]
fn bfs_examples() {
    let ring = &layouts()[3];
    assert_eq!(bfs_shortest(ring, START, START, None), Some(vec![Action::Stop]));
    let e = Action::Move(Dir::E);
    assert_eq!(bfs_shortest(ring, START, Cell::new(0, 4), None), Some(vec![e, e, e, e, Action::Stop]));
    let blocked = [Cell::new(0, 2)];
    let detour = bfs_shortest(ring, START, Cell::new(0, 4), Some(&blocked)).unwrap();
    assert_eq!(path_len(&detour), 12);
    assert_eq!(exhaustive(ring, START, Cell::new(0, 4), &blocked).unwrap().0, 12);
    // With the middle row open the detour shrinks to eight moves.
    let row2 = &layouts()[0];
    let detour = bfs_shortest(row2, START, Cell::new(0, 4), Some(&blocked)).unwrap();
    assert_eq!(path_len(&detour), 8);
    assert_eq!(exhaustive(row2, START, Cell::new(0, 4), &blocked).unwrap().0, 8);
    assert_eq!(bfs_shortest(ring, START, Cell::new(2, 2), None), None);
}

#[test]
fn bfs_is_optimal_and_lexicographic_on_all_layouts() {
    let mut r = rng::stream(3, 0);
    for layout in layouts() {
        let roads: Vec<Cell> = layout.road_cells().collect();
        let lanes: Vec<Cell> = roads.iter().copied().filter(|c| c.on_border() && *c != START).collect();
        for _ in 0..1_000 {
            let k = r.gen_range(0..=3);
            let blocked: Vec<Cell> = (0..k).map(|_| lanes[r.gen_range(0..lanes.len())]).collect();
            let start = if r.gen_bool(0.3) { roads[r.gen_range(0..roads.len())] } else { START };
            let goal = roads[r.gen_range(0..roads.len())];
            let got = bfs_shortest(layout, start, goal, Some(&blocked));
            let oracle = if blocked.contains(&start) || blocked.contains(&goal) {
                None
            } else {
                exhaustive(layout, start, goal, &blocked)
            };
            match (got, oracle) {
                (None, None) => {}
                (Some(path), Some((len, first))) => {
                    assert_eq!(path_len(&path), len);
                    assert_eq!(path[..len], first[..], "tie-break on layout {}", layout.id);
                    assert_eq!(path.last(), Some(&Action::Stop));
                }
                (a, b) => panic!("layout {} {start}->{goal} {blocked:?}: {a:?} vs {b:?}", layout.id),
            }
        }
    }
}

#[test]
fn detour_classification_follows_definition() {
    let mut seen = [0usize; 2];
    for seed in 0..1_000 {
        let w = World::generate(seed, StartFacing::Random);
        let blocked = w.obstacle_cells();
        let with = exhaustive(w.layout(), START, w.goal, &blocked).unwrap().0;
        let without = exhaustive(w.layout(), START, w.goal, &[]).unwrap().0;
        let flag = classify_detour(w.layout(), START, w.goal, &blocked).unwrap();
        assert_eq!(flag, with > without, "seed {seed}");
        seen[flag as usize] += 1;
    }
    assert!(seen[0] > 0 && seen[1] > 0);
    let ring = &layouts()[3];
    assert_eq!(classify_detour(ring, START, Cell::new(0, 4), &[Cell::new(4, 4)]), Some(false));
    assert_eq!(classify_detour(ring, START, Cell::new(0, 4), &[Cell::new(0, 3)]), Some(true));
}

fn empty_world(layout_id: usize) -> World {
    World {
        seed: 0,
        layout_id,
        agent: START,
        facing: Dir::E,
        goal: Cell::new(4, 4),
        obstacles: Vec::new(),
        steps: 0,
    }
}

#[test]
fn step_outcomes() {
    let mut w = empty_world(3);
    w.goal = START;
    assert_eq!(w.clone().step(Action::Stop), Outcome::ReachedGoal);
    assert_eq!(w.clone().step(Action::Move(Dir::W)), Outcome::CrashWall);
    assert_eq!(w.clone().step(Action::Move(Dir::N)), Outcome::CrashWall);
    w.obstacles.push(Obstacle {
        cell: Cell::new(0, 1),
        shape: Shape::Box,
        color: 0,
    });
    assert_eq!(w.clone().step(Action::Move(Dir::E)), Outcome::CrashObstacle);
    let mut m = w.clone();
    assert_eq!(m.step(Action::Move(Dir::S)), Outcome::Moved);
    assert_eq!((m.agent, m.facing, m.steps), (Cell::new(1, 0), Dir::S, 1));
    assert_eq!(m.step(Action::Move(Dir::E)), Outcome::CrashWall);
    assert_eq!(m.clone().step(Action::Stop), Outcome::Stopped);
    assert!(w.step_index(5).is_err());
}

#[test]
fn map_grid_codes() {
    let w = empty_world(0);
    let g = w.map_grid();
    assert_eq!(g[0], 2);
    assert_eq!(g[24], 3);
    assert_eq!(g[6], 0);
    assert_eq!(g[11], 1);
    let mut on_goal = w.clone();
    on_goal.goal = START;
    assert_eq!(on_goal.map_grid()[0], 2);
    assert_eq!(on_goal.map_grid().iter().filter(|&&c| c == 3).count(), 0);
}

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn fnv(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3))
}

/// Set `PRIVNAV_BLESS=1` to rewrite the golden files after an intended
/// renderer change.
#[test]
fn empty_lanes_match_golden_images() {
    let bless = std::env::var_os("PRIVNAV_BLESS").is_some();
    let mut digests = String::new();
    for layout in 0..LAYOUT_COUNT {
        for camera in 0..=AGENT_CAMERA {
            let img = render(&empty_world(layout), camera).unwrap();
            digests.push_str(&format!("layout={layout} camera={camera} fnv={:016x}\n", fnv(&img.pixels)));
            if layout == 2 {
                let path = golden_dir().join(format!("layout2_cam{camera}.ppm"));
                if bless {
                    std::fs::write(&path, img.to_ppm()).unwrap();
                }
                let want = privnav::world::CameraImage::from_ppm(&std::fs::read(&path).unwrap()).unwrap();
                assert_eq!(img, want, "layout 2 camera {camera}");
            }
        }
    }
    let path = golden_dir().join("empty_lanes.txt");
    if bless {
        std::fs::write(&path, &digests).unwrap();
    }
    assert_eq!(digests, std::fs::read_to_string(path).unwrap());
}

#[test]
fn obstacles_only_touch_their_bounding_box() {
    let base = empty_world(4);
    for camera in 0..4 {
        let (cells, _) = lane(&base, camera).unwrap();
        for (d, cell) in cells.iter().enumerate() {
            let cell = cell.unwrap();
            if cell == START {
                continue;
            }
            for shape in [Shape::Box, Shape::Ball, Shape::Cone] {
                let mut w = base.clone();
                w.obstacles.push(Obstacle { cell, shape, color: 2 });
                let a = render(&base, camera).unwrap();
                let b = render(&w, camera).unwrap();
                assert_eq!(b, render(&w, camera).unwrap());
                let (x0, x1, y0, y1) = obstacle_bounds(d);
                let mut changed = 0;
                for y in 0..HEIGHT {
                    for x in 0..WIDTH {
                        if a.get(x, y) != b.get(x, y) {
                            assert!((x0..=x1).contains(&x) && (y0..=y1).contains(&y));
                            changed += 1;
                        }
                    }
                }
                assert!(changed > 0, "camera {camera} depth {d} {shape:?} invisible");
            }
        }
    }
}

#[test]
fn every_legal_obstacle_cell_is_seen_by_a_corner_camera() {
    for l in 0..LAYOUT_COUNT {
        let base = empty_world(l);
        for cell in layouts()[l].road_cells().filter(|c| c.on_border() && *c != START) {
            let mut w = base.clone();
            w.obstacles.push(Obstacle {
                cell,
                shape: Shape::Cone,
                color: 5,
            });
            assert!(
                (0..4).any(|cam| render(&w, cam).unwrap() != render(&base, cam).unwrap()),
                "layout {l} cell {cell}"
            );
        }
    }
}

#[test]
fn agent_view_ends_at_walls() {
    let mut w = empty_world(3);
    w.agent = Cell::new(0, 2);
    w.facing = Dir::S;
    let img = render(&w, AGENT_CAMERA).unwrap();
    // Facing into the interior wall: every row below the horizon is wall.
    let wall = img.get(30, 40);
    assert!((9..HEIGHT).all(|y| img.get(0, y) == wall && img.get(59, y) == wall));
    w.facing = Dir::E;
    let open = render(&w, AGENT_CAMERA).unwrap();
    assert_ne!(open.get(30, 40), wall);
}

#[test]
fn dataset_is_balanced_disjoint_and_replayable() {
    let n = 15_000;
    let train = gen_dataset(n, 7, Split::Train, StartFacing::Random);
    let detours = train.iter().filter(|r| r.detour).count() as f64 / n as f64;
    assert!((0.49..=0.51).contains(&detours), "{detours}");
    let test = gen_dataset(2_250, 7, Split::Test, StartFacing::Random);
    let a: HashSet<u64> = train.iter().map(|r| r.seed).collect();
    assert!(test.iter().all(|r| !a.contains(&r.seed)));
    assert!(train.iter().all(|r| r.seed < world_seed(7, Split::Test, 0)));
    assert!(train.iter().take(2_000).all(replays_to_goal));
    assert!(test.iter().all(replays_to_goal));
}

#[test]
fn records_round_trip_through_text() {
    let recs = gen_dataset(50, 3, Split::Train, StartFacing::Random);
    for r in &recs {
        assert_eq!(&EpisodeRecord::from_line(&r.to_line()).unwrap(), r);
    }
    let dir = std::env::temp_dir().join(format!("privnav-records-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("train.txt");
    write_records(&path, &recs).unwrap();
    assert_eq!(read_records(&path).unwrap(), recs);
    let line = recs[0].to_line().replace("detour=0", "detour=1").replace("detour=1 ", "detour=0 ");
    let tampered = if line == recs[0].to_line() { line.replace("layout=", "layout=1") } else { line };
    assert!(EpisodeRecord::from_line(&tampered).is_err());
    std::fs::remove_dir_all(dir).unwrap();
}
