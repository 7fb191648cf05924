//! Breadth-first shortest paths on the road grid.

use std::collections::VecDeque;

use super::{Action, Cell, Dir, Layout, GRID};

/// Step distances from `from` over road cells avoiding `blocked`, indexed by [`Cell::index`].
pub fn distances(layout: &Layout, from: Cell, blocked: &[Cell]) -> [Option<usize>; GRID * GRID] {
    let mut dist = [None; GRID * GRID];
    if !layout.is_road(from) || blocked.contains(&from) {
        return dist;
    }
    dist[from.index()] = Some(0);
    let mut queue = VecDeque::from([from]);
    while let Some(c) = queue.pop_front() {
        let d = dist[c.index()].unwrap();
        for n in c.neighbours() {
            if layout.is_road(n) && !blocked.contains(&n) && dist[n.index()].is_none() {
                dist[n.index()] = Some(d + 1);
                queue.push_back(n);
            }
        }
    }
    dist
}

/// Shortest path from `start` to `goal` as moves followed by a stop.
///
/// Among equally short paths the one whose move sequence comes first in the
/// order N, S, E, W is returned: distances are taken from the goal and each
/// step picks the first move that gets one closer.
pub fn bfs_shortest(layout: &Layout, start: Cell, goal: Cell, obstacles: Option<&[Cell]>) -> Option<Vec<Action>> {
    let blocked = obstacles.unwrap_or(&[]);
    if blocked.contains(&start) {
        return None;
    }
    let dist = distances(layout, goal, blocked);
    let mut d = dist[start.index()]?;
    let mut cur = start;
    let mut out = Vec::with_capacity(d + 1);
    while d > 0 {
        let dir = Dir::ALL
            .into_iter()
            .find(|&dir| cur.offset(dir).is_some_and(|n| dist[n.index()] == Some(d - 1)))
            .expect("a BFS predecessor exists");
        out.push(Action::Move(dir));
        cur = cur.offset(dir).unwrap();
        d -= 1;
    }
    out.push(Action::Stop);
    Some(out)
}

/// Number of moves in an action sequence (the trailing stop is not a move).
pub fn path_len(actions: &[Action]) -> usize {
    actions.iter().filter(|a| **a != Action::Stop).count()
}

/// True iff avoiding the obstacles makes the shortest path strictly longer.
pub fn classify_detour(layout: &Layout, start: Cell, goal: Cell, obstacles: &[Cell]) -> Option<bool> {
    let with = bfs_shortest(layout, start, goal, Some(obstacles))?;
    let without = bfs_shortest(layout, start, goal, None)?;
    Some(path_len(&with) > path_len(&without))
}
