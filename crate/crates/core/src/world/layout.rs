//! The shipped map layouts, parsed from `data/layouts.txt`.

use std::sync::OnceLock;

use super::{Cell, WorldError, GRID};

pub const LAYOUT_COUNT: usize = 12;

const LAYOUT_FILE: &str = include_str!("../../data/layouts.txt");

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    pub id: usize,
    road: [[bool; GRID]; GRID],
}

impl Layout {
    pub fn is_road(&self, cell: Cell) -> bool {
        self.road[cell.row][cell.col]
    }

    pub fn road_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        Cell::all().filter(|&c| self.is_road(c))
    }
}

/// Parses a layout file: a `version 1` line, then for every layout a
/// `layout <id>` line followed by five rows of `0`/`1`. `#` starts a comment.
pub fn parse_layouts(text: &str) -> Result<Vec<Layout>, WorldError> {
    let bad = |msg: String| WorldError::Layout(msg);
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some("version 1") => {}
        other => return Err(bad(format!("expected `version 1`, got {other:?}"))),
    }
    let mut out = Vec::new();
    while let Some(head) = lines.next() {
        let id: usize = head
            .strip_prefix("layout ")
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| bad(format!("expected `layout <id>`, got {head:?}")))?;
        if id != out.len() {
            return Err(bad(format!("layout {id} out of order")));
        }
        let mut road = [[false; GRID]; GRID];
        for (r, row) in road.iter_mut().enumerate() {
            let line = lines.next().ok_or_else(|| bad(format!("layout {id} has {r} rows")))?;
            if line.len() != GRID {
                return Err(bad(format!("layout {id} row {r}: {line:?}")));
            }
            for (c, ch) in line.chars().enumerate() {
                row[c] = match ch {
                    '1' => true,
                    '0' => false,
                    _ => return Err(bad(format!("layout {id} row {r}: bad cell {ch:?}"))),
                };
            }
        }
        let layout = Layout { id, road };
        check_layout(&layout)?;
        out.push(layout);
    }
    Ok(out)
}

/// Every border cell is road (the camera lanes) and all roads are connected.
fn check_layout(l: &Layout) -> Result<(), WorldError> {
    if Cell::all().any(|c| c.on_border() && !l.is_road(c)) {
        return Err(WorldError::Layout(format!("layout {} has a walled border cell", l.id)));
    }
    let mut seen = [[false; GRID]; GRID];
    let mut stack = vec![Cell::new(0, 0)];
    seen[0][0] = true;
    while let Some(c) = stack.pop() {
        for n in c.neighbours() {
            if l.is_road(n) && !seen[n.row][n.col] {
                seen[n.row][n.col] = true;
                stack.push(n);
            }
        }
    }
    if l.road_cells().any(|c| !seen[c.row][c.col]) {
        return Err(WorldError::Layout(format!("layout {} is not connected", l.id)));
    }
    Ok(())
}

pub fn layouts() -> &'static [Layout] {
    static CELL: OnceLock<Vec<Layout>> = OnceLock::new();
    CELL.get_or_init(|| {
        let l = parse_layouts(LAYOUT_FILE).expect("shipped layout file is valid");
        assert_eq!(l.len(), LAYOUT_COUNT);
        l
    })
}
