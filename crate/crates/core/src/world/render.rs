//! Synthetic 3x45x60 camera images.
//!
//! Every camera looks down one lane of five cells. Rows below the horizon are
//! split into five depth slices, nearest at the bottom; slice `d` shows the
//! lane cell at depth `d` as a corridor floor flanked by side strips whose
//! colour tells whether the neighbouring cell is open road or wall. A wall or
//! the grid edge ends the corridor and hides everything behind it. Obstacles
//! are filled primitives standing on their slice, drawn in the slice's rows
//! only, so they never overlap each other.

use super::{Cell, Dir, Shape, World, WorldError};

pub const CHANNELS: usize = 3;
pub const HEIGHT: usize = 45;
pub const WIDTH: usize = 60;
pub const IMAGE_LEN: usize = CHANNELS * HEIGHT * WIDTH;
/// Four corner cameras plus the agent's own view (id 4).
pub const CAMERA_COUNT: usize = 5;
pub const AGENT_CAMERA: usize = 4;
pub const DEPTHS: usize = 5;

const HORIZON: usize = 8;
/// Bottom row of each depth slice's obstacle band.
const BASE: [usize; DEPTHS] = [44, 34, 26, 19, 13];
/// Obstacle height per depth; bands are `BASE - HEIGHT + 1 ..= BASE`.
const BAND: [usize; DEPTHS] = [9, 7, 6, 5, 4];
/// Corridor half-width per depth.
const HALF: [usize; DEPTHS] = [28, 22, 16, 12, 9];
const CENTER: f64 = WIDTH as f64 / 2.0;

type Rgb = [u8; 3];

const SKY: Rgb = [140, 178, 230];
const FLOOR: [Rgb; DEPTHS] = [[150, 150, 150], [135, 135, 135], [120, 120, 120], [105, 105, 105], [90, 90, 90]];
const END_WALL: Rgb = [110, 70, 50];
const SIDE_WALL: Rgb = [120, 80, 60];
const SIDE_OPEN: Rgb = [190, 190, 170];

pub const PALETTE: [Rgb; super::PALETTE_SIZE] = [
    [200, 40, 40],
    [40, 160, 60],
    [40, 80, 200],
    [220, 200, 40],
    [140, 60, 170],
    [230, 120, 30],
];

/// Camera position and viewing direction of corner camera `id`.
pub fn corner_camera(id: usize) -> (Cell, Dir) {
    match id {
        0 => (Cell::new(0, 0), Dir::E),
        1 => (Cell::new(0, 4), Dir::S),
        2 => (Cell::new(4, 4), Dir::W),
        3 => (Cell::new(4, 0), Dir::N),
        _ => panic!("corner camera {id}"),
    }
}

/// Planar RGB image, `[channel][row][col]`, 8 bits per sample.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CameraImage {
    pub pixels: Vec<u8>,
}

impl CameraImage {
    fn filled(c: Rgb) -> Self {
        let mut pixels = vec![0; IMAGE_LEN];
        for (ch, plane) in pixels.chunks_mut(HEIGHT * WIDTH).enumerate() {
            plane.fill(c[ch]);
        }
        CameraImage { pixels }
    }

    fn set(&mut self, x: usize, y: usize, c: Rgb) {
        for (ch, &v) in c.iter().enumerate() {
            self.pixels[ch * HEIGHT * WIDTH + y * WIDTH + x] = v;
        }
    }

    pub fn get(&self, x: usize, y: usize) -> Rgb {
        let at = |ch: usize| self.pixels[ch * HEIGHT * WIDTH + y * WIDTH + x];
        [at(0), at(1), at(2)]
    }

    /// Samples scaled to `[0, 1]`.
    pub fn to_unit<T: num_traits::Float>(&self) -> Vec<T> {
        let scale = T::from(255.0).unwrap();
        self.pixels.iter().map(|&v| T::from(v).unwrap() / scale).collect()
    }

    /// Binary PPM (P6).
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{WIDTH} {HEIGHT}\n255\n").into_bytes();
        for y in 0..HEIGHT {
            for x in 0..WIDTH {
                out.extend_from_slice(&self.get(x, y));
            }
        }
        out
    }

    pub fn from_ppm(buf: &[u8]) -> Option<Self> {
        let header = format!("P6\n{WIDTH} {HEIGHT}\n255\n").into_bytes();
        let body = buf.strip_prefix(header.as_slice())?;
        if body.len() != IMAGE_LEN {
            return None;
        }
        let mut img = CameraImage::filled([0; 3]);
        for (i, px) in body.chunks_exact(3).enumerate() {
            img.set(i % WIDTH, i / WIDTH, [px[0], px[1], px[2]]);
        }
        Some(img)
    }
}

/// Depth slice of an image row below the horizon.
fn slice_of_row(y: usize) -> Option<usize> {
    match y {
        36..=44 => Some(0),
        28..=35 => Some(1),
        21..=27 => Some(2),
        15..=20 => Some(3),
        9..=14 => Some(4),
        _ => None,
    }
}

/// Lane cells seen by `camera`, nearest first; `None` past the grid edge.
pub fn lane(world: &World, camera: usize) -> Result<(Vec<Option<Cell>>, Dir), WorldError> {
    let (origin, dir, first) = match camera {
        0..=3 => {
            let (c, d) = corner_camera(camera);
            (c, d, 0)
        }
        AGENT_CAMERA => (world.agent, world.facing, 1),
        _ => return Err(WorldError::BadCamera(camera)),
    };
    let mut cells = Vec::with_capacity(DEPTHS);
    let mut cur = Some(origin);
    for _ in 0..first {
        cur = cur.and_then(|c| c.offset(dir));
    }
    for _ in 0..DEPTHS {
        cells.push(cur);
        cur = cur.and_then(|c| c.offset(dir));
    }
    Ok((cells, dir))
}

pub fn render(world: &World, camera: usize) -> Result<CameraImage, WorldError> {
    let (cells, dir) = lane(world, camera)?;
    let layout = world.layout();
    let open = |c: Option<Cell>| c.is_some_and(|c| layout.is_road(c));
    // The first non-road slice ends the corridor.
    let visible = cells.iter().take_while(|c| open(**c)).count();
    let (left, right) = dir.sides();
    let mut img = CameraImage::filled(SKY);
    for y in HORIZON + 1..HEIGHT {
        let d = slice_of_row(y).unwrap();
        if d >= visible {
            for x in 0..WIDTH {
                img.set(x, y, END_WALL);
            }
            continue;
        }
        let cell = cells[d].unwrap();
        let side = |s: Dir| if open(cell.offset(s)) { SIDE_OPEN } else { SIDE_WALL };
        let (lc, rc) = (side(left), side(right));
        let lo = WIDTH / 2 - HALF[d];
        let hi = WIDTH / 2 + HALF[d];
        for x in 0..WIDTH {
            let c = if x < lo {
                lc
            } else if x >= hi {
                rc
            } else {
                FLOOR[d]
            };
            img.set(x, y, c);
        }
    }
    for (d, cell) in cells.iter().enumerate().take(visible) {
        if let Some(o) = world.obstacle_at(cell.unwrap()) {
            draw_obstacle(&mut img, d, o.shape, PALETTE[o.color]);
        }
    }
    Ok(img)
}

/// Pixel box that an obstacle at depth `d` may touch: `(x0, x1, y0, y1)`, inclusive.
pub fn obstacle_bounds(d: usize) -> (usize, usize, usize, usize) {
    let h = BAND[d];
    (WIDTH / 2 - h, WIDTH / 2 + h, BASE[d] + 1 - h, BASE[d])
}

fn draw_obstacle(img: &mut CameraImage, d: usize, shape: Shape, color: Rgb) {
    let h = BAND[d] as f64;
    let (x0, x1, y0, y1) = obstacle_bounds(d);
    let top = y0 as f64;
    for y in y0..=y1 {
        for x in x0..=x1 {
            let px = x as f64 + 0.5 - CENTER;
            let py = y as f64 + 0.5;
            let inside = match shape {
                Shape::Box => px.abs() <= 0.8 * h,
                Shape::Ball => {
                    let r = h / 2.0;
                    let cy = top + r;
                    px * px + (py - cy) * (py - cy) <= r * r + 0.25
                }
                Shape::Cone => px.abs() <= 0.6 * (py - top) + 0.5,
            };
            if inside {
                img.set(x, y, color);
            }
        }
    }
}
