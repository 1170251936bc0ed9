//! Synthetic ground-truth maps and the initial-uncertainty noise model.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grid::{Cell, OccupancyGrid};
use crate::error::GridError;
use crate::rng::seeded;

pub const FREE: f64 = 0.0;
pub const OCCUPIED: f64 = 100.0;

const MIN_SIDE: usize = 20;
const MAX_ATTEMPTS: u64 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapKind {
    Open,
    Rooms,
    Corridors,
}

impl FromStr for MapKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "open" => Ok(Self::Open),
            "rooms" => Ok(Self::Rooms),
            "corridors" => Ok(Self::Corridors),
            other => Err(format!("unknown map kind `{other}`")),
        }
    }
}

impl fmt::Display for MapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Open => "open",
            Self::Rooms => "rooms",
            Self::Corridors => "corridors",
        })
    }
}

/// Builds a `{0, 100}` ground-truth map with a solid border and 4-connected free space.
pub fn generate_map(
    kind: MapKind,
    width: usize,
    height: usize,
    resolution: f64,
    seed: u64,
) -> Result<OccupancyGrid, GridError> {
    if width < MIN_SIDE || height < MIN_SIDE {
        return Err(GridError::Generation(format!(
            "map must be at least {MIN_SIDE}x{MIN_SIDE}, got {width}x{height}"
        )));
    }
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(GridError::Generation(format!("bad resolution {resolution}")));
    }
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = seeded(seed, &[0x6d61_7067, attempt]);
        let mut g = OccupancyGrid::filled(width, height, resolution, OCCUPIED);
        match kind {
            MapKind::Open => carve_rect(&mut g, 1, 1, width - 2, height - 2),
            MapKind::Rooms => rooms(&mut g, &mut rng),
            MapKind::Corridors => corridors(&mut g, &mut rng),
        }
        if free_space_connected(&g) {
            return Ok(g);
        }
    }
    Err(GridError::Generation(format!(
        "no connected {kind} map after {MAX_ATTEMPTS} attempts"
    )))
}

fn carve_rect(g: &mut OccupancyGrid, x0: usize, y0: usize, x1: usize, y1: usize) {
    for y in y0..=y1 {
        for x in x0..=x1 {
            g.set(Cell::new(x, y), FREE);
        }
    }
}

/// Wall positions along one axis: the two borders plus interior walls
/// spaced so that every room is 7 to 12 cells across.
fn wall_lines(len: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut lines = vec![0];
    let mut pos = 0;
    loop {
        let step = rng.random_range(8..=13);
        if pos + step + 8 > len - 1 {
            break;
        }
        pos += step;
        lines.push(pos);
    }
    lines.push(len - 1);
    lines
}

fn rooms(g: &mut OccupancyGrid, rng: &mut ChaCha8Rng) {
    let (w, h) = (g.width(), g.height());
    let xs = wall_lines(w, rng);
    let ys = wall_lines(h, rng);
    for wy in ys.windows(2) {
        for wx in xs.windows(2) {
            carve_rect(g, wx[0] + 1, wy[0] + 1, wx[1] - 1, wy[1] - 1);
        }
    }
    // A door through every interior wall segment keeps the room graph connected.
    for wy in ys.windows(2) {
        for &x in &xs[1..xs.len() - 1] {
            let (lo, hi) = (wy[0] + 1, wy[1] - 1);
            let width = rng.random_range(2..=3).min(hi - lo + 1);
            let start = rng.random_range(lo..=hi + 1 - width);
            for y in start..start + width {
                g.set(Cell::new(x, y), FREE);
            }
        }
    }
    for wx in xs.windows(2) {
        for &y in &ys[1..ys.len() - 1] {
            let (lo, hi) = (wx[0] + 1, wx[1] - 1);
            let width = rng.random_range(2..=3).min(hi - lo + 1);
            let start = rng.random_range(lo..=hi + 1 - width);
            for x in start..start + width {
                g.set(Cell::new(x, y), FREE);
            }
        }
    }
    // A few pillars inside larger rooms.
    for wy in ys.windows(2) {
        for wx in xs.windows(2) {
            if wx[1] - wx[0] >= 11 && wy[1] - wy[0] >= 11 && rng.random_bool(0.5) {
                let cx = rng.random_range(wx[0] + 4..=wx[1] - 4);
                let cy = rng.random_range(wy[0] + 4..=wy[1] - 4);
                g.set(Cell::new(cx, cy), OCCUPIED);
            }
        }
    }
}

fn corridors(g: &mut OccupancyGrid, rng: &mut ChaCha8Rng) {
    // Maze over a coarse lattice: 3-cell corridors separated by 1-cell walls.
    const PITCH: usize = 4;
    let cw = (g.width() - 1) / PITCH;
    let ch = (g.height() - 1) / PITCH;
    let origin = |cx: usize, cy: usize| (1 + cx * PITCH, 1 + cy * PITCH);
    let mut visited = vec![false; cw * ch];
    let mut stack = vec![(0usize, 0usize)];
    visited[0] = true;
    let (x0, y0) = origin(0, 0);
    carve_rect(g, x0, y0, x0 + PITCH - 2, y0 + PITCH - 2);
    while let Some(&(cx, cy)) = stack.last() {
        let mut options = Vec::with_capacity(4);
        if cx > 0 && !visited[cy * cw + cx - 1] {
            options.push((cx - 1, cy));
        }
        if cx + 1 < cw && !visited[cy * cw + cx + 1] {
            options.push((cx + 1, cy));
        }
        if cy > 0 && !visited[(cy - 1) * cw + cx] {
            options.push((cx, cy - 1));
        }
        if cy + 1 < ch && !visited[(cy + 1) * cw + cx] {
            options.push((cx, cy + 1));
        }
        if options.is_empty() {
            stack.pop();
            continue;
        }
        let (nx, ny) = options[rng.random_range(0..options.len())];
        visited[ny * cw + nx] = true;
        let (ax, ay) = origin(cx.min(nx), cy.min(ny));
        let (bx, by) = origin(cx.max(nx), cy.max(ny));
        carve_rect(g, ax, ay, bx + PITCH - 2, by + PITCH - 2);
        stack.push((nx, ny));
    }
    // Open a handful of extra links so the maze has loops.
    let extra = (cw * ch) / 6;
    for _ in 0..extra {
        let cx = rng.random_range(0..cw);
        let cy = rng.random_range(0..ch);
        if cx + 1 < cw {
            let (ax, ay) = origin(cx, cy);
            let (bx, by) = origin(cx + 1, cy);
            carve_rect(g, ax, ay, bx + PITCH - 2, by + PITCH - 2);
        }
    }
}

/// 4-connected flood fill over free cells.
pub fn free_space_connected(g: &OccupancyGrid) -> bool {
    let Some(start) = g.cells().find(|&c| g.get(c) == FREE) else {
        return false;
    };
    let total = g.values().iter().filter(|&&v| v == FREE).count();
    let mut seen = vec![false; g.len()];
    seen[g.index(start)] = true;
    let mut queue = VecDeque::from([start]);
    let mut count = 1;
    while let Some(c) = queue.pop_front() {
        for n in g.neighbors4(c) {
            let i = g.index(n);
            if !seen[i] && g.get(n) == FREE {
                seen[i] = true;
                count += 1;
                queue.push_back(n);
            }
        }
    }
    count == total
}

/// Upper bound of the uniform noise applied in each quadrant:
/// top-left, top-right, bottom-right, bottom-left.
pub const QUADRANT_NOISE: [f64; 4] = [50.0, 80.0, 30.0, 20.0];

/// Quadrant noise bound for a cell.
pub fn quadrant_noise_bound(g: &OccupancyGrid, c: Cell) -> f64 {
    let left = c.x < g.width() / 2;
    let top = c.y < g.height() / 2;
    match (top, left) {
        (true, true) => QUADRANT_NOISE[0],
        (true, false) => QUADRANT_NOISE[1],
        (false, false) => QUADRANT_NOISE[2],
        (false, true) => QUADRANT_NOISE[3],
    }
}

/// Initial belief map: each cell moves from its true value toward 50 by a
/// `U[0, bound]` draw whose bound depends on the quadrant. A band of
/// `border` cells around the edge is left exact.
pub fn add_quadrant_noise(truth: &OccupancyGrid, border: usize, rng: &mut impl Rng) -> OccupancyGrid {
    let mut out = truth.clone();
    let (w, h) = (truth.width(), truth.height());
    for c in truth.cells() {
        if c.x < border || c.y < border || c.x + border >= w || c.y + border >= h {
            continue;
        }
        let u = rng.random_range(0.0..=quadrant_noise_bound(truth, c));
        let v = truth.get(c);
        out.set(c, if v >= 50.0 { v - u } else { v + u });
    }
    out
}
