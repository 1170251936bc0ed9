use std::fmt::Write as _;
use std::path::Path;

use crate::error::GridError;

/// Occupancy at or above this value blocks motion.
pub const TRAVERSABLE_BELOW: f64 = 50.0;

/// Integer grid coordinate; `y = 0` is the top row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
}

impl Cell {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }

    /// Euclidean distance in cells.
    pub fn dist(self, other: Cell) -> f64 {
        let dx = self.x as f64 - other.x as f64;
        let dy = self.y as f64 - other.y as f64;
        dx.hypot(dy)
    }
}

/// Dense 2D occupancy grid with values in `[0, 100]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    resolution: f64,
    values: Vec<f64>,
}

impl OccupancyGrid {
    pub fn from_values(
        width: usize,
        height: usize,
        resolution: f64,
        values: Vec<f64>,
    ) -> Result<Self, GridError> {
        if width == 0 || height == 0 {
            return Err(GridError::Invalid("dimensions must be positive".into()));
        }
        if !(resolution > 0.0 && resolution.is_finite()) {
            return Err(GridError::Invalid(format!("bad resolution {resolution}")));
        }
        if values.len() != width * height {
            return Err(GridError::Invalid(format!(
                "expected {} values, got {}",
                width * height,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=100.0).contains(*v)) {
            return Err(GridError::Invalid(format!("value {v} outside [0,100]")));
        }
        Ok(Self { width, height, resolution, values })
    }

    /// Grid with every cell set to `value` (clamped into range).
    pub fn filled(width: usize, height: usize, resolution: f64, value: f64) -> Self {
        assert!(width > 0 && height > 0 && resolution > 0.0);
        Self { width, height, resolution, values: vec![value.clamp(0.0, 100.0); width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Map units per cell.
    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn index(&self, c: Cell) -> usize {
        c.y * self.width + c.x
    }

    #[inline]
    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new(index % self.width, index / self.width)
    }

    pub fn in_bounds(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    pub fn contains(&self, c: Cell) -> bool {
        c.x < self.width && c.y < self.height
    }

    #[inline]
    pub fn get(&self, c: Cell) -> f64 {
        self.values[self.index(c)]
    }

    /// Sets a cell, clamping into `[0, 100]`.
    #[inline]
    pub fn set(&mut self, c: Cell, v: f64) {
        let i = self.index(c);
        self.values[i] = v.clamp(0.0, 100.0);
    }

    pub fn is_traversable(&self, c: Cell) -> bool {
        self.get(c) < TRAVERSABLE_BELOW
    }

    /// True when every cell is exactly 0 or 100.
    pub fn is_ground_truth(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0 || v == 100.0)
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.height).flat_map(move |y| (0..self.width).map(move |x| Cell::new(x, y)))
    }

    /// In-bounds 8-neighbourhood of `c`.
    pub fn neighbors8(&self, c: Cell) -> impl Iterator<Item = Cell> + '_ {
        const OFFSETS: [(i64, i64); 8] =
            [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];
        OFFSETS.iter().filter_map(move |&(dx, dy)| {
            let (x, y) = (c.x as i64 + dx, c.y as i64 + dy);
            self.in_bounds(x, y).then(|| Cell::new(x as usize, y as usize))
        })
    }

    /// In-bounds 4-neighbourhood of `c`.
    pub fn neighbors4(&self, c: Cell) -> impl Iterator<Item = Cell> + '_ {
        const OFFSETS: [(i64, i64); 4] = [(0, -1), (-1, 0), (1, 0), (0, 1)];
        OFFSETS.iter().filter_map(move |&(dx, dy)| {
            let (x, y) = (c.x as i64 + dx, c.y as i64 + dy);
            self.in_bounds(x, y).then(|| Cell::new(x as usize, y as usize))
        })
    }

    /// Distance between cell centres in map units.
    pub fn distance(&self, a: Cell, b: Cell) -> f64 {
        a.dist(b) * self.resolution
    }

    /// Length of the map diagonal in map units.
    pub fn diagonal(&self) -> f64 {
        (self.width as f64).hypot(self.height as f64) * self.resolution
    }

    /// Cells whose centres lie within `radius` map units of `center`, row-major order.
    pub fn disk(&self, center: Cell, radius: f64) -> Vec<Cell> {
        let rc = radius / self.resolution;
        let r2 = rc * rc + 1e-9;
        let span = rc.floor() as i64;
        let mut out = Vec::new();
        for dy in -span..=span {
            for dx in -span..=span {
                let (x, y) = (center.x as i64 + dx, center.y as i64 + dy);
                if self.in_bounds(x, y) && ((dx * dx + dy * dy) as f64) <= r2 {
                    out.push(Cell::new(x as usize, y as usize));
                }
            }
        }
        out
    }

    /// Renders the `OGRID` text format. Values use the shortest representation
    /// that parses back to the same `f64`.
    pub fn to_ogrid_string(&self) -> String {
        let mut s = String::with_capacity(self.values.len() * 4 + 32);
        let _ = writeln!(s, "OGRID {} {} {}", self.width, self.height, self.resolution);
        for row in self.values.chunks(self.width) {
            let mut first = true;
            for v in row {
                if !first {
                    s.push(' ');
                }
                first = false;
                let _ = write!(s, "{v}");
            }
            s.push('\n');
        }
        s
    }

    pub fn parse_ogrid(text: &str) -> Result<Self, GridError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (hline, header) =
            lines.next().ok_or(GridError::Parse { line: 1, msg: "empty file".into() })?;
        let hline = hline + 1;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 4 || parts[0] != "OGRID" {
            return Err(GridError::Parse {
                line: hline,
                msg: "expected header `OGRID <width> <height> <resolution>`".into(),
            });
        }
        let bad = |what: &str| GridError::Parse { line: hline, msg: format!("bad {what}") };
        let width: usize = parts[1].parse().map_err(|_| bad("width"))?;
        let height: usize = parts[2].parse().map_err(|_| bad("height"))?;
        let resolution: f64 = parts[3].parse().map_err(|_| bad("resolution"))?;
        if width == 0 || height == 0 || !(resolution > 0.0 && resolution.is_finite()) {
            return Err(GridError::Parse { line: hline, msg: "non-positive dimensions".into() });
        }
        let mut values = Vec::with_capacity(width * height);
        let mut rows = 0;
        for (idx, line) in lines {
            let lineno = idx + 1;
            if rows == height {
                return Err(GridError::Parse { line: lineno, msg: "too many rows".into() });
            }
            let before = values.len();
            for tok in line.split_whitespace() {
                let v: f64 = tok.parse().map_err(|_| GridError::Parse {
                    line: lineno,
                    msg: format!("invalid number `{tok}`"),
                })?;
                if !(0.0..=100.0).contains(&v) {
                    return Err(GridError::Parse {
                        line: lineno,
                        msg: format!("value {v} outside [0,100]"),
                    });
                }
                values.push(v);
            }
            if values.len() - before != width {
                return Err(GridError::Parse {
                    line: lineno,
                    msg: format!("expected {width} values, found {}", values.len() - before),
                });
            }
            rows += 1;
        }
        if rows != height {
            return Err(GridError::Parse {
                line: text.lines().count() + 1,
                msg: format!("expected {height} rows, found {rows}"),
            });
        }
        Self::from_values(width, height, resolution, values)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), GridError> {
        std::fs::write(path, self.to_ogrid_string())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, GridError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_ogrid(&text)
    }
}

/// Reads an `OGRID` file.
pub fn load_grid_file(path: impl AsRef<Path>) -> Result<OccupancyGrid, GridError> {
    OccupancyGrid::load(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_small_file() {
        let g = OccupancyGrid::parse_ogrid("OGRID 2 2 0.1\n0 100\n37.5 0\n").unwrap();
        assert_eq!(g.values(), &[0.0, 100.0, 37.5, 0.0]);
        assert_eq!(g.get(Cell::new(0, 1)), 37.5);
    }

    #[test]
    fn rejects_out_of_range_with_line() {
        let err = OccupancyGrid::parse_ogrid("OGRID 2 2 0.1\n0 0\n101 0\n").unwrap_err();
        match err {
            GridError::Parse { line, .. } => assert_eq!(line, 3),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn rejects_bad_header_and_ragged_rows() {
        assert!(matches!(
            OccupancyGrid::parse_ogrid("GRID 2 2 0.1\n0 0\n0 0\n"),
            Err(GridError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            OccupancyGrid::parse_ogrid("OGRID 2 2 0.1\n0 0 0\n0 0\n"),
            Err(GridError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            OccupancyGrid::parse_ogrid("OGRID 2 2 0.1\n0 0\n"),
            Err(GridError::Parse { .. })
        ));
    }

    #[test]
    fn disk_contains_expected_cells() {
        let g = OccupancyGrid::filled(11, 11, 0.1, 0.0);
        let d = g.disk(Cell::new(5, 5), 0.1);
        assert_eq!(d.len(), 5);
        let d = g.disk(Cell::new(0, 0), 0.2);
        assert_eq!(d.len(), 6);
    }

    proptest! {
        #[test]
        fn ogrid_round_trip(w in 1usize..8, h in 1usize..8, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let values: Vec<f64> = (0..w * h).map(|_| rng.random_range(0.0..=100.0)).collect();
            let g = OccupancyGrid::from_values(w, h, 0.1, values).unwrap();
            let back = OccupancyGrid::parse_ogrid(&g.to_ogrid_string()).unwrap();
            prop_assert_eq!(back.to_ogrid_string(), g.to_ogrid_string());
            prop_assert_eq!(back, g);
        }
    }
}
