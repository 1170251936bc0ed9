//! RRT paths on occupancy grids and open-tour ordering of targets.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;

use crate::error::PlanError;
use crate::rng::seeded;
use crate::world::{Cell, OccupancyGrid};

/// Largest gap, in cells, between collision samples along a segment.
pub const SEGMENT_SAMPLE: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub waypoints: Vec<Cell>,
    /// Length in map units.
    pub length: f64,
}

impl Path {
    pub fn from_waypoints(waypoints: Vec<Cell>, resolution: f64) -> Self {
        let length = path_length(&waypoints, resolution);
        Self { waypoints, length }
    }

    /// Joins two paths; a shared junction waypoint is kept once.
    pub fn concat(&self, other: &Path) -> Path {
        let mut w = self.waypoints.clone();
        let skip = usize::from(w.last().is_some() && w.last() == other.waypoints.first());
        w.extend_from_slice(&other.waypoints[skip..]);
        Path { waypoints: w, length: self.length + other.length }
    }
}

/// Sum of straight segment lengths in map units.
pub fn path_length(waypoints: &[Cell], resolution: f64) -> f64 {
    waypoints.windows(2).map(|w| w[0].dist(w[1])).sum::<f64>() * resolution
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RrtParams {
    /// Extension step in cells.
    pub step: f64,
    pub max_iters: usize,
    pub goal_bias: f64,
    pub seed: u64,
}

impl Default for RrtParams {
    fn default() -> Self {
        Self { step: 3.0, max_iters: 5000, goal_bias: 0.1, seed: 0 }
    }
}

fn point(c: Cell) -> (f64, f64) {
    (c.x as f64, c.y as f64)
}

fn cell_of(map: &OccupancyGrid, p: (f64, f64)) -> Option<Cell> {
    let (x, y) = (p.0.round() as i64, p.1.round() as i64);
    map.in_bounds(x, y).then(|| Cell::new(x as usize, y as usize))
}

/// Every sample along the segment, at most half a cell apart, lies in a traversable cell.
pub fn segment_free(map: &OccupancyGrid, a: (f64, f64), b: (f64, f64)) -> bool {
    let d = (b.0 - a.0).hypot(b.1 - a.1);
    let n = (d / SEGMENT_SAMPLE).ceil().max(1.0) as usize;
    (0..=n).all(|k| {
        let s = k as f64 / n as f64;
        cell_of(map, (a.0 + s * (b.0 - a.0), a.1 + s * (b.1 - a.1))).is_some_and(|c| map.is_traversable(c))
    })
}

fn check_endpoints(map: &OccupancyGrid, start: Cell, goal: Cell) -> Result<(), PlanError> {
    if !map.contains(start) || !map.is_traversable(start) {
        return Err(PlanError::BlockedStart((start.x, start.y)));
    }
    if !map.contains(goal) || !map.is_traversable(goal) {
        return Err(PlanError::BlockedGoal((goal.x, goal.y)));
    }
    Ok(())
}

/// Greedy shortcutting: from each kept waypoint jump to the furthest one
/// reachable by a free straight segment.
pub fn smooth(map: &OccupancyGrid, waypoints: &[Cell]) -> Vec<Cell> {
    if waypoints.len() <= 2 {
        return waypoints.to_vec();
    }
    let mut out = vec![waypoints[0]];
    let mut i = 0;
    while i + 1 < waypoints.len() {
        let mut j = waypoints.len() - 1;
        while j > i + 1 && !segment_free(map, point(waypoints[i]), point(waypoints[j])) {
            j -= 1;
        }
        out.push(waypoints[j]);
        i = j;
    }
    out
}

/// Rapidly-exploring random tree from `start` to `goal`, smoothed.
pub fn rrt_path(map: &OccupancyGrid, start: Cell, goal: Cell, params: &RrtParams) -> Result<Path, PlanError> {
    check_endpoints(map, start, goal)?;
    let res = map.resolution();
    if start == goal {
        return Ok(Path { waypoints: vec![start], length: 0.0 });
    }
    let (s, g) = (point(start), point(goal));
    if segment_free(map, s, g) {
        return Ok(Path::from_waypoints(vec![start, goal], res));
    }
    let mut rng = seeded(params.seed, &[0x0072_7274]);
    let mut nodes: Vec<(f64, f64)> = vec![s];
    let mut parent: Vec<usize> = vec![0];
    let (w, h) = (map.width() as f64 - 1.0, map.height() as f64 - 1.0);
    for _ in 0..params.max_iters {
        let target = if rng.random_bool(params.goal_bias.clamp(0.0, 1.0)) {
            g
        } else {
            (rng.random_range(0.0..=w), rng.random_range(0.0..=h))
        };
        let near = (0..nodes.len())
            .min_by(|&a, &b| {
                let da = (nodes[a].0 - target.0).hypot(nodes[a].1 - target.1);
                let db = (nodes[b].0 - target.0).hypot(nodes[b].1 - target.1);
                da.total_cmp(&db)
            })
            .unwrap_or(0);
        let from = nodes[near];
        let d = (target.0 - from.0).hypot(target.1 - from.1);
        if d < 1e-9 {
            continue;
        }
        let k = (params.step / d).min(1.0);
        let Some(new_cell) = cell_of(map, (from.0 + k * (target.0 - from.0), from.1 + k * (target.1 - from.1)))
        else {
            continue;
        };
        let new = point(new_cell);
        if new == from || !segment_free(map, from, new) {
            continue;
        }
        nodes.push(new);
        parent.push(near);
        let last = nodes.len() - 1;
        if (new.0 - g.0).hypot(new.1 - g.1) <= params.step && segment_free(map, new, g) {
            nodes.push(g);
            parent.push(last);
            let mut chain = vec![nodes.len() - 1];
            while *chain.last().unwrap_or(&0) != 0 {
                chain.push(parent[*chain.last().unwrap_or(&0)]);
            }
            let cells: Vec<Cell> = chain
                .into_iter()
                .rev()
                .filter_map(|i| cell_of(map, nodes[i]))
                .collect();
            return Ok(Path::from_waypoints(smooth(map, &cells), res));
        }
    }
    Err(PlanError::NoPath(params.max_iters))
}

#[derive(Clone, Copy, PartialEq)]
struct Item(f64, usize);

impl Eq for Item {}

impl Ord for Item {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Item {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Shortest 8-connected grid path without corner cutting, smoothed.
pub fn grid_path(map: &OccupancyGrid, start: Cell, goal: Cell) -> Result<Path, PlanError> {
    check_endpoints(map, start, goal)?;
    let n = map.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut prev = vec![usize::MAX; n];
    let (s, t) = (map.index(start), map.index(goal));
    dist[s] = 0.0;
    let mut heap = BinaryHeap::from([Item(0.0, s)]);
    while let Some(Item(d, i)) = heap.pop() {
        if i == t {
            break;
        }
        if d > dist[i] {
            continue;
        }
        let c = map.cell_at(i);
        for nb in map.neighbors8(c) {
            if !map.is_traversable(nb) {
                continue;
            }
            let diag = nb.x != c.x && nb.y != c.y;
            if diag && !(map.is_traversable(Cell::new(nb.x, c.y)) && map.is_traversable(Cell::new(c.x, nb.y))) {
                continue;
            }
            let nd = d + if diag { std::f64::consts::SQRT_2 } else { 1.0 };
            let j = map.index(nb);
            if nd < dist[j] {
                dist[j] = nd;
                prev[j] = i;
                heap.push(Item(nd, j));
            }
        }
    }
    if !dist[t].is_finite() {
        return Err(PlanError::NoPath(0));
    }
    let mut cells = vec![goal];
    let mut cur = t;
    while cur != s {
        cur = prev[cur];
        cells.push(map.cell_at(cur));
    }
    cells.reverse();
    Ok(Path::from_waypoints(smooth(map, &cells), map.resolution()))
}

/// Visiting order of `targets` as an open tour from `start`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tour {
    pub order: Vec<usize>,
}

/// Open tour over points `1..n` starting at point 0: nearest-neighbour
/// construction from every first target, each refined by 2-opt and
/// segment relocation.
pub fn tsp_order(n: usize, dist: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    if n <= 1 {
        return Vec::new();
    }
    // One nearest-neighbour construction per choice of first target; keep the best local optimum.
    let mut best: Option<(f64, Vec<usize>)> = None;
    for first in 1..n {
        let mut seq = nearest_neighbor(n, first, &dist);
        improve(&mut seq, &dist);
        let l = open_length(&seq, &dist);
        if best.as_ref().map_or(true, |b| l < b.0 - 1e-12) {
            best = Some((l, seq));
        }
    }
    best.map(|(_, seq)| seq.into_iter().skip(1).map(|k| k - 1).collect()).unwrap_or_default()
}

fn nearest_neighbor(n: usize, first: usize, dist: &impl Fn(usize, usize) -> f64) -> Vec<usize> {
    let mut seq = vec![0, first];
    let mut left: Vec<usize> = (1..n).filter(|&k| k != first).collect();
    while !left.is_empty() {
        let cur = *seq.last().unwrap_or(&0);
        let (pos, _) = left
            .iter()
            .enumerate()
            .min_by(|a, b| dist(cur, *a.1).total_cmp(&dist(cur, *b.1)).then(a.1.cmp(b.1)))
            .unwrap_or((0, &0));
        seq.push(left.remove(pos));
    }
    seq
}

/// 2-opt reversals and segment moves until neither shortens the tour.
fn improve(seq: &mut Vec<usize>, dist: &impl Fn(usize, usize) -> f64) {
    loop {
        let mut improved = false;
        for i in 1..seq.len() - 1 {
            for j in i + 1..seq.len() {
                let before = dist(seq[i - 1], seq[i]) + seq.get(j + 1).map_or(0.0, |&b| dist(seq[j], b));
                let after = dist(seq[i - 1], seq[j]) + seq.get(j + 1).map_or(0.0, |&b| dist(seq[i], b));
                if after < before - 1e-12 {
                    seq[i..=j].reverse();
                    improved = true;
                }
            }
        }
        improved |= or_opt_pass(seq, dist);
        if !improved {
            break;
        }
    }
}

fn open_length(seq: &[usize], dist: &impl Fn(usize, usize) -> f64) -> f64 {
    seq.windows(2).map(|w| dist(w[0], w[1])).sum()
}

/// Moves one segment of up to three points to its best other position,
/// possibly reversed. Returns whether the tour got shorter.
fn or_opt_pass(seq: &mut Vec<usize>, dist: &impl Fn(usize, usize) -> f64) -> bool {
    let base = open_length(seq, dist);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for len in 1..=3usize {
        for i in 1..seq.len() {
            if i + len > seq.len() {
                break;
            }
            let seg: Vec<usize> = seq[i..i + len].to_vec();
            let mut rest: Vec<usize> = seq[..i].to_vec();
            rest.extend_from_slice(&seq[i + len..]);
            for at in 1..=rest.len() {
                for rev in [false, true] {
                    let mut cand = rest[..at].to_vec();
                    if rev {
                        cand.extend(seg.iter().rev());
                    } else {
                        cand.extend_from_slice(&seg);
                    }
                    cand.extend_from_slice(&rest[at..]);
                    let l = open_length(&cand, dist);
                    if l < base - 1e-12 && best.as_ref().map_or(true, |b| l < b.0) {
                        best = Some((l, cand));
                    }
                }
            }
        }
    }
    match best {
        Some((_, cand)) => {
            *seq = cand;
            true
        }
        None => false,
    }
}

/// Euclidean open tour from `start` through every target.
pub fn tsp_tour(start: Cell, targets: &[Cell]) -> Tour {
    let pts: Vec<Cell> = std::iter::once(start).chain(targets.iter().copied()).collect();
    Tour { order: tsp_order(pts.len(), |a, b| pts[a].dist(pts[b])) }
}

/// Length of an open tour in cells.
pub fn tour_length(start: Cell, targets: &[Cell], tour: &Tour) -> f64 {
    let mut cur = start;
    let mut total = 0.0;
    for &k in &tour.order {
        total += cur.dist(targets[k]);
        cur = targets[k];
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::mapgen::{generate_map, MapKind};

    fn open(w: usize, h: usize) -> OccupancyGrid {
        OccupancyGrid::filled(w, h, 0.1, 0.0)
    }

    fn revalidate(map: &OccupancyGrid, p: &Path) {
        for w in p.waypoints.windows(2) {
            assert!(segment_free(map, point(w[0]), point(w[1])), "{:?}", w);
        }
        assert!((p.length - path_length(&p.waypoints, map.resolution())).abs() < 1e-9);
    }

    #[test]
    fn path_length_examples() {
        assert_eq!(path_length(&[], 0.1), 0.0);
        assert_eq!(path_length(&[Cell::new(1, 1)], 0.1), 0.0);
        assert!((path_length(&[Cell::new(0, 0), Cell::new(3, 4)], 0.1) - 0.5).abs() < 1e-12);
        let a = Path::from_waypoints(vec![Cell::new(0, 0), Cell::new(3, 4)], 0.1);
        let b = Path::from_waypoints(vec![Cell::new(3, 4), Cell::new(3, 9)], 0.1);
        let ab = a.concat(&b);
        assert!((ab.length - (a.length + b.length)).abs() < 1e-12);
        assert!((path_length(&ab.waypoints, 0.1) - ab.length).abs() < 1e-12);
    }

    #[test]
    fn rrt_examples() {
        let m = open(30, 30);
        let p = rrt_path(&m, Cell::new(4, 4), Cell::new(4, 4), &RrtParams::default()).unwrap();
        assert_eq!((p.waypoints.len(), p.length), (1, 0.0));
        let (s, g) = (Cell::new(2, 3), Cell::new(25, 20));
        let p = rrt_path(&m, s, g, &RrtParams::default()).unwrap();
        assert!(p.length <= 1.3 * m.distance(s, g));
        let mut blocked = m.clone();
        blocked.set(g, 100.0);
        assert_eq!(rrt_path(&blocked, s, g, &RrtParams::default()), Err(PlanError::BlockedGoal((25, 20))));
    }

    #[test]
    fn rrt_on_generated_maps_is_collision_free_and_deterministic() {
        for seed in 0..6 {
            let m = generate_map(MapKind::Rooms, 40, 40, 0.1, seed).unwrap();
            let free: Vec<Cell> = m.cells().filter(|&c| m.is_traversable(c)).collect();
            let (s, g) = (free[3], free[free.len() - 5]);
            let params = RrtParams { seed, ..RrtParams::default() };
            let p = rrt_path(&m, s, g, &params).unwrap();
            revalidate(&m, &p);
            assert_eq!(p.waypoints.first(), Some(&s));
            assert_eq!(p.waypoints.last(), Some(&g));
            assert_eq!(p, rrt_path(&m, s, g, &params).unwrap());
            let q = grid_path(&m, s, g).unwrap();
            revalidate(&m, &q);
        }
    }

    #[test]
    fn rrt_reports_unreachable() {
        let mut m = open(20, 20);
        for y in 0..20 {
            m.set(Cell::new(10, y), 100.0);
        }
        let params = RrtParams { max_iters: 300, ..RrtParams::default() };
        assert_eq!(rrt_path(&m, Cell::new(2, 2), Cell::new(17, 17), &params), Err(PlanError::NoPath(300)));
        assert!(grid_path(&m, Cell::new(2, 2), Cell::new(17, 17)).is_err());
    }

    fn all_perms(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in all_perms(n - 1) {
            for i in 0..=p.len() {
                let mut q = p.clone();
                q.insert(i, n - 1);
                out.push(q);
            }
        }
        out
    }

    #[test]
    fn tsp_examples() {
        let s = Cell::new(0, 0);
        assert_eq!(tsp_tour(s, &[Cell::new(5, 5)]).order, vec![0]);
        let t = [Cell::new(9, 0), Cell::new(2, 0), Cell::new(5, 0)];
        let tour = tsp_tour(s, &t);
        assert_eq!(tour.order, vec![1, 2, 0]);
        let best = all_perms(3)
            .into_iter()
            .min_by(|a, b| {
                tour_length(s, &t, &Tour { order: a.clone() }).total_cmp(&tour_length(s, &t, &Tour { order: b.clone() }))
            })
            .unwrap();
        assert_eq!(best, tour.order);
    }

    #[test]
    fn tsp_near_optimal() {
        let mut rng = seeded(51, &[]);
        for _ in 0..50 {
            let n = rng.random_range(2..=8);
            let s = Cell::new(rng.random_range(0..50), rng.random_range(0..50));
            let t: Vec<Cell> = (0..n).map(|_| Cell::new(rng.random_range(0..50), rng.random_range(0..50))).collect();
            let tour = tsp_tour(s, &t);
            let mut sorted = tour.order.clone();
            sorted.sort_unstable();
            assert_eq!(sorted, (0..n).collect::<Vec<_>>());
            let got = tour_length(s, &t, &tour);
            let opt = all_perms(n)
                .into_iter()
                .map(|p| tour_length(s, &t, &Tour { order: p }))
                .fold(f64::INFINITY, f64::min);
            assert!(got <= 1.05 * opt + 1e-9, "{got} vs {opt}");
            // 2-opt never lengthens the nearest-neighbour start.
            let mut nn = vec![];
            let mut cur = s;
            let mut left: Vec<usize> = (0..n).collect();
            while !left.is_empty() {
                let (pos, _) = left
                    .iter()
                    .enumerate()
                    .min_by(|a, b| cur.dist(t[*a.1]).total_cmp(&cur.dist(t[*b.1])).then(a.1.cmp(b.1)))
                    .unwrap();
                let k = left.remove(pos);
                nn.push(k);
                cur = t[k];
            }
            assert!(got <= tour_length(s, &t, &Tour { order: nn }) + 1e-9);
        }
    }
}
