use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;

use super::grid::{Cell, OccupancyGrid};
use crate::entropy::{behavioral_entropy, occupancy_entropy, BehaviorParam, Probability};

/// Default half-width of the per-cell occupancy perturbation in `sample_reward`.
pub const SAMPLE_DELTA: f64 = 0.05;

/// Behavioral information gain: summed entropy over the disk of radius `r`
/// map units around `q`.
pub fn info_gain(map: &OccupancyGrid, q: Cell, r: f64, alpha: &BehaviorParam) -> f64 {
    map.disk(q, r).into_iter().map(|c| occupancy_entropy(map.get(c), alpha)).sum()
}

#[derive(Clone, Copy, PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Single-source shortest path lengths (map units) over traversable cells,
/// 8-connected, with no diagonal step past a blocked corner.
#[derive(Debug, Clone)]
pub struct DistanceField {
    source: Cell,
    resolution: f64,
    dist: Vec<f64>,
    width: usize,
}

impl DistanceField {
    pub fn new(map: &OccupancyGrid, source: Cell) -> Self {
        let n = map.len();
        let mut dist = vec![f64::INFINITY; n];
        let s = map.index(source);
        dist[s] = 0.0;
        let mut heap = BinaryHeap::from([Entry(0.0, s)]);
        let res = map.resolution();
        let diag = std::f64::consts::SQRT_2 * res;
        while let Some(Entry(d, i)) = heap.pop() {
            if d > dist[i] {
                continue;
            }
            let c = map.cell_at(i);
            for n in map.neighbors8(c) {
                if !map.is_traversable(n) {
                    continue;
                }
                let diagonal = n.x != c.x && n.y != c.y;
                if diagonal
                    && !(map.is_traversable(Cell::new(n.x, c.y))
                        && map.is_traversable(Cell::new(c.x, n.y)))
                {
                    continue;
                }
                let nd = d + if diagonal { diag } else { res };
                let j = map.index(n);
                if nd < dist[j] {
                    dist[j] = nd;
                    heap.push(Entry(nd, j));
                }
            }
        }
        Self { source, resolution: res, dist, width: map.width() }
    }

    pub fn source(&self) -> Cell {
        self.source
    }

    /// Path length to `c`, `None` when unreachable.
    pub fn path_length(&self, c: Cell) -> Option<f64> {
        let d = self.dist[c.y * self.width + c.x];
        d.is_finite().then_some(d)
    }

    /// Effective travel distance `eta`: path length, Euclidean when unreachable,
    /// and half a cell when `c` is the source.
    pub fn eta(&self, c: Cell) -> f64 {
        if c == self.source {
            return 0.5 * self.resolution;
        }
        self.path_length(c).unwrap_or_else(|| self.source.dist(c) * self.resolution)
    }

    /// Distance utility `1 / eta`.
    pub fn utility(&self, c: Cell) -> f64 {
        1.0 / self.eta(c)
    }
}

/// `1 / eta(x, q)`; see [`DistanceField::eta`].
pub fn distance_utility(map: &OccupancyGrid, x: Cell, q: Cell) -> f64 {
    DistanceField::new(map, x).utility(q)
}

/// Deterministic reward `info_gain * distance_utility`.
pub fn expected_reward(
    map: &OccupancyGrid,
    field: &DistanceField,
    q: Cell,
    r: f64,
    alpha: &BehaviorParam,
) -> f64 {
    info_gain(map, q, r, alpha) * field.utility(q)
}

/// Occupancy probabilities of the uncertain cells in a footprint, cached so
/// repeated sampling avoids rescanning the map.
#[derive(Debug, Clone)]
pub struct Footprint {
    uncertain: Vec<f64>,
}

impl Footprint {
    pub fn new(map: &OccupancyGrid, q: Cell, r: f64) -> Self {
        let uncertain = map
            .disk(q, r)
            .into_iter()
            .map(|c| map.get(c) / 100.0)
            .filter(|&p| p > 0.0 && p < 1.0)
            .collect();
        Self { uncertain }
    }

    pub fn from_probabilities(ps: &[f64]) -> Self {
        Self { uncertain: ps.iter().copied().filter(|&p| p > 0.0 && p < 1.0).collect() }
    }

    pub fn is_known(&self) -> bool {
        self.uncertain.is_empty()
    }

    pub fn uncertain_count(&self) -> usize {
        self.uncertain.len()
    }

    /// One stochastic information-gain draw: each uncertain cell's probability is
    /// jittered by `U[-delta, delta]` and clamped before evaluating its entropy.
    pub fn sample_gain(&self, alpha: &BehaviorParam, delta: f64, rng: &mut impl Rng) -> f64 {
        self.uncertain
            .iter()
            .map(|&p| {
                let jitter = if delta > 0.0 { rng.random_range(-delta..=delta) } else { 0.0 };
                behavioral_entropy(Probability::from_occupancy(100.0 * (p + jitter)), alpha)
            })
            .sum()
    }
}

/// One sample of the reward at frontier `q` for a robot whose distance field is `field`.
pub fn sample_reward(
    footprint: &Footprint,
    field: &DistanceField,
    q: Cell,
    alpha: &BehaviorParam,
    delta: f64,
    rng: &mut impl Rng,
) -> f64 {
    footprint.sample_gain(alpha, delta, rng) * field.utility(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use std::collections::VecDeque;
    use std::f64::consts::LN_2;

    #[test]
    fn info_gain_examples() {
        let bp = BehaviorParam::new(2.5).unwrap();
        let known = OccupancyGrid::from_values(3, 1, 0.1, vec![0.0, 100.0, 0.0]).unwrap();
        assert_eq!(info_gain(&known, Cell::new(1, 0), 0.2, &bp), 0.0);
        let half = OccupancyGrid::filled(9, 9, 0.1, 50.0);
        let k = half.disk(Cell::new(4, 4), 0.3).len();
        assert!((info_gain(&half, Cell::new(4, 4), 0.3, &bp) - k as f64 * LN_2).abs() < 1e-9);
    }

    #[test]
    fn info_gain_resum_and_additivity() {
        let mut rng = seeded(1, &[]);
        let vals: Vec<f64> = (0..400).map(|_| rng.random_range(0.0..=100.0)).collect();
        let g = OccupancyGrid::from_values(20, 20, 0.1, vals).unwrap();
        let bp = BehaviorParam::new(0.4).unwrap();
        let q = Cell::new(9, 11);
        let mut sum = 0.0;
        for y in 0..20usize {
            for x in 0..20usize {
                let (dx, dy) = (x as f64 - 9.0, y as f64 - 11.0);
                if (dx * dx + dy * dy).sqrt() <= 4.0 + 1e-9 {
                    sum += occupancy_entropy(g.get(Cell::new(x, y)), &bp);
                }
            }
        }
        assert!((info_gain(&g, q, 0.4, &bp) - sum).abs() < 1e-9);
        // Two disjoint disks: their union's gain equals the sum.
        let (a, b) = (Cell::new(3, 3), Cell::new(15, 15));
        let union: f64 = g
            .disk(a, 0.25)
            .into_iter()
            .chain(g.disk(b, 0.25))
            .map(|c| occupancy_entropy(g.get(c), &bp))
            .sum();
        let parts = info_gain(&g, a, 0.25, &bp) + info_gain(&g, b, 0.25, &bp);
        assert!((union - parts).abs() < 1e-9);
    }

    // Breadth-first oracle on 4-connected moves, valid when the optimal path is axis-aligned.
    fn bfs_steps(g: &OccupancyGrid, s: Cell, t: Cell) -> Option<usize> {
        let mut seen = vec![false; g.len()];
        let mut q = VecDeque::from([(s, 0)]);
        seen[g.index(s)] = true;
        while let Some((c, d)) = q.pop_front() {
            if c == t {
                return Some(d);
            }
            for n in g.neighbors4(c) {
                if g.is_traversable(n) && !seen[g.index(n)] {
                    seen[g.index(n)] = true;
                    q.push_back((n, d + 1));
                }
            }
        }
        None
    }

    #[test]
    fn distance_utility_examples() {
        let g = OccupancyGrid::filled(12, 3, 0.1, 100.0);
        let mut g = g;
        for x in 0..12 {
            g.set(Cell::new(x, 1), 0.0);
        }
        assert!((distance_utility(&g, Cell::new(0, 1), Cell::new(1, 1)) - 10.0).abs() < 1e-9);
        let u = distance_utility(&g, Cell::new(0, 1), Cell::new(10, 1));
        let steps = bfs_steps(&g, Cell::new(0, 1), Cell::new(10, 1)).unwrap();
        assert_eq!(steps, 10);
        assert!((u - 1.0 / (steps as f64 * 0.1)).abs() < 1e-9);
        assert_eq!(distance_utility(&g, Cell::new(4, 1), Cell::new(4, 1)), 1.0 / 0.05);
    }

    #[test]
    fn wall_forces_detour() {
        let mut g = OccupancyGrid::filled(11, 11, 0.1, 0.0);
        for y in 0..9 {
            g.set(Cell::new(5, y), 100.0);
        }
        let (s, t) = (Cell::new(2, 2), Cell::new(8, 2));
        let field = DistanceField::new(&g, s);
        let eta = field.eta(t);
        assert!(eta > g.distance(s, t) + 1e-9);
        let steps = bfs_steps(&g, s, t).unwrap() as f64 * 0.1;
        assert!(eta <= steps + 1e-9);
        // Unreachable target falls back to Euclidean distance.
        for y in 0..11 {
            g.set(Cell::new(5, y), 100.0);
        }
        let field = DistanceField::new(&g, s);
        assert!((field.eta(t) - g.distance(s, t)).abs() < 1e-12);
    }

    #[test]
    fn zero_delta_is_deterministic() {
        let mut rng = seeded(4, &[]);
        let vals: Vec<f64> = (0..100).map(|_| rng.random_range(0.0..=100.0)).collect();
        let g = OccupancyGrid::from_values(10, 10, 0.1, vals).unwrap();
        let bp = BehaviorParam::new(1.7).unwrap();
        let (x, q) = (Cell::new(1, 1), Cell::new(6, 6));
        let field = DistanceField::new(&g, x);
        let fp = Footprint::new(&g, q, 0.2);
        let s = sample_reward(&fp, &field, q, &bp, 0.0, &mut rng);
        let det = info_gain(&g, q, 0.2, &bp) * distance_utility(&g, x, q);
        assert!((s - det).abs() < 1e-9);
        let known = Footprint::from_probabilities(&[0.0, 1.0, 1.0]);
        assert!(known.is_known());
        assert_eq!(known.sample_gain(&bp, 0.05, &mut rng), 0.0);
    }

    #[test]
    fn sample_mean_matches_quadrature() {
        let bp = BehaviorParam::new(0.6).unwrap();
        let ps = [0.02, 0.5, 0.93];
        let delta = SAMPLE_DELTA;
        // E[H(clamp(p + U))] by composite Simpson on [p - delta, p + delta].
        let h = |u: f64| {
            let v = u.clamp(0.0, 1.0);
            behavioral_entropy(Probability::new(v).unwrap(), &bp)
        };
        let expect: f64 = ps
            .iter()
            .map(|&p| {
                let n = 20_000;
                let (a, b) = (p - delta, p + delta);
                let step = (b - a) / n as f64;
                let mut s = h(a) + h(b);
                for k in 1..n {
                    s += h(a + k as f64 * step) * if k % 2 == 1 { 4.0 } else { 2.0 };
                }
                s * step / 3.0 / (b - a)
            })
            .sum();
        let fp = Footprint::from_probabilities(&ps);
        let mut rng = seeded(8, &[]);
        let n = 10_000;
        let mean = (0..n).map(|_| fp.sample_gain(&bp, delta, &mut rng)).sum::<f64>() / n as f64;
        assert!((mean - expect).abs() / expect < 0.02, "{mean} vs {expect}");
    }
}
