use std::collections::VecDeque;

use super::grid::{Cell, OccupancyGrid};

/// A candidate free cell must be below this value.
pub const FRONTIER_MAX: f64 = 2.0;
/// Neighbour values strictly inside `(UNCERTAIN_LO, UNCERTAIN_HI)` count as unexplored.
pub const UNCERTAIN_LO: f64 = 2.0;
pub const UNCERTAIN_HI: f64 = 98.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Frontier {
    pub cell: Cell,
    pub cluster_id: usize,
    /// Member of the cluster nearest its centroid.
    pub representative: Cell,
}

/// One connected group of frontier cells.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontierCluster {
    pub id: usize,
    pub representative: Cell,
    pub cells: Vec<Cell>,
}

pub fn is_frontier_cell(map: &OccupancyGrid, c: Cell) -> bool {
    let v = map.get(c);
    v < FRONTIER_MAX
        && map.neighbors8(c).any(|n| {
            let nv = map.get(n);
            nv > UNCERTAIN_LO && nv < UNCERTAIN_HI
        })
}

/// Frontier cells in row-major order, labelled by 8-connected cluster.
/// Cluster ids follow the row-major position of each cluster's first cell.
pub fn extract_frontiers(map: &OccupancyGrid) -> Vec<Frontier> {
    let mut flag = vec![false; map.len()];
    for c in map.cells() {
        flag[map.index(c)] = is_frontier_cell(map, c);
    }
    let mut label = vec![usize::MAX; map.len()];
    let mut reps = Vec::new();
    for start in 0..map.len() {
        if !flag[start] || label[start] != usize::MAX {
            continue;
        }
        let id = reps.len();
        let mut members = Vec::new();
        let mut queue = VecDeque::from([map.cell_at(start)]);
        label[start] = id;
        while let Some(c) = queue.pop_front() {
            members.push(c);
            for n in map.neighbors8(c) {
                let i = map.index(n);
                if flag[i] && label[i] == usize::MAX {
                    label[i] = id;
                    queue.push_back(n);
                }
            }
        }
        reps.push(nearest_to_centroid(&members));
    }
    map.cells()
        .filter(|&c| flag[map.index(c)])
        .map(|c| {
            let id = label[map.index(c)];
            Frontier { cell: c, cluster_id: id, representative: reps[id] }
        })
        .collect()
}

fn nearest_to_centroid(members: &[Cell]) -> Cell {
    let n = members.len() as f64;
    let cx = members.iter().map(|c| c.x as f64).sum::<f64>() / n;
    let cy = members.iter().map(|c| c.y as f64).sum::<f64>() / n;
    let d = |c: &Cell| (c.x as f64 - cx).powi(2) + (c.y as f64 - cy).powi(2);
    // Ties go to the smallest cell in (y, x) order.
    *members
        .iter()
        .min_by(|a, b| d(a).total_cmp(&d(b)).then((a.y, a.x).cmp(&(b.y, b.x))))
        .expect("clusters are non-empty")
}

/// Groups frontier cells by cluster id, ordered by id.
pub fn clusters(frontiers: &[Frontier]) -> Vec<FrontierCluster> {
    let mut out: Vec<FrontierCluster> = Vec::new();
    for f in frontiers {
        if f.cluster_id >= out.len() {
            out.resize_with(f.cluster_id + 1, || FrontierCluster {
                id: 0,
                representative: f.representative,
                cells: Vec::new(),
            });
        }
        let slot = &mut out[f.cluster_id];
        slot.id = f.cluster_id;
        slot.representative = f.representative;
        slot.cells.push(f.cell);
    }
    out.retain(|c| !c.cells.is_empty());
    out
}

/// Frontiers within `radius` map units of `pos`. The radius doubles until at
/// least one frontier is inside or it reaches the map diagonal. Returns the
/// selection and the radius that produced it.
pub fn frontiers_in_radius(
    map: &OccupancyGrid,
    frontiers: &[Frontier],
    pos: Cell,
    radius: f64,
) -> (Vec<Frontier>, f64) {
    let diag = map.diagonal();
    let mut r = radius;
    loop {
        let found: Vec<Frontier> =
            frontiers.iter().copied().filter(|f| map.distance(pos, f.cell) <= r).collect();
        if !found.is_empty() {
            return (found, r);
        }
        if r >= diag {
            return (found, diag);
        }
        r = (r * 2.0).min(diag);
    }
}
