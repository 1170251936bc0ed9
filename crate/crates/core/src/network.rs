//! Time-varying directed communication graphs.
//!
//! An arc `(j, i)` means agent `i` hears agent `j`. Union windows are
//! `(k*tau, (k+1)*tau]`, so window `k` covers steps `k*tau + 1 ..= (k+1)*tau`.

use std::collections::VecDeque;

use crate::error::GraphError;
use crate::rng::unit_open;

pub type Arc = (usize, usize);

pub trait GraphSequence {
    /// Number of agents.
    fn n(&self) -> usize;

    /// Claimed connectivity period.
    fn tau(&self) -> usize;

    /// Arcs active at step `t`.
    fn arcs(&self, t: u64) -> Vec<Arc>;

    /// In-neighbour lists at step `t`, each sorted, excluding the agent itself.
    fn in_neighbors(&self, t: u64) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n()];
        for (j, i) in self.arcs(t) {
            if i != j {
                out[i].push(j);
            }
        }
        for v in &mut out {
            v.sort_unstable();
            v.dedup();
        }
        out
    }
}

/// `{ j | (j, i) active at t }`, optionally with `i` itself.
pub fn neighbors_in(seq: &impl GraphSequence, i: usize, t: u64, closed: bool) -> Vec<usize> {
    let mut v: Vec<usize> =
        seq.arcs(t).into_iter().filter(|&(j, k)| k == i && j != i).map(|(j, _)| j).collect();
    if closed {
        v.push(i);
    }
    v.sort_unstable();
    v.dedup();
    v
}

/// The same arc set at every step.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticGraph {
    n: usize,
    tau: usize,
    arcs: Vec<Arc>,
}

impl StaticGraph {
    pub fn new(n: usize, arcs: Vec<Arc>) -> Result<Self, GraphError> {
        if let Some(&(a, b)) = arcs.iter().find(|&&(a, b)| a >= n || b >= n) {
            return Err(GraphError::BadAgent(a.max(b)));
        }
        Ok(Self { n, tau: 1, arcs })
    }

    pub fn complete(n: usize) -> Self {
        let arcs = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (j, i)));
        Self { n, tau: 1, arcs: arcs.collect() }
    }

    /// Bidirectional ring.
    pub fn ring(n: usize) -> Self {
        let mut arcs = Vec::new();
        if n > 1 {
            for c in 0..n {
                let d = (c + 1) % n;
                arcs.push((c, d));
                arcs.push((d, c));
            }
        }
        arcs.sort_unstable();
        arcs.dedup();
        Self { n, tau: 1, arcs }
    }

    /// Directed cycle `0 -> 1 -> ... -> n-1 -> 0`.
    pub fn directed_cycle(n: usize) -> Self {
        let arcs = if n > 1 { (0..n).map(|c| (c, (c + 1) % n)).collect() } else { Vec::new() };
        Self { n, tau: 1, arcs }
    }

    pub fn with_tau(mut self, tau: usize) -> Self {
        self.tau = tau.max(1);
        self
    }
}

impl GraphSequence for StaticGraph {
    fn n(&self) -> usize {
        self.n
    }
    fn tau(&self) -> usize {
        self.tau
    }
    fn arcs(&self, _t: u64) -> Vec<Arc> {
        self.arcs.clone()
    }
}

/// Slot of step `t` within its window.
fn slot(t: u64, tau: usize) -> usize {
    (t.saturating_sub(1) % tau as u64) as usize
}

/// Bidirectional ring whose edges are spread over `tau` slots: edge `c`
/// (between `c` and `c+1`) is active at step `t` when `c mod tau` equals the slot of `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeriodicRing {
    n: usize,
    tau: usize,
}

impl PeriodicRing {
    pub fn new(n: usize, tau: usize) -> Self {
        Self { n, tau: tau.max(1) }
    }
}

impl GraphSequence for PeriodicRing {
    fn n(&self) -> usize {
        self.n
    }
    fn tau(&self) -> usize {
        self.tau
    }
    fn arcs(&self, t: u64) -> Vec<Arc> {
        if self.n < 2 {
            return Vec::new();
        }
        let s = slot(t, self.tau);
        let mut arcs = Vec::new();
        for c in (0..self.n).filter(|c| c % self.tau == s) {
            let d = (c + 1) % self.n;
            arcs.push((c, d));
            arcs.push((d, c));
        }
        arcs
    }
}

/// Arcs of the rotating spanning cycle active at step `t`.
pub fn patch_arcs(n: usize, tau: usize, t: u64) -> Vec<Arc> {
    if n < 2 {
        return Vec::new();
    }
    let s = slot(t, tau);
    (0..n).filter(|c| c % tau == s).map(|c| (c, (c + 1) % n)).collect()
}

/// Per-step random arcs, each present independently with probability `p`,
/// plus the rotating spanning-cycle patch that makes every window strongly connected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomPatched {
    n: usize,
    tau: usize,
    p: f64,
    seed: u64,
}

impl RandomPatched {
    pub fn new(n: usize, tau: usize, p: f64, seed: u64) -> Self {
        Self { n, tau: tau.max(1), p: p.clamp(0.0, 1.0), seed }
    }
}

impl GraphSequence for RandomPatched {
    fn n(&self) -> usize {
        self.n
    }
    fn tau(&self) -> usize {
        self.tau
    }
    fn arcs(&self, t: u64) -> Vec<Arc> {
        let mut arcs = patch_arcs(self.n, self.tau, t);
        for j in 0..self.n {
            for i in 0..self.n {
                if i != j && unit_open(self.seed, &[t, j as u64, i as u64]) < self.p {
                    arcs.push((j, i));
                }
            }
        }
        arcs.sort_unstable();
        arcs.dedup();
        arcs
    }
}

/// A fixed base arc set plus the rotating spanning-cycle patch.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchedGraph {
    n: usize,
    tau: usize,
    base: Vec<Arc>,
}

impl PatchedGraph {
    pub fn new(n: usize, tau: usize, base: Vec<Arc>) -> Self {
        Self { n, tau: tau.max(1), base }
    }
}

impl GraphSequence for PatchedGraph {
    fn n(&self) -> usize {
        self.n
    }
    fn tau(&self) -> usize {
        self.tau
    }
    fn arcs(&self, t: u64) -> Vec<Arc> {
        let mut arcs = self.base.clone();
        arcs.extend(patch_arcs(self.n, self.tau, t));
        arcs.sort_unstable();
        arcs.dedup();
        arcs
    }
}

/// Symmetric arcs between robots that can see at least one common task.
/// `visible[i]` lists the tasks agent `i` sees.
pub fn shared_frontier_arcs(visible: &[Vec<usize>]) -> Vec<Arc> {
    let mut arcs = Vec::new();
    for i in 0..visible.len() {
        for j in i + 1..visible.len() {
            if visible[i].iter().any(|q| visible[j].contains(q)) {
                arcs.push((i, j));
                arcs.push((j, i));
            }
        }
    }
    arcs
}

/// Symmetric arcs between points within `radius` of each other.
pub fn proximity_graph(positions: &[(f64, f64)], radius: f64) -> Vec<Arc> {
    let mut arcs = Vec::new();
    for i in 0..positions.len() {
        for j in i + 1..positions.len() {
            let (a, b) = (positions[i], positions[j]);
            if (a.0 - b.0).hypot(a.1 - b.1) <= radius {
                arcs.push((i, j));
                arcs.push((j, i));
            }
        }
    }
    arcs
}

/// Union of arcs over window `k`.
pub fn union_graph(seq: &impl GraphSequence, k: u64) -> Vec<Arc> {
    let tau = seq.tau() as u64;
    let mut arcs: Vec<Arc> = (k * tau + 1..=(k + 1) * tau).flat_map(|t| seq.arcs(t)).collect();
    arcs.sort_unstable();
    arcs.dedup();
    arcs
}

/// Hop distances from `src` along arc direction.
fn bfs(n: usize, out: &[Vec<usize>], src: usize) -> Vec<Option<usize>> {
    let mut d = vec![None; n];
    d[src] = Some(0);
    let mut q = VecDeque::from([src]);
    while let Some(u) = q.pop_front() {
        let du = d[u].unwrap_or(0);
        for &v in &out[u] {
            if d[v].is_none() {
                d[v] = Some(du + 1);
                q.push_back(v);
            }
        }
    }
    d
}

fn out_lists(n: usize, arcs: &[Arc]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); n];
    for &(j, i) in arcs {
        if i != j {
            out[j].push(i);
        }
    }
    out
}

pub fn strongly_connected(n: usize, arcs: &[Arc]) -> bool {
    diameter(n, arcs).is_ok()
}

/// Largest shortest-path length over ordered pairs.
pub fn diameter(n: usize, arcs: &[Arc]) -> Result<usize, GraphError> {
    let out = out_lists(n, arcs);
    let mut best = 0;
    for s in 0..n {
        for d in bfs(n, &out, s) {
            best = best.max(d.ok_or(GraphError::Disconnected)?);
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Validation {
    pub windows_checked: u64,
    pub first_failure: Option<u64>,
}

impl Validation {
    pub fn is_valid(&self) -> bool {
        self.first_failure.is_none()
    }
}

/// Checks strong connectivity of every union window fully inside `1..=horizon`.
pub fn validate_assumption(seq: &impl GraphSequence, horizon: u64) -> Validation {
    let windows = horizon / seq.tau() as u64;
    let first_failure = (0..windows).find(|&k| !strongly_connected(seq.n(), &union_graph(seq, k)));
    Validation { windows_checked: windows, first_failure }
}

/// Largest union-window diameter over the first `windows` windows.
pub fn max_window_diameter(seq: &impl GraphSequence, windows: u64) -> Result<usize, GraphError> {
    (0..windows).try_fold(0, |acc, k| Ok(acc.max(diameter(seq.n(), &union_graph(seq, k))?)))
}
