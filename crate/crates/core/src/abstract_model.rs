//! Cell-level exploration abstraction: agents hop between cells chosen by
//! entropy-per-distance, and each visit contracts the belief toward the truth.

use std::io::Write;

use rand::Rng;

use crate::entropy::{behavioral_entropy, BehaviorParam, Probability};
use crate::error::DomainError;

#[derive(Debug, Clone, PartialEq)]
pub struct AbstractWorld {
    eta: Vec<Vec<f64>>,
    p: Vec<f64>,
    p_star: Vec<f64>,
    lambda: f64,
    hypothesis: bool,
}

impl AbstractWorld {
    pub fn new(eta: Vec<Vec<f64>>, p: Vec<f64>, p_star: Vec<f64>, lambda: f64) -> Result<Self, DomainError> {
        let n = p.len();
        if n == 0 || p_star.len() != n || eta.len() != n || eta.iter().any(|r| r.len() != n) {
            return Err(DomainError::new("inconsistent world dimensions"));
        }
        for i in 0..n {
            for j in 0..n {
                if i != j && !(eta[i][j] > 0.0 && eta[i][j].is_finite()) {
                    return Err(DomainError::new(format!("eta({i},{j}) must be positive")));
                }
                if (eta[i][j] - eta[j][i]).abs() > 1e-12 {
                    return Err(DomainError::new(format!("eta is not symmetric at ({i},{j})")));
                }
            }
        }
        if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(DomainError::new("beliefs must lie in [0,1]"));
        }
        if p_star.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(DomainError::new("ground truth must be 0 or 1"));
        }
        if !(0.0..1.0).contains(&lambda) {
            return Err(DomainError::new(format!("lambda must be in [0,1), got {lambda}")));
        }
        let hypothesis = p.iter().zip(&p_star).all(|(a, b)| (a - b).abs() < 0.5);
        Ok(Self { eta, p, p_star, lambda, hypothesis })
    }

    pub fn n(&self) -> usize {
        self.p.len()
    }

    pub fn beliefs(&self) -> &[f64] {
        &self.p
    }

    pub fn truth(&self) -> &[f64] {
        &self.p_star
    }

    pub fn eta(&self, i: usize, j: usize) -> f64 {
        self.eta[i][j]
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Whether every initial belief was within 0.5 of its truth.
    pub fn hypothesis_held(&self) -> bool {
        self.hypothesis
    }

    /// Summed Shannon entropy of all beliefs.
    pub fn total_entropy(&self) -> f64 {
        self.p.iter().map(|&v| shannon(v)).sum()
    }

    /// Largest and smallest ratio of off-diagonal distances, `(d_m, d_M)`.
    pub fn distance_ratios(&self) -> (f64, f64) {
        let off = || (0..self.n()).flat_map(|i| (0..self.n()).filter(move |&j| j != i).map(move |j| (i, j)));
        let hi = off().map(|(i, j)| self.eta[i][j]).fold(f64::NEG_INFINITY, f64::max);
        let lo = off().map(|(i, j)| self.eta[i][j]).fold(f64::INFINITY, f64::min);
        if self.n() < 2 {
            return (1.0, 1.0);
        }
        (lo / hi, hi / lo)
    }
}

fn shannon(p: f64) -> f64 {
    behavioral_entropy(Probability::from_occupancy(100.0 * p), &BehaviorParam::shannon())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentConfig {
    pub alphas: Vec<BehaviorParam>,
    pub positions: Vec<usize>,
}

/// Value of cell `k` to an agent at `x`.
fn cell_value(world: &AbstractWorld, alpha: &BehaviorParam, x: usize, k: usize) -> f64 {
    behavioral_entropy(Probability::from_occupancy(100.0 * world.p[k]), alpha) / world.eta[x][k]
}

/// Each agent's preferred cell other than its own, ignoring the others. Ties go to the lowest index.
pub fn raw_targets(world: &AbstractWorld, agents: &AgentConfig) -> Vec<usize> {
    agents
        .positions
        .iter()
        .zip(&agents.alphas)
        .map(|(&x, a)| {
            let mut best = (usize::MAX, f64::NEG_INFINITY);
            for k in (0..world.n()).filter(|&k| k != x) {
                let v = cell_value(world, a, x, k);
                if v > best.1 {
                    best = (k, v);
                }
            }
            best.0
        })
        .collect()
}

/// Outcome of one assignment round.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub positions: Vec<usize>,
    pub raw: Vec<usize>,
}

impl Assignment {
    /// Some pair of agents shares a raw target.
    pub fn raw_collision(&self) -> bool {
        has_duplicate(&self.raw)
    }
}

fn has_duplicate(v: &[usize]) -> bool {
    (0..v.len()).any(|i| v[i + 1..].contains(&v[i]))
}

/// Moves every agent to a cell other than its current one, maximising the
/// summed value with at most one agent per cell. When the raw targets are
/// already distinct they are the optimum and are kept as is.
pub fn assign_step(world: &AbstractWorld, agents: &AgentConfig) -> Result<Assignment, DomainError> {
    let na = agents.positions.len();
    if na > world.n() || (na == world.n() && na < 2 && na > 0) {
        return Err(DomainError::new(format!("{na} agents cannot move on {} cells", world.n())));
    }
    if na > 16 {
        return Err(DomainError::new("at most 16 agents are supported"));
    }
    let raw = raw_targets(world, agents);
    if !has_duplicate(&raw) {
        return Ok(Assignment { positions: raw.clone(), raw });
    }
    // Exact max-weight matching by dynamic programming over cells and the set of placed agents.
    let full = (1usize << na) - 1;
    let mut best = vec![f64::NEG_INFINITY; 1 << na];
    best[0] = 0.0;
    let mut choice = vec![vec![None; 1 << na]; world.n()];
    for k in 0..world.n() {
        let prev = best.clone();
        for mask in 0..=full {
            if prev[mask] == f64::NEG_INFINITY {
                continue;
            }
            for i in (0..na).filter(|&i| mask & (1 << i) == 0 && agents.positions[i] != k) {
                let v = prev[mask] + cell_value(world, &agents.alphas[i], agents.positions[i], k);
                let m2 = mask | (1 << i);
                if v > best[m2] {
                    best[m2] = v;
                    choice[k][m2] = Some((i, mask));
                }
            }
        }
    }
    if best[full] == f64::NEG_INFINITY {
        return Err(DomainError::new("no feasible assignment"));
    }
    // Walk back: a recorded choice means cell k was taken in the optimum for
    // this agent set, otherwise the state carried over from cell k-1.
    let mut positions = vec![usize::MAX; na];
    let mut mask = full;
    for k in (0..world.n()).rev() {
        if mask == 0 {
            break;
        }
        if let Some((i, pm)) = choice[k][mask] {
            positions[i] = k;
            mask = pm;
        }
    }
    if positions.contains(&usize::MAX) {
        return Err(DomainError::new("assignment reconstruction failed"));
    }
    Ok(Assignment { positions, raw })
}

/// `p* + lambda (p - p*)`.
pub fn contract(p: f64, p_star: f64, lambda: f64) -> f64 {
    p_star + lambda * (p - p_star)
}

/// Contracts every visited cell; others stay bit-identical.
pub fn belief_step(world: &mut AbstractWorld, visited: &[usize]) {
    let lambda = world.lambda;
    belief_step_with(world, visited, |_| lambda);
}

/// As [`belief_step`] with a per-cell contraction factor.
pub fn belief_step_with(world: &mut AbstractWorld, visited: &[usize], mut lambda_for: impl FnMut(usize) -> f64) {
    let mut seen = vec![false; world.n()];
    for &k in visited {
        if !std::mem::replace(&mut seen[k], true) {
            world.p[k] = contract(world.p[k], world.p_star[k], lambda_for(k));
        }
    }
}

/// Right-hand side of the entropy-decrease bound for the cells `visited` at
/// step `t`, evaluated on beliefs `before`. `-inf` when a visited belief is 0 or 1.
pub fn entropy_decrease_bound(world_before: &AbstractWorld, visited: &[usize], t: u64) -> f64 {
    let lt = world_before.lambda.powi(t.min(i32::MAX as u64) as i32);
    let mut total = 0.0;
    for &k in visited {
        let p = world_before.p[k];
        if p <= 0.0 || p >= 1.0 {
            return f64::NEG_INFINITY;
        }
        total += ((1.0 - p).ln() - p.ln()) * (0.5 * lt - (p - world_before.p_star[k]));
    }
    total
}

pub const PBAR_GRID: usize = 10_000;
const PBAR_TOL: f64 = 1e-10;

/// Smallest `p` in `(0,1)` where one agent's scaled entropy curve crosses
/// the other's, taking both scalings `(d_M, d_m)` and `(d_m, d_M)`.
pub fn compute_pbar(alpha_i: f64, alpha_j: f64, d_m: f64, d_big: f64) -> Result<f64, DomainError> {
    if !(d_m > 0.0 && d_m <= d_big) {
        return Err(DomainError::new(format!("need 0 < d_m <= d_M, got {d_m}, {d_big}")));
    }
    let (ai, aj) = (BehaviorParam::new(alpha_i)?, BehaviorParam::new(alpha_j)?);
    let h = |a: &BehaviorParam, p: f64| behavioral_entropy(Probability::from_occupancy(100.0 * p), a);
    let f1 = |p: f64| d_big * h(&ai, p) - d_m * h(&aj, p);
    let f2 = |p: f64| d_m * h(&ai, p) - d_big * h(&aj, p);
    [first_root(f1), first_root(f2)]
        .into_iter()
        .flatten()
        .reduce(f64::min)
        .ok_or_else(|| DomainError::new("scaled entropy curves never cross in (0,1)"))
}

fn first_root(f: impl Fn(f64) -> f64) -> Option<f64> {
    let grid = |k: usize| k as f64 / PBAR_GRID as f64;
    let mut prev = (grid(1), f(grid(1)));
    if prev.1 == 0.0 {
        return Some(prev.0);
    }
    for k in 2..PBAR_GRID {
        let cur = (grid(k), f(grid(k)));
        if cur.1 == 0.0 {
            return Some(cur.0);
        }
        if prev.1.signum() != cur.1.signum() {
            let (mut lo, mut hi) = (prev.0, cur.0);
            let flo = prev.1;
            while hi - lo > PBAR_TOL {
                let mid = 0.5 * (lo + hi);
                if f(mid).signum() == flo.signum() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Some(0.5 * (lo + hi));
        }
        prev = cur;
    }
    None
}

/// Minimum pairwise crossing point over a team.
pub fn team_pbar(alphas: &[f64], d_m: f64, d_big: f64) -> Result<f64, DomainError> {
    let mut best: Option<f64> = None;
    for i in 0..alphas.len() {
        for j in i + 1..alphas.len() {
            let p = compute_pbar(alphas[i], alphas[j], d_m, d_big)?;
            best = Some(best.map_or(p, |b: f64| b.min(p)));
        }
    }
    best.ok_or_else(|| DomainError::new("need at least two agents"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: u64,
    pub positions: Vec<usize>,
    pub raw_targets: Vec<usize>,
    pub entropy_before: f64,
    pub entropy_after: f64,
    pub bound: f64,
    pub raw_collision: bool,
    pub position_collision: bool,
    /// Realized change exceeded the bound (or 0 when the bound is `-inf`).
    pub bound_violated: bool,
    /// The bound was not strictly negative.
    pub bound_nonnegative: bool,
}

impl StepRecord {
    pub fn delta(&self) -> f64 {
        self.entropy_after - self.entropy_before
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AbstractRun {
    pub initial_positions: Vec<usize>,
    pub steps: Vec<StepRecord>,
    pub final_world: AbstractWorld,
}

/// Contraction mode for [`run_abstract`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Contraction {
    /// Exactly `lambda` every visit.
    Tight,
    /// A fresh `U[0, lambda]` factor per visit.
    Noisy(u64),
}

/// Alternates assignment and belief updates for `steps` rounds.
pub fn run_abstract(
    world: &AbstractWorld,
    agents: &AgentConfig,
    steps: u64,
    mode: Contraction,
) -> Result<AbstractRun, DomainError> {
    let mut w = world.clone();
    let mut cfg = agents.clone();
    let mut records = Vec::with_capacity(steps as usize);
    let mut rng = match mode {
        Contraction::Noisy(seed) => Some(crate::rng::seeded(seed, &[0x6e6f_6973])),
        Contraction::Tight => None,
    };
    for t in 0..steps {
        let a = assign_step(&w, &cfg)?;
        let before = w.clone();
        let h0 = w.total_entropy();
        match rng.as_mut() {
            Some(r) => {
                let lam = w.lambda;
                belief_step_with(&mut w, &a.positions, |_| r.random_range(0.0..=lam))
            }
            None => belief_step(&mut w, &a.positions),
        }
        let h1 = w.total_entropy();
        let bound = entropy_decrease_bound(&before, &a.positions, t);
        let delta = h1 - h0;
        let bound_violated = if bound == f64::NEG_INFINITY { delta > 1e-12 } else { delta > bound + 1e-12 };
        records.push(StepRecord {
            t,
            positions: a.positions.clone(),
            raw_targets: a.raw.clone(),
            entropy_before: h0,
            entropy_after: h1,
            bound,
            raw_collision: a.raw_collision(),
            position_collision: has_duplicate(&a.positions),
            bound_violated,
            bound_nonnegative: bound >= 0.0,
        });
        cfg.positions = a.positions;
    }
    Ok(AbstractRun { initial_positions: agents.positions.clone(), steps: records, final_world: w })
}

impl AbstractRun {
    /// CSV rows `step,agent,cell,entropy,bound`.
    pub fn write_ledger(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "step,agent,cell,entropy,bound")?;
        for r in &self.steps {
            for (i, &c) in r.positions.iter().enumerate() {
                writeln!(out, "{},{},{},{},{}", r.t, i, c, r.entropy_after, r.bound)?;
            }
        }
        Ok(())
    }
}

/// Random symmetric distances `1 + U[0,1]`.
pub fn random_eta(n: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut eta = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = 1.0 + rng.random_range(0.0..1.0);
            eta[i][j] = d;
            eta[j][i] = d;
        }
    }
    eta
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn uniform_eta(n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|i| (0..n).map(|j| if i == j { 0.0 } else { 1.0 }).collect()).collect()
    }

    fn bp(a: f64) -> BehaviorParam {
        BehaviorParam::new(a).unwrap()
    }

    #[test]
    fn contraction_examples() {
        assert_eq!(contract(0.8, 1.0, 0.0), 1.0);
        assert!((contract(0.8, 1.0, 0.5) - 0.9).abs() < 1e-15);
        let mut w = AbstractWorld::new(uniform_eta(3), vec![0.8, 0.3, 0.6], vec![1.0, 0.0, 1.0], 0.5).unwrap();
        belief_step(&mut w, &[0]);
        assert_eq!(w.beliefs()[1].to_bits(), 0.3f64.to_bits());
        assert_eq!(w.beliefs()[2].to_bits(), 0.6f64.to_bits());
        for k in 0..=100 {
            let p = k as f64 / 100.0;
            for ps in [0.0, 1.0] {
                for lam in [0.0, 0.3, 0.7, 0.99] {
                    assert!((contract(p, ps, lam) - ps).abs() <= lam * (p - ps).abs() + 1e-15);
                }
            }
        }
    }

    #[test]
    fn assign_examples() {
        // Values H/eta: cell 1 -> ln2/1, cell 2 -> ln2/0.5 via shorter distance.
        let mut eta = uniform_eta(3);
        eta[0][2] = 0.5;
        eta[2][0] = 0.5;
        let w = AbstractWorld::new(eta, vec![0.5, 0.5, 0.5], vec![1.0, 1.0, 1.0], 0.5).unwrap();
        let a = assign_step(&w, &AgentConfig { alphas: vec![bp(1.0)], positions: vec![0] }).unwrap();
        assert_eq!(a.positions, vec![2]);
        // Own cell is the most uncertain: second best is taken.
        let w = AbstractWorld::new(uniform_eta(3), vec![0.5, 0.3, 0.1], vec![1.0, 0.0, 0.0], 0.5).unwrap();
        let a = assign_step(&w, &AgentConfig { alphas: vec![bp(1.0)], positions: vec![0] }).unwrap();
        assert_eq!(a.positions, vec![1]);
        assert!(assign_step(&w, &AgentConfig { alphas: vec![bp(1.0); 4], positions: vec![0, 1, 2, 0] }).is_err());
    }

    #[test]
    fn conflicts_are_resolved_optimally() {
        let mut rng = seeded(41, &[]);
        for _ in 0..200 {
            let n = rng.random_range(3..7);
            let na = rng.random_range(2..=n.min(4));
            let eta = random_eta(n, &mut rng);
            let p: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
            let w = AbstractWorld::new(eta, p, vec![0.0; n], 0.5).unwrap();
            let cfg = AgentConfig {
                alphas: vec![bp(1.0); na],
                positions: (0..na).map(|_| rng.random_range(0..n)).collect(),
            };
            let a = assign_step(&w, &cfg).unwrap();
            assert!(!has_duplicate(&a.positions));
            let value = |pos: &[usize]| -> f64 {
                pos.iter().enumerate().map(|(i, &k)| cell_value(&w, &cfg.alphas[i], cfg.positions[i], k)).sum()
            };
            // Exhaustive search over injective moves.
            let mut best = f64::NEG_INFINITY;
            let mut cur = vec![0; na];
            loop {
                if !has_duplicate(&cur) && cur.iter().zip(&cfg.positions).all(|(a, b)| a != b) {
                    best = best.max(value(&cur));
                }
                let mut d = 0;
                while d < na {
                    cur[d] += 1;
                    if cur[d] < n {
                        break;
                    }
                    cur[d] = 0;
                    d += 1;
                }
                if d == na {
                    break;
                }
            }
            assert!((value(&a.positions) - best).abs() < 1e-9);
            assert!(a.positions.iter().zip(&cfg.positions).all(|(a, b)| a != b));
        }
    }

    #[test]
    fn pbar_examples() {
        for (a, b) in [(0.5, 2.0), (0.3, 4.0), (1.0, 1.5)] {
            assert!((compute_pbar(a, b, 1.0, 1.0).unwrap() - 0.5).abs() < 1e-9);
        }
        let wide = compute_pbar(0.5, 2.0, 0.25, 4.0).unwrap();
        assert!(wide < 0.5);
        assert_eq!(wide, compute_pbar(2.0, 0.5, 0.25, 4.0).unwrap());
        // Independent check: the crossing really is one.
        let h = |a: f64, p: f64| behavioral_entropy(Probability::new(p).unwrap(), &bp(a));
        let g = |p: f64| (4.0 * h(0.5, p) - 0.25 * h(2.0, p)).min((0.25 * h(0.5, p) - 4.0 * h(2.0, p)).abs());
        assert!(g(wide).abs() < 1e-6);
        // No sign change on the coarse grid below the reported root.
        for k in 1..((wide * 1000.0) as usize) {
            let p = k as f64 / 1000.0;
            let f1 = 4.0 * h(0.5, p) - 0.25 * h(2.0, p);
            let f2 = 0.25 * h(0.5, p) - 4.0 * h(2.0, p);
            let f1n = 4.0 * h(0.5, p + 0.001) - 0.25 * h(2.0, p + 0.001);
            let f2n = 0.25 * h(0.5, p + 0.001) - 4.0 * h(2.0, p + 0.001);
            if p + 0.001 < wide {
                assert_eq!(f1.signum(), f1n.signum());
                assert_eq!(f2.signum(), f2n.signum());
            }
        }
        assert!(compute_pbar(1.0, 2.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn lambda_zero_clears_every_cell() {
        let w = AbstractWorld::new(uniform_eta(3), vec![0.3, 0.8, 0.1], vec![0.0, 1.0, 0.0], 0.0).unwrap();
        let cfg = AgentConfig { alphas: vec![bp(0.5), bp(1.0), bp(2.0)], positions: vec![0, 1, 2] };
        let run = run_abstract(&w, &cfg, 3, Contraction::Tight).unwrap();
        assert_eq!(run.steps[0].entropy_after, 0.0);
        assert_eq!(run.final_world.total_entropy(), 0.0);
    }

    #[test]
    fn single_cell_bound_evaluation() {
        // lambda = 0, p = 0.8, p* = 1: the visit removes H(0.8) entirely.
        let w = AbstractWorld::new(uniform_eta(2), vec![0.8, 0.0], vec![1.0, 0.0], 0.0).unwrap();
        let b = entropy_decrease_bound(&w, &[0], 1);
        let expect = ((0.2f64).ln() - (0.8f64).ln()) * (0.0 - (0.8 - 1.0));
        assert!((b - expect).abs() < 1e-15);
        let mut after = w.clone();
        belief_step(&mut after, &[0]);
        let dh = after.total_entropy() - w.total_entropy();
        assert!((dh + shannon(0.8)).abs() < 1e-15);
    }

    #[test]
    fn ledger_csv() {
        let w = AbstractWorld::new(uniform_eta(4), vec![0.2, 0.3, 0.9, 0.6], vec![0.0, 0.0, 1.0, 1.0], 0.3).unwrap();
        let cfg = AgentConfig { alphas: vec![bp(0.5), bp(2.0)], positions: vec![0, 1] };
        let run = run_abstract(&w, &cfg, 5, Contraction::Noisy(3)).unwrap();
        let mut buf = Vec::new();
        run.write_ledger(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 5 * 2);
        assert!(text.starts_with("step,agent,cell,entropy,bound\n0,0,"));
    }

    mod props {
        use super::*;
        use proptest::prelude::{prop_assert, proptest};

        proptest! {
            #[test]
            fn band_complement_is_invariant(p in 0.0f64..=1.0, pbar in 0.01f64..0.5, lam in 0.0f64..0.999) {
                let outside = |v: f64| v < pbar || v > 1.0 - pbar;
                if outside(p) {
                    // The truth is the side of 0.5 the belief is on.
                    let ps = if p > 0.5 { 1.0 } else { 0.0 };
                    prop_assert!(outside(contract(p, ps, lam)));
                }
            }
        }
    }
}
