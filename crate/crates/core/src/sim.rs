//! Exploration episodes, parameter sweeps and the cost metric.
//!
//! One tick lets every robot, in id order, traverse to the head of its task
//! buffer. When a robot finds its buffer empty the whole team re-allocates:
//! frontier clusters are valued from sampled information gains, robust
//! estimates are injected into d-PBRAG over the shared-frontier graph, and
//! each robot keeps at most `buffer_cap` owned clusters in tour order.

use std::borrow::Cow;
use std::collections::{BTreeMap, VecDeque};
use std::io::Write;
use std::path::PathBuf;

use log::{debug, info};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocation::{assignment_candidates, run_dpbrag, Partition, RewardTable, StepSchedule};
use crate::dro::{dr_estimate, epsilon_radius, ConcentrationParams, EmpiricalDistribution};
use crate::entropy::{total_map_entropy, BehaviorParam};
use crate::error::{AllocationError, DomainError, SimError};
use crate::network::{shared_frontier_arcs, PatchedGraph};
use crate::planner::{grid_path, rrt_path, tsp_tour, Path, RrtParams, SEGMENT_SAMPLE};
use crate::rng::{derive, seeded, unit_open};
use crate::world::{
    add_quadrant_noise, clusters, expected_reward, extract_frontiers, frontiers_in_radius,
    generate_map, load_grid_file, sense_update, Cell, DistanceField, Footprint, Frontier, MapKind,
    NoiseLevel, OccupancyGrid, SensorModel, SAMPLE_DELTA,
};

/// Largest behavioral entropy a single cell can contribute, for any alpha.
pub const MAX_CELL_ENTROPY: f64 = 2.0 / std::f64::consts::E;

// Stream labels for `rng::derive`.
const MAP: u64 = 1;
const PRIOR: u64 = 2;
const START: u64 = 3;
const ALPHA: u64 = 4;
const SENSE: u64 = 5;
const RRT: u64 = 6;
const SAMPLES: u64 = 7;
const PERTURB: u64 = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapSpec {
    pub kind: MapKind,
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    /// Ground-truth OGRID file; replaces the generator when set.
    pub file: Option<PathBuf>,
}

impl Default for MapSpec {
    fn default() -> Self {
        Self { kind: MapKind::Rooms, width: 40, height: 40, resolution: 0.1, file: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AllocationConfig {
    /// Injection period T.
    pub period: u64,
    pub tau: u64,
    /// Number of injection periods per allocation phase.
    pub outer_periods: u64,
    pub theta: f64,
    pub sample_cap: usize,
    pub sample_delta: f64,
    pub threshold: f64,
}

impl Default for AllocationConfig {
    fn default() -> Self {
        Self {
            period: 8,
            tau: 1,
            outer_periods: crate::allocation::DEFAULT_OUTER_PERIODS,
            theta: 0.1,
            sample_cap: 256,
            sample_delta: SAMPLE_DELTA,
            threshold: crate::allocation::DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RrtConfig {
    pub step: f64,
    pub max_iters: usize,
    pub goal_bias: f64,
}

impl Default for RrtConfig {
    fn default() -> Self {
        let d = RrtParams::default();
        Self { step: d.step, max_iters: d.max_iters, goal_bias: d.goal_bias }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub seed: u64,
    pub map: MapSpec,
    pub robots: usize,
    /// PWC range `(a, b)` the robots' alphas are drawn from.
    pub alpha_range: (f64, f64),
    /// Sensing radius in map units.
    pub sensing_radius: f64,
    pub noise: NoiseLevel,
    pub buffer_cap: usize,
    /// Fraction of the initial entropy that must be removed.
    pub completion: f64,
    pub max_ticks: usize,
    /// Initial frontier search radius as a multiple of the sensing radius.
    pub frontier_radius_factor: f64,
    /// Ticks a frontier stays excluded after planning to it failed.
    pub blacklist_ticks: usize,
    /// Width of the noise-free band along the map edge in the prior.
    pub prior_border: usize,
    /// Keep a belief snapshot every this many ticks; 0 disables.
    pub snapshot_every: usize,
    pub allocation: AllocationConfig,
    pub rrt: RrtConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            map: MapSpec::default(),
            robots: 3,
            alpha_range: (0.8, 1.2),
            sensing_radius: 2.0,
            noise: NoiseLevel::Exact,
            buffer_cap: 14,
            completion: 0.99,
            max_ticks: 500,
            frontier_radius_factor: 10.0,
            blacklist_ticks: 10,
            prior_border: 1,
            snapshot_every: 0,
            allocation: AllocationConfig::default(),
            rrt: RrtConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), DomainError> {
        let (a, b) = self.alpha_range;
        let fail = |m: String| Err(DomainError::new(m));
        if self.robots == 0 {
            return fail("robots must be at least 1".into());
        }
        if !(a > 0.0 && a <= b) {
            return fail(format!("alpha range needs 0 < a <= b, got ({a}, {b})"));
        }
        if !(self.sensing_radius > 0.0) {
            return fail(format!("sensing radius must be positive, got {}", self.sensing_radius));
        }
        if self.buffer_cap == 0 {
            return fail("buffer cap must be at least 1".into());
        }
        if !(self.completion > 0.0 && self.completion <= 1.0) {
            return fail(format!("completion must be in (0, 1], got {}", self.completion));
        }
        if !(self.frontier_radius_factor > 0.0) {
            return fail("frontier radius factor must be positive".into());
        }
        let al = &self.allocation;
        if al.sample_cap == 0 || al.outer_periods == 0 {
            return fail("sample cap and outer periods must be at least 1".into());
        }
        if !(al.threshold > 0.0 && al.threshold < 1.0) {
            return fail(format!("allocation threshold must be in (0,1), got {}", al.threshold));
        }
        StepSchedule::new(al.period, al.tau)?;
        ConcentrationParams::with_theta(al.theta)?;
        if !(self.rrt.step > 0.0 && (0.0..=1.0).contains(&self.rrt.goal_bias)) {
            return fail("rrt step must be positive and goal bias in [0,1]".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotState {
    pub id: usize,
    pub pos: Cell,
    pub alpha: BehaviorParam,
    /// Frontier representatives in visiting order.
    pub task_buffer: VecDeque<Cell>,
    /// Search radius that produced the last frontier selection.
    pub frontier_radius: f64,
    /// Distance travelled, in map units.
    pub path_traveled: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Threshold,
    NoFrontiers,
    Cap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub iterations: usize,
    pub completed: bool,
    pub termination: Termination,
    pub total_path: f64,
    pub robot_paths: Vec<f64>,
    /// Map entropy after the initial sensing and after every tick.
    pub entropy_trace: Vec<f64>,
    /// Entropy of the prior map before any sensing.
    pub initial_entropy: f64,
    pub final_entropy: f64,
    pub reallocations: usize,
    pub partition_violations: usize,
    /// Ticks at which the map entropy rose.
    pub entropy_increases: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub metrics: EpisodeMetrics,
    pub alphas: Vec<f64>,
    pub final_map: OccupancyGrid,
    pub truth: OccupancyGrid,
    pub trajectories: Vec<Vec<Cell>>,
    pub snapshots: Vec<(usize, OccupancyGrid)>,
}

/// Explicit world for an episode; `run_episode` builds one from the config.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSetup {
    pub truth: OccupancyGrid,
    pub prior: OccupancyGrid,
    pub starts: Vec<Cell>,
    pub alphas: Vec<f64>,
}

impl EpisodeSetup {
    pub fn from_config(cfg: &SimConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let truth = match &cfg.map.file {
            Some(p) => load_grid_file(p)?,
            None => generate_map(
                cfg.map.kind,
                cfg.map.width,
                cfg.map.height,
                cfg.map.resolution,
                derive(cfg.seed, &[MAP]),
            )?,
        };
        let prior = add_quadrant_noise(&truth, cfg.prior_border, &mut seeded(cfg.seed, &[PRIOR]));
        let mut free: Vec<Cell> = truth.cells().filter(|&c| truth.get(c) == 0.0).collect();
        if free.len() < cfg.robots {
            return Err(DomainError::new(format!(
                "{} free cells cannot host {} robots",
                free.len(),
                cfg.robots
            ))
            .into());
        }
        let mut rng = seeded(cfg.seed, &[START]);
        let starts = (0..cfg.robots).map(|_| free.swap_remove(rng.random_range(0..free.len()))).collect();
        let (a, b) = cfg.alpha_range;
        let alphas = pwc_sample(a, b, cfg.robots, derive(cfg.seed, &[ALPHA]))?;
        Ok(Self { truth, prior, starts, alphas })
    }
}

/// Draws `count` alphas from the piecewise-constant density on `[a, b]`:
/// uniform when 1 is not strictly inside, otherwise half the mass uniform on
/// `[a, 1]` and half on `[1, b]`.
pub fn pwc_sample(a: f64, b: f64, count: usize, seed: u64) -> Result<Vec<f64>, DomainError> {
    if !(a > 0.0 && a <= b && b.is_finite()) {
        return Err(DomainError::new(format!("PWC range needs 0 < a <= b, got ({a}, {b})")));
    }
    let mut rng = seeded(seed, &[]);
    Ok((0..count)
        .map(|_| {
            if a == b {
                a
            } else if a < 1.0 && 1.0 < b {
                if rng.random_bool(0.5) {
                    rng.random_range(a..=1.0)
                } else {
                    rng.random_range(1.0..=b)
                }
            } else {
                rng.random_range(a..=b)
            }
        })
        .collect())
}

/// Smallest positive difference between two holders' rewards for the same task.
pub fn min_reward_gap(rewards: &RewardTable) -> f64 {
    let mut gap = f64::INFINITY;
    for q in 0..rewards.n_tasks() {
        let mut v: Vec<f64> = rewards.holders(q).into_iter().filter_map(|i| rewards.get(i, q)).collect();
        v.sort_by(f64::total_cmp);
        for w in v.windows(2) {
            let d = w[1] - w[0];
            if d > 0.0 {
                gap = gap.min(d);
            }
        }
    }
    gap
}

/// Adds a fixed offset in `(0, scale)` to every available reward, derived
/// from `(seed, agent, task)` alone.
pub fn perturb_rewards(rewards: &RewardTable, scale: f64, seed: u64) -> Result<RewardTable, AllocationError> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(DomainError::new(format!("perturbation scale must be positive, got {scale}")).into());
    }
    let gap = min_reward_gap(rewards);
    if scale >= 0.5 * gap {
        return Err(AllocationError::PerturbationTooLarge { scale, gap });
    }
    let rho = rewards
        .as_estimates()
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(q, v)| v.map(|v| v + scale * unit_open(seed, &[i as u64, q as u64])))
                .collect()
        })
        .collect();
    RewardTable::new(rho)
}

fn tie_break_scale(rewards: &RewardTable) -> f64 {
    let top = rewards
        .as_estimates()
        .iter()
        .flatten()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let tiny = 1e-9 * top.max(1e-12);
    tiny.min(0.25 * min_reward_gap(rewards))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    /// Normalized cost per episode; `None` for incomplete ones.
    pub costs: Vec<Option<f64>>,
    pub excluded: Vec<usize>,
    /// Some normalization range was empty and collapsed to zero.
    pub degenerate: bool,
}

/// Min-max normalizes iterations and total path over the completed
/// episodes and sums the two.
pub fn cost_metric(batch: &[EpisodeMetrics]) -> Result<CostReport, DomainError> {
    if batch.is_empty() {
        return Err(DomainError::new("cost metric needs a non-empty batch"));
    }
    let done: Vec<usize> = (0..batch.len()).filter(|&k| batch[k].completed).collect();
    let excluded = (0..batch.len()).filter(|&k| !batch[k].completed).collect();
    let range = |f: &dyn Fn(&EpisodeMetrics) -> f64| {
        let lo = done.iter().map(|&k| f(&batch[k])).fold(f64::INFINITY, f64::min);
        let hi = done.iter().map(|&k| f(&batch[k])).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    };
    let iters = |m: &EpisodeMetrics| m.iterations as f64;
    let path = |m: &EpisodeMetrics| m.total_path;
    let (ri, rp) = (range(&iters), range(&path));
    let norm = |v: f64, (lo, hi): (f64, f64)| if hi > lo { (v - lo) / (hi - lo) } else { 0.0 };
    let degenerate = !done.is_empty() && (ri.1 <= ri.0 || rp.1 <= rp.0);
    let costs = batch
        .iter()
        .map(|m| m.completed.then(|| norm(iters(m), ri) + norm(path(m), rp)))
        .collect();
    Ok(CostReport { costs, excluded, degenerate })
}

pub fn run_episode(cfg: &SimConfig) -> Result<EpisodeResult, SimError> {
    let setup = EpisodeSetup::from_config(cfg)?;
    run_episode_setup(cfg, setup)
}

/// Runs an episode on an explicit world. Uses every config field except
/// the map spec and alpha range.
pub fn run_episode_setup(cfg: &SimConfig, setup: EpisodeSetup) -> Result<EpisodeResult, SimError> {
    cfg.validate()?;
    let EpisodeSetup { truth, prior, starts, alphas } = setup;
    if prior.width() != truth.width() || prior.height() != truth.height() {
        return Err(DomainError::new("prior and truth differ in size").into());
    }
    if starts.len() != alphas.len() || starts.is_empty() {
        return Err(DomainError::new("need one start and one alpha per robot").into());
    }
    if let Some(c) = starts.iter().find(|&&c| !truth.contains(c) || !truth.is_traversable(c)) {
        return Err(DomainError::new(format!("start {c:?} is not free")).into());
    }
    let robots = starts
        .iter()
        .zip(&alphas)
        .enumerate()
        .map(|(id, (&pos, &a))| {
            Ok(RobotState {
                id,
                pos,
                alpha: BehaviorParam::new(a)?,
                task_buffer: VecDeque::new(),
                frontier_radius: cfg.frontier_radius_factor * cfg.sensing_radius,
                path_traveled: 0.0,
            })
        })
        .collect::<Result<Vec<_>, DomainError>>()?;
    let ep = Episode {
        cfg,
        sensor: SensorModel::new(cfg.sensing_radius, cfg.noise)?,
        belief: prior,
        truth,
        trajectories: starts.iter().map(|&c| vec![c]).collect(),
        robots,
        sense_rng: seeded(cfg.seed, &[SENSE]),
        blacklist: BTreeMap::new(),
        reallocations: 0,
        partition_violations: 0,
    };
    ep.run(alphas)
}

struct Episode<'a> {
    cfg: &'a SimConfig,
    truth: OccupancyGrid,
    belief: OccupancyGrid,
    sensor: SensorModel,
    robots: Vec<RobotState>,
    trajectories: Vec<Vec<Cell>>,
    sense_rng: ChaCha8Rng,
    /// Frontier representative -> first tick it may be targeted again.
    blacklist: BTreeMap<Cell, usize>,
    reallocations: usize,
    partition_violations: usize,
}

impl Episode<'_> {
    fn run(mut self, alphas: Vec<f64>) -> Result<EpisodeResult, SimError> {
        let h0 = total_map_entropy(&self.belief);
        for i in 0..self.robots.len() {
            self.sense(self.robots[i].pos);
        }
        let target = (1.0 - self.cfg.completion) * h0;
        let mut trace = vec![total_map_entropy(&self.belief)];
        let mut snapshots = Vec::new();
        if self.cfg.snapshot_every > 0 {
            snapshots.push((0, self.belief.clone()));
        }
        let mut increases = 0;
        let mut iterations = 0;
        let mut termination = Termination::Cap;
        if trace[0] <= target {
            termination = Termination::Threshold;
        } else {
            for tick in 1..=self.cfg.max_ticks {
                for i in 0..self.robots.len() {
                    self.leg(i, tick)?;
                }
                let h = total_map_entropy(&self.belief);
                if h > trace[trace.len() - 1] {
                    increases += 1;
                }
                trace.push(h);
                iterations = tick;
                if self.cfg.snapshot_every > 0 && tick % self.cfg.snapshot_every == 0 {
                    snapshots.push((tick, self.belief.clone()));
                }
                if h <= target {
                    termination = Termination::Threshold;
                    break;
                }
                if self.robots.iter().all(|r| r.task_buffer.is_empty())
                    && extract_frontiers(&self.belief).is_empty()
                {
                    termination = Termination::NoFrontiers;
                    break;
                }
            }
        }
        let robot_paths: Vec<f64> = self.robots.iter().map(|r| r.path_traveled).collect();
        let metrics = EpisodeMetrics {
            iterations,
            completed: termination == Termination::Threshold,
            termination,
            total_path: robot_paths.iter().sum(),
            robot_paths,
            final_entropy: trace[trace.len() - 1],
            entropy_trace: trace,
            initial_entropy: h0,
            reallocations: self.reallocations,
            partition_violations: self.partition_violations,
            entropy_increases: increases,
        };
        info!(
            "episode seed {}: {:?} after {} ticks, path {:.2}",
            self.cfg.seed, metrics.termination, metrics.iterations, metrics.total_path
        );
        Ok(EpisodeResult {
            metrics,
            alphas,
            final_map: self.belief,
            truth: self.truth,
            trajectories: self.trajectories,
            snapshots,
        })
    }

    fn sense(&mut self, c: Cell) {
        sense_update(&mut self.belief, &self.truth, c, &self.sensor, &mut self.sense_rng);
    }

    fn exhausted(&self, target: Cell) -> bool {
        Footprint::new(&self.belief, target, self.cfg.sensing_radius).is_known()
    }

    /// One tour leg for robot `i`.
    fn leg(&mut self, i: usize, tick: usize) -> Result<(), SimError> {
        let mut reallocated = false;
        let head = loop {
            while let Some(&h) = self.robots[i].task_buffer.front() {
                if self.exhausted(h) {
                    self.robots[i].task_buffer.pop_front();
                } else {
                    break;
                }
            }
            match self.robots[i].task_buffer.front() {
                Some(&h) => break h,
                None if !reallocated => {
                    self.reallocate(tick)?;
                    reallocated = true;
                }
                None => return Ok(()),
            }
        };
        match self.plan(i, head, tick) {
            Some(path) => self.traverse(i, &path),
            None => {
                debug!("robot {i}: no path to {head:?}, excluded until tick {}", tick + self.cfg.blacklist_ticks);
                self.blacklist.insert(head, tick + self.cfg.blacklist_ticks);
            }
        }
        self.robots[i].task_buffer.pop_front();
        Ok(())
    }

    fn plan(&self, i: usize, goal: Cell, tick: usize) -> Option<Path> {
        let start = self.robots[i].pos;
        let mut map = Cow::Borrowed(&self.belief);
        if !map.is_traversable(start) || !map.is_traversable(goal) {
            let m = map.to_mut();
            m.set(start, 0.0);
            m.set(goal, 0.0);
        }
        let params = RrtParams {
            step: self.cfg.rrt.step,
            max_iters: self.cfg.rrt.max_iters,
            goal_bias: self.cfg.rrt.goal_bias,
            seed: derive(self.cfg.seed, &[RRT, tick as u64, i as u64]),
        };
        rrt_path(&map, start, goal, &params).or_else(|_| grid_path(&map, start, goal)).ok()
    }

    /// Follows `path` on the true map, stopping before the first occupied
    /// cell. Senses at every waypoint and at most one sensing radius apart
    /// in between.
    fn traverse(&mut self, i: usize, path: &Path) {
        let res = self.belief.resolution();
        let spacing = self.cfg.sensing_radius / res;
        let mut cur = self.robots[i].pos;
        let mut since = 0.0;
        if path.waypoints.len() < 2 {
            self.sense(cur);
        }
        'segments: for w in path.waypoints.windows(2) {
            let (a, b) = (w[0], w[1]);
            let n = (a.dist(b) / SEGMENT_SAMPLE).ceil().max(1.0) as usize;
            for k in 1..=n {
                let t = k as f64 / n as f64;
                let x = a.x as f64 + t * (b.x as f64 - a.x as f64);
                let y = a.y as f64 + t * (b.y as f64 - a.y as f64);
                let c = Cell::new(x.round() as usize, y.round() as usize);
                if c == cur {
                    continue;
                }
                if !self.truth.is_traversable(c) {
                    self.sense(cur);
                    break 'segments;
                }
                let d = cur.dist(c);
                if since + d > spacing {
                    self.sense(cur);
                    since = 0.0;
                }
                since += d;
                self.robots[i].path_traveled += d * res;
                self.trajectories[i].push(c);
                cur = c;
            }
            self.sense(cur);
            since = 0.0;
        }
        self.robots[i].pos = cur;
    }

    fn reallocate(&mut self, tick: usize) -> Result<(), SimError> {
        let cfg = self.cfg;
        let round = self.reallocations as u64;
        self.reallocations += 1;
        for r in &mut self.robots {
            r.task_buffer.clear();
        }
        self.blacklist.retain(|_, until| *until > tick);
        let reps: Vec<Frontier> = clusters(&extract_frontiers(&self.belief))
            .into_iter()
            .filter(|c| !self.blacklist.contains_key(&c.representative))
            .map(|c| Frontier { cell: c.representative, cluster_id: c.id, representative: c.representative })
            .collect();
        if reps.is_empty() {
            return Ok(());
        }
        let slot: BTreeMap<usize, usize> = reps.iter().enumerate().map(|(k, f)| (f.cluster_id, k)).collect();
        let base_radius = cfg.frontier_radius_factor * cfg.sensing_radius;
        let mut seen: Vec<Vec<usize>> = Vec::with_capacity(self.robots.len());
        for r in &mut self.robots {
            let (found, eff) = frontiers_in_radius(&self.belief, &reps, r.pos, base_radius);
            r.frontier_radius = eff;
            seen.push(found.iter().map(|f| slot[&f.cluster_id]).collect());
        }
        let mut tasks: Vec<usize> = seen.iter().flatten().copied().collect();
        tasks.sort_unstable();
        tasks.dedup();
        let task_of: BTreeMap<usize, usize> = tasks.iter().enumerate().map(|(q, &k)| (k, q)).collect();
        let visible: Vec<Vec<usize>> = seen.iter().map(|s| s.iter().map(|k| task_of[k]).collect()).collect();
        let cells: Vec<Cell> = tasks.iter().map(|&k| reps[k].cell).collect();
        let (n, nt) = (self.robots.len(), tasks.len());

        let r = cfg.sensing_radius;
        let footprints: Vec<Footprint> = cells.iter().map(|&c| Footprint::new(&self.belief, c, r)).collect();
        let mut rho = vec![vec![None; nt]; n];
        let mut util = vec![vec![0.0; nt]; n];
        let mut upper = vec![vec![0.0; nt]; n];
        for (i, robot) in self.robots.iter().enumerate() {
            let field = DistanceField::new(&self.belief, robot.pos);
            for &q in &visible[i] {
                util[i][q] = field.utility(cells[q]);
                upper[i][q] = footprints[q].uncertain_count() as f64 * MAX_CELL_ENTROPY * util[i][q];
                rho[i][q] = Some(expected_reward(&self.belief, &field, cells[q], r, &robot.alpha));
            }
        }
        let nominal = RewardTable::new(rho)?;
        let perturbed = perturb_rewards(&nominal, tie_break_scale(&nominal), derive(cfg.seed, &[PERTURB, round]))?;
        let offset: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..nt).map(|q| perturbed.get(i, q).zip(nominal.get(i, q)).map_or(0.0, |(p, v)| p - v)).collect())
            .collect();

        let al = &cfg.allocation;
        let params = ConcentrationParams::with_theta(al.theta)?;
        let eps: Vec<f64> =
            (1..=al.sample_cap).map(|k| epsilon_radius(k, &params)).collect::<Result<_, _>>()?;
        let alphas: Vec<BehaviorParam> = self.robots.iter().map(|r| r.alpha).collect();
        let mut rngs: Vec<ChaCha8Rng> = (0..n).map(|i| seeded(cfg.seed, &[SAMPLES, round, i as u64])).collect();
        let mut samples = vec![vec![Vec::<f64>::new(); nt]; n];
        let mut source = |_t: u64| {
            let mut z = vec![vec![None; nt]; n];
            for i in 0..n {
                for q in 0..nt {
                    if nominal.get(i, q).is_none() {
                        continue;
                    }
                    let hi = upper[i][q];
                    let atoms = &mut samples[i][q];
                    if atoms.len() < al.sample_cap {
                        let g = footprints[q].sample_gain(&alphas[i], al.sample_delta, &mut rngs[i]) * util[i][q];
                        atoms.push(g.clamp(0.0, hi));
                    }
                    let est = if hi > 0.0 {
                        EmpiricalDistribution::new(atoms.clone(), 0.0, hi)
                            .map_or(0.0, |emp| dr_estimate(&emp, eps[atoms.len() - 1] * hi))
                    } else {
                        0.0
                    };
                    z[i][q] = Some(est + offset[i][q]);
                }
            }
            z
        };
        let schedule = StepSchedule::new(al.period, al.tau)?;
        let graph = PatchedGraph::new(n, al.tau as usize, shared_frontier_arcs(&visible));
        let out = run_dpbrag(&perturbed, &mut source, &graph, &schedule, al.outer_periods * al.period, 1.0);
        let state = out.state;

        let owner: Vec<usize> = assignment_candidates(&state, al.threshold)
            .into_iter()
            .enumerate()
            .map(|(q, c)| {
                c.unwrap_or_else(|| {
                    (0..n)
                        .filter(|&i| state.e[i][q] > f64::NEG_INFINITY)
                        .fold(None, |b: Option<usize>, i| match b {
                            Some(j) if state.e[j][q] >= state.e[i][q] => Some(j),
                            _ => Some(i),
                        })
                        .unwrap_or(0)
                })
            })
            .collect();
        let partition = Partition::from_owners(n, owner);
        if !partition.is_legal(&nominal) {
            self.partition_violations += 1;
        }
        for (i, robot) in self.robots.iter_mut().enumerate() {
            let mut mine = partition.tasks_of(i);
            mine.sort_by(|&p, &q| state.e[i][q].total_cmp(&state.e[i][p]).then(p.cmp(&q)));
            mine.truncate(cfg.buffer_cap);
            let targets: Vec<Cell> = mine.iter().map(|&q| cells[q]).collect();
            let tour = tsp_tour(robot.pos, &targets);
            robot.task_buffer = tour.order.iter().map(|&k| targets[k]).collect();
        }
        debug!("re-allocation {round} at tick {tick}: {nt} tasks over {n} robots");
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub alpha_ranges: Vec<(f64, f64)>,
    pub radii: Vec<f64>,
    pub noise: Vec<NoiseLevel>,
    pub trials: usize,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self { alpha_ranges: vec![(1.0, 1.0)], radii: vec![2.0], noise: vec![NoiseLevel::Exact], trials: 1 }
    }
}

/// One CSV row per episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub seed: u64,
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    pub radius: f64,
    pub noise: u8,
    pub robots: usize,
    pub iterations: usize,
    pub completed: bool,
    pub total_path: f64,
    pub cost: Option<f64>,
    pub final_entropy: f64,
    pub initial_entropy: f64,
}

impl SweepRow {
    pub fn new(cfg: &SimConfig, m: &EpisodeMetrics, cost: Option<f64>) -> Self {
        Self {
            seed: cfg.seed,
            alpha_lo: cfg.alpha_range.0,
            alpha_hi: cfg.alpha_range.1,
            radius: cfg.sensing_radius,
            noise: cfg.noise.as_u8(),
            robots: cfg.robots,
            iterations: m.iterations,
            completed: m.completed,
            total_path: m.total_path,
            cost,
            final_entropy: m.final_entropy,
            initial_entropy: m.initial_entropy,
        }
    }
}

/// Full factorial in (range, radius, noise, trial) order. Trials share a
/// seed across the other factors, so every setting sees the same maps,
/// starts and priors.
pub fn sweep_configs(base: &SimConfig, spec: &SweepSpec) -> Vec<SimConfig> {
    let mut out = Vec::new();
    for &range in &spec.alpha_ranges {
        for &radius in &spec.radii {
            for &noise in &spec.noise {
                for trial in 0..spec.trials {
                    let mut c = base.clone();
                    c.seed = derive(base.seed, &[trial as u64]);
                    c.alpha_range = range;
                    c.sensing_radius = radius;
                    c.noise = noise;
                    c.snapshot_every = 0;
                    out.push(c);
                }
            }
        }
    }
    out
}

/// Runs the sweep on `jobs` threads (0 picks the rayon default). Costs are
/// normalized within each (radius, noise) group.
pub fn run_sweep(base: &SimConfig, spec: &SweepSpec, jobs: usize) -> Result<Vec<SweepRow>, SimError> {
    let configs = sweep_configs(base, spec);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| SimError::Pool(e.to_string()))?;
    let metrics: Vec<EpisodeMetrics> = pool.install(|| {
        configs
            .par_iter()
            .map(|c| run_episode(c).map(|r| r.metrics))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let mut groups: BTreeMap<(u64, u8), Vec<usize>> = BTreeMap::new();
    for (k, c) in configs.iter().enumerate() {
        groups.entry((c.sensing_radius.to_bits(), c.noise.as_u8())).or_default().push(k);
    }
    let mut costs = vec![None; configs.len()];
    for idx in groups.values() {
        let batch: Vec<EpisodeMetrics> = idx.iter().map(|&k| metrics[k].clone()).collect();
        let report = cost_metric(&batch)?;
        if report.degenerate {
            debug!("degenerate cost normalization in a group of {}", batch.len());
        }
        for (&k, c) in idx.iter().zip(report.costs) {
            costs[k] = c;
        }
    }
    Ok(configs.iter().zip(&metrics).zip(costs).map(|((c, m), cost)| SweepRow::new(c, m, cost)).collect())
}

pub fn write_sweep_csv(rows: &[SweepRow], out: impl Write) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::allocation::dominating_agents;

    fn metrics(iterations: usize, total_path: f64, completed: bool) -> EpisodeMetrics {
        EpisodeMetrics {
            iterations,
            completed,
            termination: if completed { Termination::Threshold } else { Termination::Cap },
            total_path,
            robot_paths: vec![total_path],
            entropy_trace: vec![],
            initial_entropy: 1.0,
            final_entropy: 0.0,
            reallocations: 0,
            partition_violations: 0,
            entropy_increases: 0,
        }
    }

    #[test]
    fn pwc_ranges() {
        assert!(pwc_sample(2.0, 3.0, 500, 1).unwrap().iter().all(|&a| (2.0..=3.0).contains(&a)));
        assert!(pwc_sample(0.7, 0.7, 20, 1).unwrap().iter().all(|&a| a == 0.7));
        assert!(pwc_sample(0.0, 1.0, 1, 1).is_err());
        assert!(pwc_sample(2.0, 1.0, 1, 1).is_err());
    }

    #[test]
    fn pwc_mass_split_matches_density() {
        // Mass of [a, 1) under the density is 1/2 regardless of where 1 falls.
        let s = pwc_sample(0.5, 2.0, 100_000, 9).unwrap();
        let below = s.iter().filter(|&&a| a < 1.0).count() as f64 / s.len() as f64;
        assert!((below - 0.5).abs() <= 0.01, "{below}");
        // Conditional on the upper piece the draw is uniform on [1, 2].
        let upper: Vec<f64> = s.iter().copied().filter(|&a| a >= 1.0).collect();
        let mean = upper.iter().sum::<f64>() / upper.len() as f64;
        assert!((mean - 1.5).abs() < 0.01);
    }

    #[test]
    fn perturbation_breaks_ties_and_keeps_order() {
        let tied = RewardTable::dense(vec![vec![2.0], vec![2.0]]).unwrap();
        let p = perturb_rewards(&tied, 1e-6, 3).unwrap();
        assert_eq!(dominating_agents(&p, 0).unwrap().len(), 1);
        let p2 = perturb_rewards(&tied, 1e-6, 3).unwrap();
        assert_eq!(p, p2);

        let t = RewardTable::dense(vec![vec![1.0, 3.0], vec![1.5, 2.0], vec![0.2, 2.9]]).unwrap();
        let gap = min_reward_gap(&t);
        assert!((gap - 0.1).abs() < 1e-12);
        let p = perturb_rewards(&t, 0.049, 11).unwrap();
        for q in 0..2 {
            assert_eq!(dominating_agents(&p, q).unwrap(), dominating_agents(&t, q).unwrap());
        }
        assert!(matches!(perturb_rewards(&t, 0.06, 11), Err(AllocationError::PerturbationTooLarge { .. })));
    }

    #[test]
    fn cost_examples() {
        let r = cost_metric(&[metrics(10, 5.0, true), metrics(20, 5.0, true)]).unwrap();
        assert_eq!(r.costs, vec![Some(0.0), Some(1.0)]);
        assert!(r.degenerate);
        let r = cost_metric(&[metrics(7, 3.0, true), metrics(7, 3.0, true)]).unwrap();
        assert_eq!(r.costs, vec![Some(0.0), Some(0.0)]);
        let r = cost_metric(&[metrics(7, 3.0, true)]).unwrap();
        assert_eq!(r.costs, vec![Some(0.0)]);
        assert!(r.degenerate);
        assert!(cost_metric(&[]).is_err());

        // Hand arithmetic: iters 10/15/30 -> 0, .25, 1; path 4/8/6 -> 0, 1, .5.
        let b = [metrics(10, 4.0, true), metrics(15, 8.0, true), metrics(30, 6.0, true), metrics(99, 1.0, false)];
        let r = cost_metric(&b).unwrap();
        let want = [0.0, 1.25, 1.5];
        for k in 0..3 {
            assert!((r.costs[k].unwrap() - want[k]).abs() < 1e-12);
        }
        assert_eq!(r.costs[3], None);
        assert_eq!(r.excluded, vec![3]);
        assert!(!r.degenerate);
    }

    fn small_config(seed: u64) -> SimConfig {
        SimConfig { seed, map: MapSpec { width: 30, height: 30, ..MapSpec::default() }, ..SimConfig::default() }
    }

    #[test]
    fn known_map_finishes_at_once() {
        let cfg = small_config(1);
        let mut setup = EpisodeSetup::from_config(&cfg).unwrap();
        setup.prior = setup.truth.clone();
        let r = run_episode_setup(&cfg, setup).unwrap();
        assert!(r.metrics.completed);
        assert_eq!(r.metrics.iterations, 0);
        assert_eq!(r.metrics.total_path, 0.0);
    }

    #[test]
    fn single_pocket_needs_the_trip() {
        let mut truth = OccupancyGrid::filled(30, 30, 0.1, 0.0);
        for c in truth.cells().collect::<Vec<_>>() {
            if c.x == 0 || c.y == 0 || c.x == 29 || c.y == 29 {
                truth.set(c, 100.0);
            }
        }
        let mut prior = truth.clone();
        let pocket: Vec<Cell> = (22..27).flat_map(|x| (22..27).map(move |y| Cell::new(x, y))).collect();
        for &c in &pocket {
            prior.set(c, 50.0);
        }
        let start = Cell::new(3, 3);
        let cfg = SimConfig { robots: 1, sensing_radius: 0.3, max_ticks: 50, ..SimConfig::default() };
        let setup = EpisodeSetup { truth: truth.clone(), prior, starts: vec![start], alphas: vec![1.0] };
        let r = run_episode_setup(&cfg, setup).unwrap();
        assert!(r.metrics.completed, "{:?}", r.metrics);
        // The robot must get within sensing range of the nearest pocket cell.
        let field = DistanceField::new(&truth, start);
        let reach = pocket.iter().map(|&c| field.path_length(c).unwrap()).fold(f64::INFINITY, f64::min);
        assert!(r.metrics.total_path >= reach - cfg.sensing_radius, "{} < {}", r.metrics.total_path, reach);
        assert!(r.metrics.entropy_trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn episodes_are_deterministic() {
        let cfg = SimConfig { robots: 2, sensing_radius: 0.5, noise: NoiseLevel::Fine, max_ticks: 15, ..small_config(4) };
        let a = run_episode(&cfg).unwrap();
        let b = run_episode(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.metrics.partition_violations, 0);
    }

    #[test]
    fn sweep_rows_and_repeatability() {
        let base = SimConfig { robots: 2, max_ticks: 30, ..small_config(5) };
        let spec = SweepSpec {
            alpha_ranges: vec![(0.5, 0.8), (1.5, 3.0)],
            radii: vec![1.0],
            noise: vec![NoiseLevel::Exact],
            trials: 3,
        };
        let rows = run_sweep(&base, &spec, 2).unwrap();
        assert_eq!(rows.len(), 6);
        let mut a = Vec::new();
        write_sweep_csv(&rows, &mut a).unwrap();
        let mut b = Vec::new();
        write_sweep_csv(&run_sweep(&base, &spec, 1).unwrap(), &mut b).unwrap();
        assert_eq!(a, b);
        let header = String::from_utf8(a).unwrap().lines().next().unwrap().to_string();
        assert_eq!(
            header,
            "seed,alpha_lo,alpha_hi,radius,noise,robots,iterations,completed,total_path,cost,final_entropy,initial_entropy"
        );
    }
}
