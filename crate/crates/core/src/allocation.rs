//! Frontier-assignment game and the d-PBRAG dynamics.
//!
//! Agents and tasks are dense indices. Every per-(agent, task) quantity is
//! stored as `v[agent][task]`. Agents that cannot see a task hold the
//! sentinel `-inf` as their estimate; they still relay the max and submax
//! registers of that task so the holders stay connected through them, but
//! their weight is fixed at zero.

use log::warn;

use crate::error::{AllocationError, DomainError};
use crate::network::GraphSequence;

pub type AgentId = usize;
pub type TaskId = usize;

/// Per-agent, per-task rewards; `None` where the task is not available to the agent.
pub type Estimates = Vec<Vec<Option<f64>>>;

#[derive(Debug, Clone, PartialEq)]
pub struct RewardTable {
    n_agents: usize,
    n_tasks: usize,
    rho: Estimates,
}

impl RewardTable {
    pub fn new(rho: Estimates) -> Result<Self, AllocationError> {
        let n_agents = rho.len();
        let n_tasks = rho.first().map_or(0, Vec::len);
        if rho.iter().any(|r| r.len() != n_tasks) {
            return Err(DomainError::new("ragged reward table").into());
        }
        for (i, row) in rho.iter().enumerate() {
            for (q, v) in row.iter().enumerate() {
                if v.is_some_and(|v| !v.is_finite()) {
                    return Err(AllocationError::NonFiniteReward { agent: i, task: q });
                }
            }
        }
        let table = Self { n_agents, n_tasks, rho };
        if let Some(q) = (0..n_tasks).find(|&q| table.holders(q).is_empty()) {
            return Err(AllocationError::UncoveredTask(q));
        }
        Ok(table)
    }

    /// Table where every agent has every task.
    pub fn dense(rho: Vec<Vec<f64>>) -> Result<Self, AllocationError> {
        Self::new(rho.into_iter().map(|r| r.into_iter().map(Some).collect()).collect())
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn n_tasks(&self) -> usize {
        self.n_tasks
    }

    pub fn get(&self, agent: AgentId, task: TaskId) -> Option<f64> {
        self.rho[agent][task]
    }

    pub fn available(&self, agent: AgentId, task: TaskId) -> bool {
        self.rho[agent][task].is_some()
    }

    /// Agents that have `task` available, in id order.
    pub fn holders(&self, task: TaskId) -> Vec<AgentId> {
        (0..self.n_agents).filter(|&i| self.available(i, task)).collect()
    }

    pub fn as_estimates(&self) -> &Estimates {
        &self.rho
    }

    fn check_task(&self, q: TaskId) -> Result<(), AllocationError> {
        if q < self.n_tasks {
            Ok(())
        } else {
            Err(AllocationError::UnknownTask(q))
        }
    }
}

pub fn clamp_unit(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Agents whose reward for `q` is maximal among those that have it.
pub fn dominating_agents(rewards: &RewardTable, q: TaskId) -> Result<Vec<AgentId>, AllocationError> {
    rewards.check_task(q)?;
    let best = rewards
        .holders(q)
        .iter()
        .filter_map(|&i| rewards.get(i, q))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(rewards.holders(q).into_iter().filter(|&i| rewards.get(i, q) == Some(best)).collect())
}

/// Task-to-agent assignment in which every task has exactly one owner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    n_agents: usize,
    owner: Vec<AgentId>,
}

impl Partition {
    pub fn from_owners(n_agents: usize, owner: Vec<AgentId>) -> Self {
        Self { n_agents, owner }
    }

    pub fn owner(&self, q: TaskId) -> AgentId {
        self.owner[q]
    }

    pub fn owners(&self) -> &[AgentId] {
        &self.owner
    }

    pub fn tasks_of(&self, agent: AgentId) -> Vec<TaskId> {
        (0..self.owner.len()).filter(|&q| self.owner[q] == agent).collect()
    }

    /// Task sets per agent.
    pub fn assignment(&self) -> Vec<Vec<TaskId>> {
        (0..self.n_agents).map(|i| self.tasks_of(i)).collect()
    }

    /// Every task owned by an agent that has it available.
    pub fn is_legal(&self, rewards: &RewardTable) -> bool {
        self.owner.len() == rewards.n_tasks()
            && self.owner.iter().enumerate().all(|(q, &i)| i < self.n_agents && rewards.available(i, q))
    }

    /// Total reward collected.
    pub fn value(&self, rewards: &RewardTable) -> f64 {
        self.owner.iter().enumerate().filter_map(|(q, &i)| rewards.get(i, q)).sum()
    }
}

/// Optimal partition: each task to its dominating agent, lowest id on ties.
pub fn brute_force_partition(rewards: &RewardTable) -> Result<Partition, AllocationError> {
    let owner = (0..rewards.n_tasks())
        .map(|q| {
            dominating_agents(rewards, q)?
                .first()
                .copied()
                .ok_or(AllocationError::UncoveredTask(q))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Partition { n_agents: rewards.n_agents(), owner })
}

/// Utility of agent `i` under weight profile `w`: reward earned minus the
/// strongest competing claim on each of its tasks.
pub fn game_utility(i: AgentId, w: &[Vec<f64>], rewards: &RewardTable) -> f64 {
    (0..rewards.n_tasks())
        .filter_map(|q| {
            let rho = rewards.get(i, q)?;
            let rival = (0..rewards.n_agents())
                .filter(|&j| j != i)
                .filter_map(|j| rewards.get(j, q).map(|r| r * w[j][q]))
                .fold(0.0, f64::max);
            Some(rho * w[i][q] - rival * w[i][q])
        })
        .sum()
}

/// Half the gap between the best and second-best reward for `q`;
/// `+inf` when fewer than two agents have the task.
pub fn mu_band_limit(rewards: &RewardTable, q: TaskId) -> f64 {
    let vals: Vec<f64> = rewards.holders(q).iter().filter_map(|&i| rewards.get(i, q)).collect();
    if vals.len() < 2 {
        return f64::INFINITY;
    }
    let (m, s) = max_submax(&vals);
    0.5 * (m - s)
}

pub fn switch(m: f64, f: f64, t: u64, period: u64) -> f64 {
    if t % period == 0 {
        f
    } else {
        m
    }
}

/// Largest value and largest value strictly below it. Non-finite negative
/// entries are ignored. Submax equals max when all values agree; both are
/// `-inf` for an empty input.
pub fn max_submax(values: &[f64]) -> (f64, f64) {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s = values.iter().copied().filter(|&v| v < m && v > f64::NEG_INFINITY).fold(f64::NEG_INFINITY, f64::max);
    (m, if s == f64::NEG_INFINITY { m } else { s })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSchedule {
    period: u64,
    tau: u64,
    alpha0: f64,
    beta0: f64,
}

impl StepSchedule {
    pub const DEFAULT_ALPHA0: f64 = 0.05;
    pub const DEFAULT_BETA0: f64 = 0.5;

    pub fn new(period: u64, tau: u64) -> Result<Self, DomainError> {
        Self::with_gains(period, tau, Self::DEFAULT_ALPHA0, Self::DEFAULT_BETA0)
    }

    pub fn with_gains(period: u64, tau: u64, alpha0: f64, beta0: f64) -> Result<Self, DomainError> {
        if tau == 0 || period <= 2 * tau + 1 {
            return Err(DomainError::new(format!(
                "injection period {period} must exceed 2*tau+1 with tau={tau} >= 1"
            )));
        }
        if !(alpha0 >= 0.0 && alpha0.is_finite() && beta0 > 0.0 && beta0.is_finite()) {
            return Err(DomainError::new(format!("bad step gains ({alpha0}, {beta0})")));
        }
        Ok(Self { period, tau, alpha0, beta0 })
    }

    pub fn period(&self) -> u64 {
        self.period
    }

    pub fn tau(&self) -> u64 {
        self.tau
    }

    /// Small step used while consensus settles; decays to zero.
    pub fn alpha_seq(&self, k: u64) -> f64 {
        self.alpha0 / (k + 1) as f64
    }

    /// Large step used once consensus has settled; grows without bound.
    pub fn beta_seq(&self, k: u64) -> f64 {
        self.beta0 * (k + 1) as f64
    }
}

pub fn step_size(t: u64, schedule: &StepSchedule) -> f64 {
    let k = t / schedule.period;
    if t - k * schedule.period < 2 * schedule.tau {
        schedule.alpha_seq(k)
    } else {
        schedule.beta_seq(k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationState {
    pub w: Vec<Vec<f64>>,
    pub m: Vec<Vec<f64>>,
    pub s: Vec<Vec<f64>>,
    pub e: Vec<Vec<f64>>,
    pub t: u64,
}

fn to_registers(z: &Estimates) -> Vec<Vec<f64>> {
    z.iter().map(|row| row.iter().map(|v| v.unwrap_or(f64::NEG_INFINITY)).collect()).collect()
}

impl AllocationState {
    /// State at `t = 0`: every register holds the agent's own estimate and
    /// holders start at weight `w0`.
    pub fn initial(z0: &Estimates, w0: f64) -> Self {
        let e = to_registers(z0);
        let w = z0
            .iter()
            .map(|row| row.iter().map(|v| if v.is_some() { clamp_unit(w0) } else { 0.0 }).collect())
            .collect();
        Self { w, m: e.clone(), s: e.clone(), e, t: 0 }
    }

    pub fn n_agents(&self) -> usize {
        self.w.len()
    }

    pub fn n_tasks(&self) -> usize {
        self.w.first().map_or(0, Vec::len)
    }
}

/// One synchronous round from `t` to `t+1`. `z_next` must be supplied when
/// `t+1` is an injection time; `neighbors[i]` are agent `i`'s in-neighbours at `t+1`.
pub fn dpbrag_step(
    state: &AllocationState,
    z_next: Option<&Estimates>,
    neighbors: &[Vec<usize>],
    schedule: &StepSchedule,
) -> AllocationState {
    let (n, nt) = (state.n_agents(), state.n_tasks());
    let t1 = state.t + 1;
    let inject = t1 % schedule.period == 0;
    let gamma = step_size(state.t, schedule);
    let fresh = match (inject, z_next) {
        (true, Some(z)) => Some(to_registers(z)),
        (true, None) => panic!("estimates required at injection step {t1}"),
        _ => None,
    };
    let mut next = state.clone();
    next.t = t1;
    let mut pool = Vec::with_capacity(n + 2);
    for i in 0..n {
        for q in 0..nt {
            let e = state.e[i][q];
            if e > f64::NEG_INFINITY {
                let drive = e - 0.5 * (state.m[i][q] + state.s[i][q]);
                next.w[i][q] = clamp_unit(state.w[i][q] + gamma * drive);
            }
            let e1 = fresh.as_ref().map_or(e, |f| f[i][q]);
            next.e[i][q] = e1;

            let m = neighbors[i].iter().map(|&j| state.m[j][q]).fold(state.m[i][q], f64::max);
            next.m[i][q] = switch(m, e1, t1, schedule.period);

            pool.clear();
            pool.push(state.s[i][q]);
            pool.extend(neighbors[i].iter().map(|&j| state.s[j][q]));
            pool.push(state.m[i][q]);
            pool.push(e);
            let (_, s) = max_submax(&pool);
            next.s[i][q] = switch(s, e1, t1, schedule.period);
        }
    }
    next
}

/// Supplies estimates at injection times.
pub trait EstimateSource {
    fn estimates(&mut self, t: u64) -> Estimates;
}

/// Exact rewards at every injection.
pub struct ExactRewards<'a>(pub &'a RewardTable);

impl EstimateSource for ExactRewards<'_> {
    fn estimates(&mut self, _t: u64) -> Estimates {
        self.0.as_estimates().clone()
    }
}

impl<F: FnMut(u64) -> Estimates> EstimateSource for F {
    fn estimates(&mut self, t: u64) -> Estimates {
        self(t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DpbragOutcome {
    pub state: AllocationState,
    /// Some task has more than one dominating agent under the nominal rewards.
    pub tie_warning: bool,
}

/// Default number of injection periods in one allocation phase.
pub const DEFAULT_OUTER_PERIODS: u64 = 12;

/// Runs `rounds` synchronous steps. The `rewards` table fixes availability
/// and is used for the tie check; the estimates injected come from `source`.
pub fn run_dpbrag(
    rewards: &RewardTable,
    source: &mut impl EstimateSource,
    graph: &impl GraphSequence,
    schedule: &StepSchedule,
    rounds: u64,
    w0: f64,
) -> DpbragOutcome {
    run_dpbrag_observed(rewards, source, graph, schedule, rounds, w0, |_| {})
}

/// As [`run_dpbrag`], calling `observe` on the initial state and after every step.
pub fn run_dpbrag_observed(
    rewards: &RewardTable,
    source: &mut impl EstimateSource,
    graph: &impl GraphSequence,
    schedule: &StepSchedule,
    rounds: u64,
    w0: f64,
    mut observe: impl FnMut(&AllocationState),
) -> DpbragOutcome {
    let tie_warning = (0..rewards.n_tasks())
        .any(|q| dominating_agents(rewards, q).map_or(false, |d| d.len() > 1));
    if tie_warning {
        warn!("tied dominating agents; convergence is not guaranteed");
    }
    let mut state = AllocationState::initial(&source.estimates(0), w0);
    observe(&state);
    for _ in 0..rounds {
        let t1 = state.t + 1;
        let z = (t1 % schedule.period == 0).then(|| source.estimates(t1));
        state = dpbrag_step(&state, z.as_ref(), &graph.in_neighbors(t1), schedule);
        observe(&state);
    }
    DpbragOutcome { state, tie_warning }
}

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Owner of each task: the agent with the largest weight, if that weight
/// exceeds `threshold`. Ties go to the lowest id.
pub fn assignment_candidates(state: &AllocationState, threshold: f64) -> Vec<Option<AgentId>> {
    (0..state.n_tasks())
        .map(|q| {
            let mut best: Option<(AgentId, f64)> = None;
            for i in 0..state.n_agents() {
                if state.e[i][q] == f64::NEG_INFINITY {
                    continue;
                }
                if best.map_or(true, |(_, bw)| state.w[i][q] > bw) {
                    best = Some((i, state.w[i][q]));
                }
            }
            best.filter(|&(_, w)| w > threshold).map(|(i, _)| i)
        })
        .collect()
}

pub fn extract_assignment(state: &AllocationState, threshold: f64) -> Result<Partition, AllocationError> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(DomainError::new(format!("threshold must be in (0,1), got {threshold}")).into());
    }
    let cand = assignment_candidates(state, threshold);
    let orphans: Vec<TaskId> = (0..cand.len()).filter(|&q| cand[q].is_none()).collect();
    if !orphans.is_empty() {
        return Err(AllocationError::IncompleteAssignment(orphans));
    }
    Ok(Partition { n_agents: state.n_agents(), owner: cand.into_iter().flatten().collect() })
}
