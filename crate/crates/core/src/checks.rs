//! Fixed-seed certificate suites behind `behex check`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::abstract_model::{random_eta, run_abstract, team_pbar, AbstractWorld, AgentConfig, Contraction};
use crate::allocation::{
    brute_force_partition, extract_assignment, mu_band_limit, run_dpbrag, ExactRewards, RewardTable,
    StepSchedule, DEFAULT_OUTER_PERIODS, DEFAULT_THRESHOLD,
};
use crate::dro::{epsilon_radius, inf_mean_ball, sup_mean_ball, wasserstein_1d, ConcentrationParams, EmpiricalDistribution};
use crate::entropy::{behavioral_entropy, prelec_weight, BehaviorParam, Probability};
use crate::error::DomainError;
use crate::network::{PeriodicRing, StaticGraph};
use crate::rng::seeded;

const SEED: u64 = 0x6368_6b73;
const MAX_LISTED: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Entropy,
    Allocation,
    Dro,
    Lemma,
    Prop,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Entropy, Suite::Allocation, Suite::Dro, Suite::Lemma, Suite::Prop];
}

impl FromStr for Suite {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "entropy" => Ok(Suite::Entropy),
            "allocation" => Ok(Suite::Allocation),
            "dro" => Ok(Suite::Dro),
            "lemma" => Ok(Suite::Lemma),
            "prop" => Ok(Suite::Prop),
            other => Err(DomainError::new(format!("unknown suite `{other}`"))),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Suite::Entropy => "entropy",
            Suite::Allocation => "allocation",
            Suite::Dro => "dro",
            Suite::Lemma => "lemma",
            Suite::Prop => "prop",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SuiteReport {
    pub passed: usize,
    pub failed: usize,
    /// Names of failing cases, truncated to the first few.
    pub failures: Vec<String>,
    pub notes: Vec<String>,
}

impl SuiteReport {
    pub fn ok(&self) -> bool {
        self.failed == 0
    }

    fn record(&mut self, pass: bool, case: impl FnOnce() -> String) {
        if pass {
            self.passed += 1;
        } else {
            self.failed += 1;
            if self.failures.len() < MAX_LISTED {
                self.failures.push(case());
            }
        }
    }
}

pub fn run_suite(suite: Suite) -> SuiteReport {
    match suite {
        Suite::Entropy => entropy_suite(),
        Suite::Allocation => allocation_suite(),
        Suite::Dro => dro_suite(),
        Suite::Lemma => lemma_suite(),
        Suite::Prop => prop_suite(),
    }
}

fn shannon(p: f64) -> f64 {
    let mut h = 0.0;
    for x in [p, 1.0 - p] {
        if x > 0.0 {
            h -= x * x.ln();
        }
    }
    h
}

fn entropy_suite() -> SuiteReport {
    let mut r = SuiteReport::default();
    let grid: Vec<f64> = (0..=10_000).map(|k| k as f64 / 10_000.0).collect();
    let be = |p: f64, a: &BehaviorParam| behavioral_entropy(Probability::from_occupancy(100.0 * p), a);

    let one = BehaviorParam::shannon();
    let worst = grid.iter().map(|&p| (be(p, &one) - shannon(p)).abs()).fold(0.0, f64::max);
    r.record(worst <= 1e-12, || format!("alpha=1 differs from Shannon by {worst:e}"));

    for alpha in [0.1, 0.5, 1.0, 2.0, 4.0, 8.0] {
        let a = BehaviorParam::new(alpha).expect("valid alpha");
        let h = be(0.5, &a);
        r.record((h - 2f64.ln()).abs() <= 1e-9, || format!("H(0.5; {alpha}) = {h}"));
        let asym = grid.iter().map(|&p| (be(p, &a) - be(1.0 - p, &a)).abs()).fold(0.0, f64::max);
        r.record(asym <= 1e-12, || format!("alpha={alpha}: asymmetry {asym:e}"));
        let in_range = grid.iter().all(|&p| {
            let h = be(p, &a);
            (0.0..=2.0 / std::f64::consts::E + 1e-12).contains(&h)
        });
        r.record(in_range, || format!("alpha={alpha}: entropy outside [0, 2/e]"));
        let fixed = prelec_weight(Probability::new(0.5).expect("in range"), &a);
        r.record((fixed - 0.5).abs() <= 1e-12, || format!("alpha={alpha}: w(0.5) = {fixed}"));
    }
    r
}

/// Random dense table: 2–5 agents, 1–6 tasks, rewards uniform on [0, 10).
pub fn allocation_instance(rng: &mut impl Rng) -> RewardTable {
    let n = rng.random_range(2..=5);
    let m = rng.random_range(1..=6);
    RewardTable::dense((0..n).map(|_| (0..m).map(|_| rng.random_range(0.0..10.0)).collect()).collect())
        .expect("finite rewards")
}

/// Graph family of allocation case `k`: complete or periodic ring, tau 1 or 2.
pub fn allocation_case(k: u64) -> (RewardTable, bool, usize) {
    let table = allocation_instance(&mut seeded(SEED, &[1, k]));
    let complete = k % 2 == 0;
    let tau = 1 + (k / 2 % 2) as usize;
    (table, complete, tau)
}

/// Runs case `k` and reports whether the extracted assignment equals the
/// brute-force optimum. With `noise_fraction > 0` every injected estimate
/// carries fresh uniform noise of that fraction of the task's band limit.
pub fn allocation_case_matches(k: u64, noise_fraction: f64) -> bool {
    let (table, complete, tau) = allocation_case(k);
    let schedule = StepSchedule::new(8, tau as u64).expect("valid schedule");
    let rounds = DEFAULT_OUTER_PERIODS * 8;
    let oracle = brute_force_partition(&table).expect("dense table");
    let band: Vec<f64> = (0..table.n_tasks()).map(|q| noise_fraction * mu_band_limit(&table, q)).collect();
    let mut rng = seeded(SEED, &[2, k]);
    let mut noisy = |_t: u64| {
        (0..table.n_agents())
            .map(|i| {
                (0..table.n_tasks())
                    .map(|q| {
                        let b = band[q];
                        let z = if b > 0.0 && b.is_finite() { rng.random_range(-b..=b) } else { 0.0 };
                        table.get(i, q).map(|v| v + z)
                    })
                    .collect()
            })
            .collect()
    };
    let n = table.n_agents();
    let out = match (complete, noise_fraction > 0.0) {
        (true, false) => run_dpbrag(&table, &mut ExactRewards(&table), &StaticGraph::complete(n).with_tau(tau), &schedule, rounds, 1.0),
        (false, false) => run_dpbrag(&table, &mut ExactRewards(&table), &PeriodicRing::new(n, tau), &schedule, rounds, 1.0),
        (true, true) => run_dpbrag(&table, &mut noisy, &StaticGraph::complete(n).with_tau(tau), &schedule, rounds, 1.0),
        (false, true) => run_dpbrag(&table, &mut noisy, &PeriodicRing::new(n, tau), &schedule, rounds, 1.0),
    };
    extract_assignment(&out.state, DEFAULT_THRESHOLD).is_ok_and(|p| p == oracle)
}

fn allocation_suite() -> SuiteReport {
    let mut r = SuiteReport::default();
    for k in 0..200 {
        r.record(allocation_case_matches(k, 0.0), || format!("instance {k}"));
    }
    r
}

/// Truncated normal on `[0, 1]` by rejection.
pub fn truncated_normal(mu: f64, sd: f64, rng: &mut impl Rng) -> f64 {
    let d = Normal::new(mu, sd).expect("positive sd");
    loop {
        let x = d.sample(rng);
        if (0.0..=1.0).contains(&x) {
            return x;
        }
    }
}

/// Mean of the normal truncated to `[0, 1]`, by Simpson quadrature.
pub fn truncated_normal_mean(mu: f64, sd: f64) -> f64 {
    let n = 20_000;
    let h = 1.0 / n as f64;
    let pdf = |x: f64| (-(x - mu).powi(2) / (2.0 * sd * sd)).exp();
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..=n {
        let x = k as f64 * h;
        let w = if k == 0 || k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
        num += w * x * pdf(x);
        den += w * pdf(x);
    }
    num / den
}

/// Fraction of `trials` robust intervals from `n` samples that contain the true mean.
pub fn dro_coverage(n: usize, trials: usize, seed: u64) -> f64 {
    let (mu, sd) = (0.4, 0.2);
    let truth = truncated_normal_mean(mu, sd);
    let params = ConcentrationParams::with_theta(0.1).expect("valid theta");
    let eps = epsilon_radius(n, &params).expect("n > 0");
    let mut rng = seeded(seed, &[n as u64]);
    let hits = (0..trials)
        .filter(|_| {
            let atoms: Vec<f64> = (0..n).map(|_| truncated_normal(mu, sd, &mut rng)).collect();
            let e = EmpiricalDistribution::new(atoms, 0.0, 1.0).expect("atoms in support");
            inf_mean_ball(&e, eps) <= truth && truth <= sup_mean_ball(&e, eps)
        })
        .count();
    hits as f64 / trials as f64
}

fn dro_suite() -> SuiteReport {
    let mut r = SuiteReport::default();
    for n in [10usize, 50, 200] {
        let c = dro_coverage(n, 1000, SEED);
        r.notes.push(format!("coverage at N={n}: {c:.3}"));
        r.record(c >= 0.9, || format!("coverage {c:.3} at N={n}"));
    }
    let params = ConcentrationParams::with_theta(0.1).expect("valid theta");
    let eps: Vec<f64> = (1..=300).map(|n| epsilon_radius(n, &params).expect("n > 0")).collect();
    r.record(eps.windows(2).all(|w| w[1] <= w[0]), || "radius not non-increasing in N".into());

    let mut rng = seeded(SEED, &[3]);
    for k in 0..50 {
        let atoms: Vec<f64> = (0..rng.random_range(1..30)).map(|_| rng.random_range(0.0..=1.0)).collect();
        let e = EmpiricalDistribution::new(atoms.clone(), 0.0, 1.0).expect("atoms in support");
        let eps = rng.random_range(0.0..0.5);
        let (lo, m, hi) = (inf_mean_ball(&e, eps), e.mean(), sup_mean_ball(&e, eps));
        r.record(lo <= m && m <= hi && hi - lo <= 2.0 * eps + 1e-12, || format!("ball instance {k}"));
        let shift: Vec<f64> = atoms.iter().map(|a| a + 0.25).collect();
        let w = wasserstein_1d(&atoms, &shift);
        r.record((w - 0.25).abs() < 1e-9 && wasserstein_1d(&atoms, &atoms) == 0.0, || format!("W1 instance {k}"));
    }
    r
}

/// One abstract world for the certificate suites: 10–30 cells, 2–4 agents,
/// random symmetric distances and truths, distinct start cells.
pub struct AbstractCase {
    pub world: AbstractWorld,
    pub positions: Vec<usize>,
}

fn abstract_layout(rng: &mut impl Rng) -> (usize, Vec<Vec<f64>>, Vec<f64>, Vec<usize>) {
    let n = rng.random_range(10..=30);
    let na = rng.random_range(2..=4);
    let eta = random_eta(n, rng);
    let truth: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { 0.0 }).collect();
    let mut cells: Vec<usize> = (0..n).collect();
    let positions = (0..na).map(|_| cells.swap_remove(rng.random_range(0..cells.len()))).collect();
    (n, eta, truth, positions)
}

/// Beliefs on the truth's side of 1/2, as the entropy-decrease bound assumes.
pub fn lemma_case(seed: u64, lambda: f64) -> AbstractCase {
    let mut rng = seeded(SEED, &[4, seed, lambda.to_bits()]);
    let (_, eta, truth, positions) = abstract_layout(&mut rng);
    let p = truth.iter().map(|&t| { let d = rng.random_range(0.0..0.5); if t == 1.0 { 1.0 - d } else { d } }).collect();
    AbstractCase { world: AbstractWorld::new(eta, p, truth, lambda).expect("valid world"), positions }
}

pub const LEMMA_LAMBDAS: [f64; 3] = [0.0, 0.3, 0.7];

/// Counts over seeded abstract runs: steps checked, steps where the realized
/// entropy change exceeded the bound, and steps with a finite non-negative bound.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LemmaTally {
    pub steps: usize,
    pub exceeded: usize,
    pub nonnegative: usize,
    /// Steps with either defect.
    pub failing: usize,
    pub first: Vec<String>,
}

pub fn lemma_tally(seeds: u64, steps: u64) -> LemmaTally {
    let mut t = LemmaTally::default();
    for seed in 0..seeds {
        for lambda in LEMMA_LAMBDAS {
            let case = lemma_case(seed, lambda);
            let alphas = vec![BehaviorParam::shannon(); case.positions.len()];
            let run = run_abstract(&case.world, &AgentConfig { alphas, positions: case.positions }, steps, Contraction::Tight)
                .expect("valid run");
            for s in &run.steps {
                t.steps += 1;
                if s.bound_violated {
                    t.exceeded += 1;
                }
                if s.bound_nonnegative {
                    t.nonnegative += 1;
                }
                if s.bound_violated || s.bound_nonnegative {
                    t.failing += 1;
                }
                if (s.bound_violated || s.bound_nonnegative) && t.first.len() < MAX_LISTED {
                    t.first.push(format!(
                        "seed {seed} lambda {lambda} step {}: dH {:.6} bound {:.6}",
                        s.t,
                        s.delta(),
                        s.bound
                    ));
                }
            }
        }
    }
    t
}

fn lemma_suite() -> SuiteReport {
    let t = lemma_tally(50, 200);
    SuiteReport {
        passed: t.steps - t.failing,
        failed: t.failing,
        failures: t.first,
        notes: vec![format!("{} steps, {} above bound, {} non-negative bounds", t.steps, t.exceeded, t.nonnegative)],
    }
}

/// Distinct alphas and beliefs outside `[pbar, 1 - pbar]`. `None` when the
/// drawn alphas give no crossing point.
pub fn prop_case(seed: u64) -> Option<(AbstractCase, Vec<f64>, f64)> {
    let mut rng = seeded(SEED, &[5, seed]);
    let (n, eta, truth, positions) = abstract_layout(&mut rng);
    let lambda = LEMMA_LAMBDAS[(seed % 3) as usize];
    let probe = AbstractWorld::new(eta.clone(), vec![0.5; n], truth.clone(), lambda).ok()?;
    let (d_m, d_big) = probe.distance_ratios();
    let mut alphas: Vec<f64> = Vec::new();
    while alphas.len() < positions.len() {
        let a = rng.random_range(0.3..4.0);
        if alphas.iter().all(|&b| (a - b).abs() > 0.05) {
            alphas.push(a);
        }
    }
    let pbar = team_pbar(&alphas, d_m, d_big).ok()?;
    let p = truth
        .iter()
        .map(|&t| {
            let d = rng.random_range(0.0..pbar);
            if t == 1.0 { 1.0 - d } else { d }
        })
        .collect();
    let world = AbstractWorld::new(eta, p, truth, lambda).ok()?;
    Some((AbstractCase { world, positions }, alphas, pbar))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PropTally {
    pub runs: usize,
    pub skipped: usize,
    pub steps: usize,
    pub position_collisions: usize,
    pub raw_collisions: usize,
    /// Raw-target collisions when every agent uses the first agent's alpha.
    pub control_raw_collisions: usize,
}

pub fn prop_tally(seeds: u64, steps: u64) -> PropTally {
    let mut t = PropTally::default();
    for seed in 0..seeds {
        let Some((case, alphas, _)) = prop_case(seed) else {
            t.skipped += 1;
            continue;
        };
        t.runs += 1;
        let params: Vec<BehaviorParam> = alphas.iter().map(|&a| BehaviorParam::new(a).expect("valid alpha")).collect();
        let cfg = AgentConfig { alphas: params.clone(), positions: case.positions.clone() };
        let run = run_abstract(&case.world, &cfg, steps, Contraction::Tight).expect("valid run");
        t.steps += run.steps.len();
        t.position_collisions += run.steps.iter().filter(|s| s.position_collision).count();
        t.raw_collisions += run.steps.iter().filter(|s| s.raw_collision).count();
        let same = AgentConfig { alphas: vec![params[0]; params.len()], positions: case.positions };
        let control = run_abstract(&case.world, &same, steps, Contraction::Tight).expect("valid run");
        t.control_raw_collisions += control.steps.iter().filter(|s| s.raw_collision).count();
    }
    t
}

fn prop_suite() -> SuiteReport {
    let t = prop_tally(50, 200);
    let mut r = SuiteReport::default();
    r.passed = t.steps - t.position_collisions;
    r.failed = t.position_collisions;
    if t.position_collisions > 0 {
        r.failures.push(format!("{} steps with shared positions", t.position_collisions));
    }
    r.record(t.control_raw_collisions > 0, || "control produced no raw collision".into());
    r.notes.push(format!(
        "{} runs ({} skipped), raw collisions {} (control {})",
        t.runs, t.skipped, t.raw_collisions, t.control_raw_collisions
    ));
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.to_string().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn entropy_and_dro_suites_pass() {
        let e = run_suite(Suite::Entropy);
        assert!(e.ok(), "{e:?}");
        let d = run_suite(Suite::Dro);
        assert!(d.ok(), "{d:?}");
    }

    #[test]
    fn lemma_cases_respect_the_hypothesis() {
        for seed in 0..10 {
            for lambda in LEMMA_LAMBDAS {
                assert!(lemma_case(seed, lambda).world.hypothesis_held());
            }
        }
    }

    #[test]
    fn prop_cases_sit_outside_the_band() {
        let mut built = 0;
        for seed in 0..20 {
            if let Some((case, alphas, pbar)) = prop_case(seed) {
                built += 1;
                assert!(case.world.beliefs().iter().all(|&p| p < pbar || p > 1.0 - pbar));
                assert_eq!(alphas.len(), case.positions.len());
            }
        }
        assert!(built > 0);
    }
}
