//! Wasserstein-ball reward estimates on a bounded interval.

use crate::error::DomainError;

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution {
    atoms: Vec<f64>,
    lo: f64,
    hi: f64,
}

impl EmpiricalDistribution {
    pub fn new(atoms: Vec<f64>, lo: f64, hi: f64) -> Result<Self, DomainError> {
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(DomainError::new(format!("support [{lo}, {hi}] is not a proper interval")));
        }
        if atoms.is_empty() {
            return Err(DomainError::new("empirical distribution needs at least one atom"));
        }
        if let Some(a) = atoms.iter().find(|a| !(lo..=hi).contains(*a)) {
            return Err(DomainError::new(format!("atom {a} outside [{lo}, {hi}]")));
        }
        Ok(Self { atoms, lo, hi })
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().sum::<f64>() / self.atoms.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcentrationParams {
    theta: f64,
    c1: f64,
    c2: f64,
    a: f64,
    m: u32,
}

impl ConcentrationParams {
    pub fn new(theta: f64, c1: f64, c2: f64, a: f64, m: u32) -> Result<Self, DomainError> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(DomainError::new(format!("theta must be in (0,1), got {theta}")));
        }
        if !(c1 > 0.0 && c2 > 0.0 && c1.is_finite() && c2.is_finite()) {
            return Err(DomainError::new(format!("c1, c2 must be positive, got {c1}, {c2}")));
        }
        if !(a > 1.0 && a.is_finite()) {
            return Err(DomainError::new(format!("tail exponent must exceed 1, got {a}")));
        }
        if m == 0 {
            return Err(DomainError::new("dimension must be positive"));
        }
        Ok(Self { theta, c1, c2, a, m })
    }

    /// `c1 = e`, `c2 = 1`, `a = 2`, `m = 1`.
    pub fn with_theta(theta: f64) -> Result<Self, DomainError> {
        Self::new(theta, std::f64::consts::E, 1.0, 2.0, 1)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

/// Ball radius that holds the true distribution with probability at least `1 - theta`.
pub fn epsilon_radius(n: usize, params: &ConcentrationParams) -> Result<f64, DomainError> {
    if n == 0 {
        return Err(DomainError::new("sample count must be positive"));
    }
    let l = (params.c1 / params.theta).ln();
    let base = l / (params.c2 * n as f64);
    let exponent = if n as f64 >= l / params.c2 {
        1.0 / f64::from(params.m.max(2))
    } else {
        1.0 / params.a
    };
    Ok(base.max(0.0).powf(exponent))
}

/// Largest mean over the ball: mass moves upward at unit cost until it hits `hi`.
pub fn sup_mean_ball(emp: &EmpiricalDistribution, eps: f64) -> f64 {
    let mean = emp.mean();
    mean + eps.max(0.0).min(emp.hi - mean)
}

pub fn inf_mean_ball(emp: &EmpiricalDistribution, eps: f64) -> f64 {
    let mean = emp.mean();
    mean - eps.max(0.0).min(mean - emp.lo)
}

/// Midpoint of the worst-case upper and lower means.
pub fn dr_estimate(emp: &EmpiricalDistribution, eps: f64) -> f64 {
    0.5 * (sup_mean_ball(emp, eps) + inf_mean_ball(emp, eps))
}

/// Per task, the agent whose lower bound strictly exceeds every other agent's
/// upper bound. `intervals[q]` lists `(agent, inf, sup)` for task `q`.
pub fn separation_check(intervals: &[Vec<(usize, f64, f64)>]) -> Vec<Option<usize>> {
    intervals
        .iter()
        .map(|cands| {
            cands.iter().find_map(|&(i, lo, _)| {
                cands.iter().all(|&(j, _, hi)| j == i || lo > hi).then_some(i)
            })
        })
        .collect()
}

/// 1-Wasserstein distance between two empirical distributions on the line,
/// computed as the area between their CDFs.
pub fn wasserstein_1d(a: &[f64], b: &[f64]) -> f64 {
    assert!(!a.is_empty() && !b.is_empty(), "distributions must be non-empty");
    let mut xs: Vec<f64> = a.iter().chain(b).copied().collect();
    xs.sort_by(f64::total_cmp);
    let mut sa = a.to_vec();
    let mut sb = b.to_vec();
    sa.sort_by(f64::total_cmp);
    sb.sort_by(f64::total_cmp);
    let cdf = |s: &[f64], x: f64| s.partition_point(|&v| v <= x) as f64 / s.len() as f64;
    xs.windows(2).map(|w| (cdf(&sa, w[0]) - cdf(&sb, w[0])).abs() * (w[1] - w[0])).sum()
}
