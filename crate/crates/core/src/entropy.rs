//! Prelec probability weighting and behavioral entropy.
//!
//! All entropies are in nats. A cell with occupancy value `v` on the 0–100
//! scale enters as the probability `v / 100`.

use crate::error::DomainError;
use crate::world::OccupancyGrid;

/// Prelec weighting parameters `(alpha, beta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BehaviorParam {
    alpha: f64,
    beta: f64,
}

impl BehaviorParam {
    /// Builds the parameter pair with `beta` derived from `alpha`, which makes
    /// `H_alpha(0.5) = log 2` for every `alpha`.
    pub fn new(alpha: f64) -> Result<Self, DomainError> {
        let beta = beta_from_alpha(alpha)?;
        Ok(Self { alpha, beta })
    }

    /// Explicit `(alpha, beta)`; both must be positive and finite.
    pub fn with_beta(alpha: f64, beta: f64) -> Result<Self, DomainError> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(DomainError::new(format!("alpha must be positive, got {alpha}")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(DomainError::new(format!("beta must be positive, got {beta}")));
        }
        Ok(Self { alpha, beta })
    }

    /// Shannon case, `alpha = beta = 1`.
    pub fn shannon() -> Self {
        Self { alpha: 1.0, beta: 1.0 }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// A probability in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Probability(f64);

impl Probability {
    pub fn new(p: f64) -> Result<Self, DomainError> {
        if (0.0..=1.0).contains(&p) {
            Ok(Self(p))
        } else {
            Err(DomainError::new(format!("probability outside [0,1]: {p}")))
        }
    }

    /// Converts a 0–100 occupancy value, clamping stray rounding outside the range.
    pub fn from_occupancy(value: f64) -> Self {
        Self((value / 100.0).clamp(0.0, 1.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn complement(self) -> Self {
        Self(1.0 - self.0)
    }
}

/// `exp((1 - alpha) log(log 2))`, i.e. `(log 2)^(1 - alpha)`.
pub fn beta_from_alpha(alpha: f64) -> Result<f64, DomainError> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(DomainError::new(format!("alpha must be positive, got {alpha}")));
    }
    Ok(((1.0 - alpha) * std::f64::consts::LN_2.ln()).exp())
}

/// Prelec weight `exp(-beta (-log p)^alpha)`, exactly 0 at `p = 0` and 1 at `p = 1`.
pub fn prelec_weight(p: Probability, params: &BehaviorParam) -> f64 {
    let p = p.value();
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    (-params.beta * (-p.ln()).powf(params.alpha)).exp()
}

fn plogp(w: f64) -> f64 {
    if w <= 0.0 || w >= 1.0 {
        0.0
    } else {
        w * w.ln()
    }
}

/// Behavioral entropy `-w(p) log w(p) - w(1-p) log w(1-p)` in nats.
pub fn behavioral_entropy(p: Probability, params: &BehaviorParam) -> f64 {
    if p.value() <= 0.0 || p.value() >= 1.0 {
        return 0.0;
    }
    let a = prelec_weight(p, params);
    let b = prelec_weight(p.complement(), params);
    -plogp(a) - plogp(b)
}

/// Behavioral entropy of a 0–100 occupancy value.
pub fn occupancy_entropy(value: f64, params: &BehaviorParam) -> f64 {
    behavioral_entropy(Probability::from_occupancy(value), params)
}

/// Sum of Shannon entropies over every cell of the grid.
pub fn total_map_entropy(grid: &OccupancyGrid) -> f64 {
    let shannon = BehaviorParam::shannon();
    grid.values().iter().map(|&v| occupancy_entropy(v, &shannon)).sum()
}
