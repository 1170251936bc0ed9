use rand::Rng;
use serde::{Deserialize, Serialize};

use super::grid::{Cell, OccupancyGrid};
use crate::error::DomainError;

/// Mapping noise level. Level 0 is a perfect sensor; levels 1 and 2 move
/// each cell toward the truth by a bounded uniform step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum NoiseLevel {
    Exact,
    Coarse,
    Fine,
}

impl NoiseLevel {
    /// Largest single-step correction, or `None` for the exact sensor.
    pub fn step_bound(self) -> Option<f64> {
        match self {
            Self::Exact => None,
            Self::Coarse => Some(35.0),
            Self::Fine => Some(15.0),
        }
    }

    pub fn as_u8(self) -> u8 {
        self.into()
    }
}

impl TryFrom<u8> for NoiseLevel {
    type Error = DomainError;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            0 => Ok(Self::Exact),
            1 => Ok(Self::Coarse),
            2 => Ok(Self::Fine),
            _ => Err(DomainError::new(format!("noise level must be 0, 1 or 2, got {v}"))),
        }
    }
}

impl From<NoiseLevel> for u8 {
    fn from(n: NoiseLevel) -> u8 {
        match n {
            NoiseLevel::Exact => 0,
            NoiseLevel::Coarse => 1,
            NoiseLevel::Fine => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorModel {
    radius: f64,
    noise: NoiseLevel,
}

impl SensorModel {
    pub fn new(radius: f64, noise: NoiseLevel) -> Result<Self, DomainError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(DomainError::new(format!("sensing radius must be positive, got {radius}")));
        }
        Ok(Self { radius, noise })
    }

    /// Radius in map units.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn noise(&self) -> NoiseLevel {
        self.noise
    }
}

/// Moves `value` toward `truth` by `step`, never past it.
fn approach(value: f64, truth: f64, step: f64) -> f64 {
    if value > truth {
        (value - step).max(truth)
    } else {
        (value + step).min(truth)
    }
}

/// Updates every cell within the sensing disk around `center`. Returns the
/// number of cells in the disk.
pub fn sense_update(
    map: &mut OccupancyGrid,
    truth: &OccupancyGrid,
    center: Cell,
    sensor: &SensorModel,
    rng: &mut impl Rng,
) -> usize {
    let disk = map.disk(center, sensor.radius);
    for &c in &disk {
        let t = truth.get(c);
        let v = match sensor.noise.step_bound() {
            None => t,
            Some(bound) => approach(map.get(c), t, rng.random_range(0.0..=bound)),
        };
        map.set(c, v);
    }
    disk.len()
}
