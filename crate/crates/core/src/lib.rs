pub mod abstract_model;
pub mod allocation;
pub mod checks;
pub mod dro;
pub mod entropy;
pub mod error;
pub mod network;
pub mod planner;
pub mod rng;
pub mod sim;
pub mod world;

pub use entropy::{
    behavioral_entropy, beta_from_alpha, occupancy_entropy, prelec_weight, total_map_entropy,
    BehaviorParam, Probability,
};
pub use error::{AllocationError, DomainError, GraphError, GridError, PlanError, SimError};
pub use world::{Cell, OccupancyGrid};
