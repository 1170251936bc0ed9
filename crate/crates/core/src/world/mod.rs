//! Occupancy-grid world: maps, noise, sensing, frontiers and rewards.

pub mod frontier;
pub mod grid;
pub mod mapgen;
pub mod reward;
pub mod sensor;

pub use frontier::{clusters, extract_frontiers, frontiers_in_radius, Frontier, FrontierCluster};
pub use grid::{load_grid_file, Cell, OccupancyGrid, TRAVERSABLE_BELOW};
pub use mapgen::{add_quadrant_noise, free_space_connected, generate_map, MapKind};
pub use reward::{
    distance_utility, expected_reward, info_gain, sample_reward, DistanceField, Footprint,
    SAMPLE_DELTA,
};
pub use sensor::{sense_update, NoiseLevel, SensorModel};
