//! Discrete-time simulation of a star-topology temperature field watched by
//! the base station. One step is one second.

pub mod environment;
pub mod network;
pub mod scenario;
pub mod streams;
pub mod training;
pub mod world;

pub use environment::{environment_temperature, Drift, EnvironmentModel, HeatEvent, HeatEventKind};
pub use network::{build_network, grid_positions, nearest_neighbors, Network};
pub use scenario::{
    BatteryOverride, NetworkConfig, PredictorConfig, Scenario, TrainingConfig, BUILTIN_SCENARIOS,
};
pub use training::{
    generate_training_set, simulate_readings, train_predictor, training_environment,
    window_features,
};
pub use world::{run_simulation, RunOptions, World};
