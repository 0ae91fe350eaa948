//! Dataset ingestion, preprocessing and synthetic scenario generators.

mod preprocess;
mod scenario;
mod table;

pub use preprocess::{
    canonicalize_direction, read_trajectories, resample_trajectory, standardize_rows,
    trajectories_to_dataset, Trajectory, TRAJECTORY_POINTS,
};
pub use scenario::{generate_scenario, Scenario, ScenarioSpec, SCENARIO_VERSION};
pub use table::{
    load_csv, read_csv, read_labels, save_csv, write_labels, LabelColumn, LoadOptions,
};
