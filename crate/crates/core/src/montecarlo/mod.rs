//! Monte-Carlo harness: frame simulation (jammer, pilot and data phases),
//! metrics, parameter sweeps with deterministic seeding, and
//! coordinate-descent learning of cluster rotations.

mod frame;
mod metrics;
mod rotations;
mod sweep;

pub use frame::{simulate_frame, trial_rngs, FrameConfig, FrameNoise, FrameOutcome, FramePipeline, QuantizedFrame, RotationMode};
pub use metrics::{compute_rmsse, served_fraction, wilson_interval, MetricRecord, TrialResult, SERVED_THRESHOLD, Z95};
pub use rotations::{
    coordinate_descent, evaluate_rotations, learn_rotations, learning_frame, rotation_grid, training_set,
    DescentOutcome, LearnedRotations, RotationLearnConfig, RotationObjective, SnipsBerObjective,
};
pub use sweep::{
    build_pool, derive_seed, read_csv, run_point, run_sweep, splitmix64, write_atomic, write_csv, CsvRow, SweepPoint,
    SweepResult, CSV_HEADER,
};
