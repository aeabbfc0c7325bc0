//! Getting recordings into the pipeline: the CSV adapter for captured data and
//! the channel-model simulator for tests and demos.

mod csv;
mod simulate;

pub use self::csv::{
    canonical_header, load_csv, load_mapped, parse_mapped, to_csv_string, write_csv, ColumnMap,
    LabeledRecording,
};
pub use self::simulate::{
    baseline_amplitude, simulate, simulate_bank, MotionProfile, ScenarioSpec, SimulationConfig,
    DEFAULT_NOISE_STD,
};
