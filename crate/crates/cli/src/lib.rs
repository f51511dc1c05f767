//! Experiment runner behind the `convpart` binary.

pub mod config;
pub mod experiment;
pub mod render;

pub use config::{ExperimentConfig, Exponent, Outputs};
pub use experiment::{lower_bound_line, run_experiment, Outcome};
pub use render::render_svg;
