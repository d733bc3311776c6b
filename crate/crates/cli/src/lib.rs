//! Experiment plumbing behind the `symk` binary.

pub mod experiment;
pub mod sweep;

pub use experiment::{run, Algo, BoundReport, ExperimentSpec, RunError};
pub use sweep::{sweep, write_csv, write_plot_data};
