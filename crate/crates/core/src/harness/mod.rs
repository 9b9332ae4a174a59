//! Experiment drivers behind the command-line tool: the degree sweep and the
//! per-inference cost profile. Both write fixed-header CSV.

mod cost;
mod sweep;

pub use cost::{cost_profile, linear_fit, reference_cost, write_cost_csv, CostRow, LinearFit};
pub use sweep::{run_sweep, write_sweep_csv, SweepConfig, SweepReport, SweepRow};
