//! Experiment runner: problem setups, refinement studies, radius tracking
//! and CSV output.

mod radius;
mod run;
mod spec;

pub use radius::{reference_radius, track_radius, RadiusEstimate};
pub use run::{
    exact_solution, run_problem, run_refinement, write_stability_csv, RefinementReport,
    RefinementRow, RunSummary, Simulation,
};
pub use spec::{ProblemKind, ProblemSpec, RefinementMode, PRESETS};
