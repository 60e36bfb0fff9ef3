//! Monte Carlo study of the three procedures under simulated dropout.

mod generate;
mod scenario;
mod study;

pub use generate::{
    apply_mar_mnar, apply_mcar, apply_mechanism, generate_complete, is_monotone, landmark_dropout_pct,
    mcar_stage_size, MvNormal,
};
pub use scenario::{
    true_theta, DropoutCase, Mechanism, Scenario, Trajectory, OCCASIONS, SIGMA_CONTROL, SIGMA_TREATMENT,
};
pub use study::{
    format_reports, replicate_rng, run_study, run_study_methods, simulate_replicate, threads_from_env,
    ReplicateOutcome, SimulationReport, StudyConfig,
};
