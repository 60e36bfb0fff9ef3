//! Landmark win probability estimation for two-arm longitudinal trials with
//! missing outcomes.

pub mod data;
pub mod error;
pub mod estimators;
pub mod mmrm;
pub mod ols;
pub mod panel;
pub mod rank;
pub mod report;
pub mod sim;

pub use data::{Arm, Subject, TrialData};
pub use error::{Error, Result};
pub use panel::WinFractionPanel;
pub use rank::Direction;
pub use estimators::{
    cca_estimate, convert_effects, gpc_estimate, logit_inference, mmrm_estimate, Analysis,
    EffectConversions, EstimatorOptions, Method, WinPEstimate,
};
pub use report::{analyze, write_result, AnalysisResult, OutputFormat};
