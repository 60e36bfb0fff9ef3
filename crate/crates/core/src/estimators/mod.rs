//! The three landmark procedures: pairwise carry-forward scoring (GPC),
//! complete-case ANCOVA (CCA), and the repeated-measures model (MMRM).

mod cca;
mod gpc;
mod inference;
mod longitudinal;

pub use cca::cca_estimate;
pub use gpc::{gpc_estimate, gpc_score_pair, gpc_win_fractions, GpcFractions};
pub use inference::{
    convert_effects, logit_inference, norm_cdf, norm_quantile, theta_from_win_odds,
    EffectConversions, LogitInference,
};
pub use longitudinal::mmrm_estimate;

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Arm;
use crate::error::{Error, Result};
use crate::mmrm::{self, Contrast, FitOptions, MmrmSpec, ModelDesign, SubjectDesign};
use crate::ols::{fit_ols, DesignMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Gpc,
    Cca,
    Mmrm,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Gpc, Method::Cca, Method::Mmrm];

    pub fn name(self) -> &'static str {
        match self {
            Method::Gpc => "GPC",
            Method::Cca => "CCA",
            Method::Mmrm => "MMRM",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Variance model for the single-timepoint ANCOVA used by GPC and CCA.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LandmarkVariance {
    /// Arm-specific residual variances estimated by REML; coefficients by GLS.
    #[default]
    GroupReml,
    /// OLS coefficients with the leverage-corrected sandwich.
    Sandwich,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorOptions {
    pub alpha: f64,
    pub baseline_covariate: bool,
    pub landmark_variance: LandmarkVariance,
    pub fit: FitOptions,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        EstimatorOptions {
            alpha: 0.05,
            baseline_covariate: true,
            landmark_variance: LandmarkVariance::GroupReml,
            fit: FitOptions::default(),
        }
    }
}

impl EstimatorOptions {
    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_baseline_covariate(mut self, on: bool) -> Self {
        self.baseline_covariate = on;
        self
    }

    pub fn with_landmark_variance(mut self, v: LandmarkVariance) -> Self {
        self.landmark_variance = v;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Domain(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Win probability at one timepoint with its logit-scale inference. The
/// interval and p-value are absent when the estimate sits on the boundary or
/// has zero standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinPEstimate {
    pub method: Method,
    /// Post-baseline timepoint, 1-based.
    pub timepoint: usize,
    pub label: String,
    pub theta_hat: f64,
    pub std_error: f64,
    pub alpha: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub p_value: Option<f64>,
}

impl WinPEstimate {
    pub fn new(
        method: Method,
        timepoint: usize,
        label: impl Into<String>,
        theta_hat: f64,
        std_error: f64,
        alpha: f64,
    ) -> Result<Self> {
        let (ci_low, ci_high, p_value) = match logit_inference(theta_hat, std_error, alpha) {
            Ok(r) => (Some(r.ci_low), Some(r.ci_high), Some(r.p_value)),
            Err(Error::DegenerateInference { .. }) => (None, None, None),
            Err(e) => return Err(e),
        };
        Ok(WinPEstimate {
            method,
            timepoint,
            label: label.into(),
            theta_hat,
            std_error,
            alpha,
            ci_low,
            ci_high,
            p_value,
        })
    }

    pub fn is_degenerate(&self) -> bool {
        self.p_value.is_none()
    }

    /// `(ci_low, ci_high, p_value)`, or `DegenerateInference`.
    pub fn require_inference(&self) -> Result<(f64, f64, f64)> {
        match (self.ci_low, self.ci_high, self.p_value) {
            (Some(l), Some(u), Some(p)) => Ok((l, u, p)),
            _ => Err(Error::DegenerateInference {
                theta_hat: self.theta_hat,
                std_error: self.std_error,
            }),
        }
    }

    pub fn conversions(&self) -> Result<EffectConversions> {
        convert_effects(self.theta_hat)
    }
}

impl fmt::Display for WinPEstimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.require_inference() {
            Ok((l, u, p)) => write!(f, "{:.3} ({:.3}, {:.3}) p={}", self.theta_hat, l, u, format_p(p)),
            Err(_) => write!(f, "{:.3} (inference unavailable)", self.theta_hat),
        }
    }
}

/// Four decimals, switching to scientific notation below 1e-4.
pub fn format_p(p: f64) -> String {
    if p < 1e-4 {
        format!("{p:.1e}")
    } else {
        format!("{p:.4}")
    }
}

/// Fitting details that accompany an analysis.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Subjects per arm `[control, treatment]` that entered the final model.
    pub n_analysed: [usize; 2],
    pub excluded_missing_baseline: usize,
    pub excluded_no_observations: usize,
    /// GPC pairs scored 0.5 because no common observed timepoint existed.
    pub unresolved_pairs: Option<usize>,
    pub converged: Option<bool>,
    pub iterations: Option<usize>,
    pub log_likelihood: Option<f64>,
}

/// Output of one estimation procedure. For GPC and CCA there is a single
/// landmark estimate; MMRM yields one per post-baseline timepoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub method: Method,
    pub estimates: Vec<WinPEstimate>,
    pub warnings: Vec<String>,
    pub diagnostics: Diagnostics,
}

impl Analysis {
    pub fn landmark(&self) -> &WinPEstimate {
        self.estimates.last().expect("analysis has at least one estimate")
    }
}

pub(crate) struct TreatmentEffect {
    pub beta: f64,
    pub std_error: f64,
    pub converged: Option<bool>,
    pub iterations: Option<usize>,
}

/// Regresses `y` on treatment (and optionally the baseline fraction) and
/// returns the treatment coefficient with its standard error.
pub(crate) fn landmark_ancova(
    y: &[f64],
    arms: &[Arm],
    baseline: Option<&[f64]>,
    variance: LandmarkVariance,
    fit: &FitOptions,
) -> Result<TreatmentEffect> {
    let trt: Vec<f64> = arms.iter().map(|a| a.indicator()).collect();
    match (variance, baseline) {
        (LandmarkVariance::GroupReml, Some(w0)) => {
            let spec = MmrmSpec {
                n_timepoints: 1,
                include_baseline_covariate: true,
                group_specific_covariance: true,
            };
            let subjects = (0..y.len())
                .map(|k| SubjectDesign {
                    subject: k,
                    arm: arms[k],
                    observed: vec![0],
                    x: DMatrix::from_row_slice(1, 3, &[1.0, trt[k], w0[k]]),
                    y: DVector::from_element(1, y[k]),
                })
                .collect();
            let design = ModelDesign {
                spec,
                subjects,
                excluded_no_observations: Vec::new(),
                excluded_missing_baseline: Vec::new(),
            };
            let f = mmrm::fit_reml(&design, fit)?;
            let (beta, std_error) = mmrm::estimate_contrast(&f, &Contrast::treatment_at(&spec, 1)?)?;
            Ok(TreatmentEffect {
                beta,
                std_error,
                converged: Some(f.converged),
                iterations: Some(f.iterations),
            })
        }
        // without a covariate the two variance models coincide in closed form
        _ => {
            let x = DesignMatrix::treatment(&trt, baseline)?;
            let f = fit_ols(&x, y)?;
            Ok(TreatmentEffect {
                beta: f.beta_hat[1],
                std_error: f.sandwich_vcov[(1, 1)].max(0.0).sqrt(),
                converged: None,
                iterations: None,
            })
        }
    }
}

/// `θ = β/2 + 1/2`; the treatment-coefficient standard error is carried over
/// unchanged, matching the rank-based variance of the mean win fraction.
pub(crate) fn theta_from_beta(beta: f64) -> f64 {
    beta / 2.0 + 0.5
}
