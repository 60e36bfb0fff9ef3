use crate::data::TrialData;
use crate::error::Result;
use crate::mmrm::{build_design, estimate_contrast, fit_reml, Contrast, MmrmFit, MmrmSpec};
use crate::panel::WinFractionPanel;

use super::{theta_from_beta, Analysis, Diagnostics, EstimatorOptions, Method, WinPEstimate};

/// Repeated-measures model on per-timepoint win fractions; one estimate per
/// post-baseline timepoint, the last being the landmark. Also returns the fit.
pub fn mmrm_estimate(data: &TrialData, options: &EstimatorOptions) -> Result<(Analysis, MmrmFit)> {
    options.validate()?;
    let panel = WinFractionPanel::from_trial(data)?;
    let spec = MmrmSpec::new(data.n_timepoints()).with_baseline_covariate(options.baseline_covariate);
    let design = build_design(&panel, spec)?;
    let mut warnings = Vec::new();
    if !design.excluded_no_observations.is_empty() {
        warnings.push(format!(
            "{} subject(s) with no post-baseline observations excluded",
            design.excluded_no_observations.len()
        ));
    }
    if !design.excluded_missing_baseline.is_empty() {
        warnings.push(format!(
            "{} subject(s) with missing baseline excluded",
            design.excluded_missing_baseline.len()
        ));
    }
    let fit = fit_reml(&design, &options.fit)?;
    if !fit.converged {
        warnings.push(format!(
            "covariance optimisation did not converge in {} iterations",
            fit.iterations
        ));
    }
    let mut estimates = Vec::with_capacity(spec.n_timepoints);
    for t in 1..=spec.n_timepoints {
        let (beta, se) = estimate_contrast(&fit, &Contrast::treatment_at(&spec, t)?)?;
        let est = WinPEstimate::new(
            Method::Mmrm,
            t,
            data.timepoint_labels()[t - 1].clone(),
            theta_from_beta(beta),
            se,
            options.alpha,
        )?;
        if est.is_degenerate() {
            warnings.push(format!(
                "{}: estimate {} with standard error {} is degenerate; report the raw estimate only",
                est.label, est.theta_hat, est.std_error
            ));
        }
        estimates.push(est);
    }
    let analysis = Analysis {
        method: Method::Mmrm,
        estimates,
        warnings,
        diagnostics: Diagnostics {
            n_analysed: fit.n_subjects,
            excluded_missing_baseline: design.excluded_missing_baseline.len(),
            excluded_no_observations: design.excluded_no_observations.len(),
            unresolved_pairs: None,
            converged: Some(fit.converged),
            iterations: Some(fit.iterations),
            log_likelihood: Some(fit.log_likelihood),
        },
    };
    Ok((analysis, fit))
}
