use crate::data::{Arm, TrialData};
use crate::error::{Error, Result};
use crate::panel::WinFractionPanel;

use super::{landmark_ancova, theta_from_beta, Analysis, Diagnostics, EstimatorOptions, Method, WinPEstimate};

/// Landmark ANCOVA restricted to subjects observed at the landmark. Landmark
/// win fractions are ranked among those subjects only; the baseline covariate
/// is the baseline win fraction ranked over everyone with a baseline value.
pub fn cca_estimate(data: &TrialData, options: &EstimatorOptions) -> Result<Analysis> {
    options.validate()?;
    let t = data.n_timepoints();
    let observed = data.observed_counts(t);
    if observed[0] < 2 || observed[1] < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 subjects per arm at the landmark, have {} and {}",
            observed[0], observed[1]
        )));
    }
    let panel = WinFractionPanel::from_trial(data)?;
    let mut warnings = Vec::new();
    let mut arms = Vec::new();
    let mut y = Vec::new();
    let mut w0 = Vec::new();
    let mut excluded = 0;
    for k in 0..panel.n_subjects() {
        let Some(w) = panel.at(k, t) else { continue };
        if options.baseline_covariate {
            match panel.at(k, 0) {
                Some(b) => w0.push(b),
                None => {
                    excluded += 1;
                    continue;
                }
            }
        }
        arms.push(panel.arms()[k]);
        y.push(w);
    }
    if excluded > 0 {
        let msg = format!("{excluded} subject(s) with missing baseline excluded from the ANCOVA");
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let n = [
        arms.iter().filter(|a| **a == Arm::Control).count(),
        arms.iter().filter(|a| **a == Arm::Treatment).count(),
    ];
    if n[0] < 2 || n[1] < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 subjects per arm in the ANCOVA, have {} and {}",
            n[0], n[1]
        )));
    }

    let baseline = options.baseline_covariate.then_some(w0.as_slice());
    let effect = landmark_ancova(&y, &arms, baseline, options.landmark_variance, &options.fit)?;
    let est = WinPEstimate::new(
        Method::Cca,
        t,
        data.timepoint_labels()[t - 1].clone(),
        theta_from_beta(effect.beta),
        effect.std_error,
        options.alpha,
    )?;
    if est.is_degenerate() {
        warnings.push(format!(
            "estimate {} with standard error {} is degenerate; report the raw estimate only",
            est.theta_hat, est.std_error
        ));
    }
    Ok(Analysis {
        method: Method::Cca,
        estimates: vec![est],
        warnings,
        diagnostics: Diagnostics {
            n_analysed: n,
            excluded_missing_baseline: excluded,
            excluded_no_observations: data.len() - observed[0] - observed[1],
            unresolved_pairs: None,
            converged: effect.converged,
            iterations: effect.iterations,
            log_likelihood: None,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Subject;
    use crate::rank::Direction;

    fn trial(rows: &[(u8, f64, Option<f64>)]) -> TrialData {
        let subjects = rows
            .iter()
            .enumerate()
            .map(|(i, &(a, b, y))| Subject {
                id: i.to_string(),
                arm: Arm::from_code(a).unwrap(),
                baseline: Some(b),
                outcomes: vec![y],
            })
            .collect();
        TrialData::new(subjects, Direction::Higher, "y0", vec!["y1".into()]).unwrap()
    }

    #[test]
    fn separation_is_degenerate() {
        let d = trial(&[
            (1, 1.0, Some(10.0)),
            (1, 2.0, Some(11.0)),
            (1, 3.0, None),
            (0, 1.0, Some(1.0)),
            (0, 2.0, Some(2.0)),
            (0, 2.0, Some(3.0)),
        ]);
        let a = cca_estimate(&d, &EstimatorOptions::default().with_baseline_covariate(false)).unwrap();
        assert_eq!(a.landmark().theta_hat, 1.0);
        assert!(a.landmark().is_degenerate());
        assert_eq!(a.diagnostics.n_analysed, [3, 2]);
    }

    #[test]
    fn too_few_at_landmark() {
        let d = trial(&[(1, 1.0, Some(10.0)), (1, 2.0, None), (0, 1.0, Some(1.0)), (0, 2.0, Some(2.0))]);
        assert!(matches!(
            cca_estimate(&d, &EstimatorOptions::default()),
            Err(Error::InsufficientData(_))
        ));
    }
}
