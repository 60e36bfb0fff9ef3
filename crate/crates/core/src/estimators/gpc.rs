use crate::data::{Arm, TrialData};
use crate::error::{Error, Result};
use crate::panel::WinFractionPanel;
use crate::rank::{score_unchecked, Direction};

use super::{landmark_ancova, theta_from_beta, Analysis, Diagnostics, EstimatorOptions, Method, WinPEstimate};

/// Score of a treatment subject against a control subject at the latest
/// timepoint where both are observed, falling back to baseline. Trajectories
/// are indexed with baseline at 0. A pair with nothing in common scores 0.5
/// and bumps `unresolved`.
pub fn gpc_score_pair(
    y1: &[Option<f64>],
    y0: &[Option<f64>],
    direction: Direction,
    unresolved: &mut usize,
) -> f64 {
    for t in (0..y1.len().min(y0.len())).rev() {
        if let (Some(a), Some(b)) = (y1[t], y0[t]) {
            return score_unchecked(a, b, direction);
        }
    }
    *unresolved += 1;
    0.5
}

/// Carry-forward win fractions at the landmark, one per subject in data order.
/// Every subject is compared with the whole opposing arm.
#[derive(Debug, Clone, PartialEq)]
pub struct GpcFractions {
    pub arms: Vec<Arm>,
    pub fractions: Vec<f64>,
    pub unresolved_pairs: usize,
}

pub fn gpc_win_fractions(data: &TrialData) -> GpcFractions {
    let t = data.n_timepoints();
    let traj: Vec<Vec<Option<f64>>> = data
        .subjects()
        .iter()
        .map(|s| (0..=t).map(|k| s.at(k)).collect())
        .collect();
    let arms: Vec<Arm> = data.subjects().iter().map(|s| s.arm).collect();
    let idx1: Vec<usize> = (0..arms.len()).filter(|&k| arms[k] == Arm::Treatment).collect();
    let idx0: Vec<usize> = (0..arms.len()).filter(|&k| arms[k] == Arm::Control).collect();
    let mut sums = vec![0.0; arms.len()];
    let mut unresolved = 0;
    for &j in &idx1 {
        for &i in &idx0 {
            let h = gpc_score_pair(&traj[j], &traj[i], data.direction(), &mut unresolved);
            sums[j] += h;
            sums[i] += 1.0 - h;
        }
    }
    let fractions = sums
        .iter()
        .zip(&arms)
        .map(|(s, a)| match a {
            Arm::Treatment => s / idx0.len() as f64,
            Arm::Control => s / idx1.len() as f64,
        })
        .collect();
    GpcFractions {
        arms,
        fractions,
        unresolved_pairs: unresolved,
    }
}

/// Landmark win probability from carry-forward pairwise scores, adjusted for
/// the baseline win fraction when the options ask for it.
pub fn gpc_estimate(data: &TrialData, options: &EstimatorOptions) -> Result<Analysis> {
    options.validate()?;
    let g = gpc_win_fractions(data);
    let mut warnings = Vec::new();
    if g.unresolved_pairs > 0 {
        let msg = format!("{} pair(s) had no common observed timepoint and scored 0.5", g.unresolved_pairs);
        log::warn!("{msg}");
        warnings.push(msg);
    }

    let mut keep: Vec<usize> = (0..g.arms.len()).collect();
    let mut baseline = None;
    let mut excluded = 0;
    if options.baseline_covariate {
        let panel = WinFractionPanel::from_trial(data)?;
        let w0 = panel.baseline_fractions();
        keep.retain(|&k| w0[k].is_some());
        excluded = g.arms.len() - keep.len();
        baseline = Some(keep.iter().map(|&k| w0[k].unwrap_or_default()).collect::<Vec<f64>>());
        if excluded > 0 {
            let msg = format!("{excluded} subject(s) with missing baseline excluded from the ANCOVA");
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }
    let arms: Vec<Arm> = keep.iter().map(|&k| g.arms[k]).collect();
    let y: Vec<f64> = keep.iter().map(|&k| g.fractions[k]).collect();
    let mut n = [0usize; 2];
    for a in &arms {
        n[a.index()] += 1;
    }
    if n[0] == 0 || n[1] == 0 {
        let arm = if n[1] == 0 { 1 } else { 0 };
        return Err(Error::EmptyArm {
            arm,
            timepoint: data.n_timepoints(),
        });
    }

    let effect = landmark_ancova(&y, &arms, baseline.as_deref(), options.landmark_variance, &options.fit)?;
    let t = data.n_timepoints();
    let est = WinPEstimate::new(
        Method::Gpc,
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
        method: Method::Gpc,
        estimates: vec![est],
        warnings,
        diagnostics: Diagnostics {
            n_analysed: n,
            excluded_missing_baseline: excluded,
            excluded_no_observations: 0,
            unresolved_pairs: Some(g.unresolved_pairs),
            converged: effect.converged,
            iterations: effect.iterations,
            log_likelihood: None,
        },
    })
}
