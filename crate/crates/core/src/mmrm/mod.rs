//! Multivariate linear model for repeated win fractions with unstructured,
//! arm-specific covariance, fitted by REML (or ML), and linear contrasts of
//! its fixed effects.

mod optim;
pub mod reml;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::data::Arm;
use crate::error::{Error, Result};
use crate::panel::WinFractionPanel;
use optim::{bfgs, Settings};
use reml::{n_cov_params, params_from_covariance, Problem};

/// Mean and covariance structure of the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MmrmSpec {
    pub n_timepoints: usize,
    pub include_baseline_covariate: bool,
    pub group_specific_covariance: bool,
}

impl MmrmSpec {
    pub fn new(n_timepoints: usize) -> Self {
        MmrmSpec {
            n_timepoints,
            include_baseline_covariate: true,
            group_specific_covariance: true,
        }
    }

    pub fn with_baseline_covariate(mut self, on: bool) -> Self {
        self.include_baseline_covariate = on;
        self
    }

    /// Number of fixed effects: `2T`, or `3T` with the baseline covariate.
    pub fn n_coefficients(&self) -> usize {
        if self.include_baseline_covariate {
            3 * self.n_timepoints
        } else {
            2 * self.n_timepoints
        }
    }

    /// Labels in coefficient order: intercepts, treatment effects, baseline slopes.
    pub fn coefficient_labels(&self) -> Vec<String> {
        let t = self.n_timepoints;
        let mut out: Vec<String> = (1..=t).map(|k| format!("intercept:{k}")).collect();
        out.extend((1..=t).map(|k| format!("treatment:{k}")));
        if self.include_baseline_covariate {
            out.extend((1..=t).map(|k| format!("baseline:{k}")));
        }
        out
    }

    fn validate(&self) -> Result<()> {
        if self.n_timepoints == 0 {
            return Err(Error::Config("model needs at least one timepoint".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimation {
    #[default]
    Reml,
    Ml,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Relative change in the objective below which iteration stops.
    pub tol: f64,
    pub estimation: Estimation,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            max_iter: 200,
            tol: 1e-9,
            estimation: Estimation::Reml,
        }
    }
}

/// Rows of one subject's design: only observed timepoints are kept.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectDesign {
    /// Index of the subject in the source panel.
    pub subject: usize,
    pub arm: Arm,
    /// Zero-based post-baseline timepoints that are observed, ascending.
    pub observed: Vec<usize>,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
}

/// Per-subject designs plus the subjects dropped while building them.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelDesign {
    pub spec: MmrmSpec,
    pub subjects: Vec<SubjectDesign>,
    pub excluded_no_observations: Vec<usize>,
    pub excluded_missing_baseline: Vec<usize>,
}

/// Expands `[1, G, W0] ⊗ I_T` for every usable subject and deletes the rows
/// of unobserved timepoints.
pub fn build_design(panel: &WinFractionPanel, spec: MmrmSpec) -> Result<ModelDesign> {
    spec.validate()?;
    let t_max = spec.n_timepoints;
    if t_max > panel.n_timepoints() {
        return Err(Error::Config(format!(
            "model has {t_max} timepoints, data has {}",
            panel.n_timepoints()
        )));
    }
    let p = spec.n_coefficients();
    let mut subjects = Vec::new();
    let mut no_obs = Vec::new();
    let mut no_base = Vec::new();
    for k in 0..panel.n_subjects() {
        let observed: Vec<usize> = (0..t_max).filter(|&t| panel.at(k, t + 1).is_some()).collect();
        if observed.is_empty() {
            no_obs.push(k);
            continue;
        }
        let w0 = panel.at(k, 0);
        if spec.include_baseline_covariate && w0.is_none() {
            no_base.push(k);
            continue;
        }
        let arm = panel.arms()[k];
        let mut x = DMatrix::zeros(observed.len(), p);
        let mut y = DVector::zeros(observed.len());
        for (row, &t) in observed.iter().enumerate() {
            x[(row, t)] = 1.0;
            x[(row, t_max + t)] = arm.indicator();
            if let (true, Some(w0)) = (spec.include_baseline_covariate, w0) {
                x[(row, 2 * t_max + t)] = w0;
            }
            y[row] = panel.at(k, t + 1).unwrap_or_default();
        }
        subjects.push(SubjectDesign {
            subject: k,
            arm,
            observed,
            x,
            y,
        });
    }
    if !no_obs.is_empty() {
        log::warn!("{} subject(s) with no post-baseline observations excluded", no_obs.len());
    }
    if !no_base.is_empty() {
        log::warn!("{} subject(s) with missing baseline excluded", no_base.len());
    }
    Ok(ModelDesign {
        spec,
        subjects,
        excluded_no_observations: no_obs,
        excluded_missing_baseline: no_base,
    })
}

/// A fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmrmFit {
    pub spec: MmrmSpec,
    pub beta_hat: Vec<f64>,
    pub coefficient_labels: Vec<String>,
    /// `[Σ_0, Σ_1]`, each stored row-major; equal when the covariance is shared.
    pub sigma_hat: [Vec<f64>; 2],
    /// `(Xᵀ V⁻¹ X)⁻¹`, row-major.
    pub beta_vcov: Vec<f64>,
    pub log_likelihood: f64,
    pub estimation: Estimation,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after every accepted optimiser step, starting point first.
    pub loglik_trace: Vec<f64>,
    pub n_subjects: [usize; 2],
    pub n_observations: usize,
}

impl MmrmFit {
    pub fn n_coefficients(&self) -> usize {
        self.beta_hat.len()
    }

    pub fn sigma(&self, arm: Arm) -> DMatrix<f64> {
        let t = self.spec.n_timepoints;
        DMatrix::from_row_slice(t, t, &self.sigma_hat[arm.index()])
    }

    pub fn vcov(&self) -> DMatrix<f64> {
        let p = self.n_coefficients();
        DMatrix::from_row_slice(p, p, &self.beta_vcov)
    }
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

fn pairwise_covariance(subjects: &[&SubjectDesign], t: usize) -> DMatrix<f64> {
    let mut full = vec![vec![None; t]; subjects.len()];
    for (i, s) in subjects.iter().enumerate() {
        for (row, &tt) in s.observed.iter().enumerate() {
            full[i][tt] = Some(s.y[row]);
        }
    }
    let mut c = DMatrix::zeros(t, t);
    for a in 0..t {
        for b in 0..=a {
            let pairs: Vec<(f64, f64)> = full
                .iter()
                .filter_map(|r| Some((r[a]?, r[b]?)))
                .collect();
            let v = if pairs.len() < 2 {
                if a == b {
                    1.0 / 12.0
                } else {
                    0.0
                }
            } else {
                let n = pairs.len() as f64;
                let ma = pairs.iter().map(|p| p.0).sum::<f64>() / n;
                let mb = pairs.iter().map(|p| p.1).sum::<f64>() / n;
                pairs.iter().map(|p| (p.0 - ma) * (p.1 - mb)).sum::<f64>() / (n - 1.0)
            };
            c[(a, b)] = v;
            c[(b, a)] = v;
        }
    }
    c
}

/// Raises every eigenvalue to at least `1e-6 · trace / T`.
fn clamp_spectrum(c: DMatrix<f64>) -> DMatrix<f64> {
    let t = c.nrows();
    let floor = (1e-6 * c.trace() / t as f64).max(1e-10);
    let eig = SymmetricEigen::new(c);
    let vals = eig.eigenvalues.map(|v| v.max(floor));
    let m = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
    (&m + m.transpose()) * 0.5
}

fn canonical_order(a: &SubjectDesign, b: &SubjectDesign) -> std::cmp::Ordering {
    let key = |s: &SubjectDesign| {
        let mut k: Vec<u64> = vec![s.arm.index() as u64, s.observed.len() as u64];
        k.extend(s.observed.iter().map(|&v| v as u64));
        k.extend(s.y.iter().map(|v| v.to_bits()));
        k.extend(s.x.iter().map(|v| v.to_bits()));
        k
    };
    key(a).cmp(&key(b))
}

/// Fits the model by maximising the (restricted) likelihood over the
/// log-Cholesky factors of the covariance blocks, with `β` profiled out by GLS.
/// Running out of iterations yields a fit with `converged == false`.
pub fn fit_reml(design: &ModelDesign, options: &FitOptions) -> Result<MmrmFit> {
    let spec = design.spec;
    spec.validate()?;
    let t = spec.n_timepoints;
    let p = spec.n_coefficients();
    if let Some(s) = design.subjects.iter().find(|s| s.x.ncols() != p) {
        return Err(Error::Config(format!(
            "subject {} has {} design columns, model has {p}",
            s.subject,
            s.x.ncols()
        )));
    }
    let mut n_subjects = [0usize; 2];
    for s in &design.subjects {
        n_subjects[s.arm.index()] += 1;
    }
    if n_subjects.iter().any(|&n| n < 2) {
        return Err(Error::InsufficientData(format!(
            "need at least 2 subjects per arm, have {} and {}",
            n_subjects[0], n_subjects[1]
        )));
    }

    let mut ordered: Vec<&SubjectDesign> = design.subjects.iter().collect();
    ordered.sort_by(|a, b| canonical_order(a, b));

    // pooled design must have full column rank
    let mut xtx = DMatrix::<f64>::zeros(p, p);
    for s in &ordered {
        xtx += s.x.transpose() * &s.x;
    }
    crate::ols::gram_inverse(&xtx)?;

    let n_obs: usize = ordered.iter().map(|s| s.observed.len()).sum();
    if n_obs <= p {
        return Err(Error::InsufficientData(format!(
            "{n_obs} observations for {p} coefficients"
        )));
    }

    let blocks: Vec<Vec<&SubjectDesign>> = if spec.group_specific_covariance {
        [Arm::Control, Arm::Treatment]
            .iter()
            .map(|&a| ordered.iter().copied().filter(|s| s.arm == a).collect())
            .collect()
    } else {
        vec![ordered.clone()]
    };
    let mut x0 = Vec::with_capacity(blocks.len() * n_cov_params(t));
    for b in &blocks {
        let c = clamp_spectrum(pairwise_covariance(b, t));
        let params = params_from_covariance(&c)
            .ok_or_else(|| Error::NumericalFailure("starting covariance is not positive definite".into()))?;
        x0.extend(params);
    }

    let problem = Problem::new(ordered, t, p, spec.group_specific_covariance, options.estimation);
    let settings = Settings {
        max_iter: options.max_iter,
        rel_tol: options.tol,
        step_tol: 1e-8,
        grad_tol: 1e-8,
        max_step: 2.0,
    };
    let objective = |x: &[f64]| {
        let e = problem.evaluate(x, true)?;
        Some((-e.loglik, e.gradient.iter().map(|g| -g).collect()))
    };
    let min = bfgs(objective, x0, settings)
        .ok_or_else(|| Error::NumericalFailure("likelihood is not finite at the starting values".into()))?;
    let eval = problem
        .evaluate(&min.x, false)
        .ok_or_else(|| Error::NumericalFailure("likelihood is not finite at the optimum".into()))?;
    if !min.converged {
        log::warn!("covariance optimisation stopped after {} iterations without converging", min.iterations);
    }

    let sig = problem.covariances(&min.x);
    let sigma_hat = if sig.len() == 2 {
        [row_major(&sig[0]), row_major(&sig[1])]
    } else {
        [row_major(&sig[0]), row_major(&sig[0])]
    };
    let vcov = (&eval.a_inv + eval.a_inv.transpose()) * 0.5;

    Ok(MmrmFit {
        spec,
        beta_hat: eval.beta.iter().copied().collect(),
        coefficient_labels: spec.coefficient_labels(),
        sigma_hat,
        beta_vcov: row_major(&vcov),
        log_likelihood: eval.loglik,
        estimation: options.estimation,
        iterations: min.iterations,
        converged: min.converged,
        loglik_trace: min.trace.iter().map(|f| -f).collect(),
        n_subjects,
        n_observations: n_obs,
    })
}

/// Linear combination `cᵀβ` of the fixed effects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contrast {
    coefficients: Vec<f64>,
    label: String,
}

impl Contrast {
    pub fn new(coefficients: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain("contrast coefficients must be finite".into()));
        }
        if coefficients.iter().all(|&c| c == 0.0) {
            return Err(Error::Domain("contrast has no nonzero coefficient".into()));
        }
        Ok(Contrast {
            coefficients,
            label: label.into(),
        })
    }

    /// Treatment difference at post-baseline timepoint `t` (1-based). The
    /// baseline slope is shared by both arms and drops out.
    pub fn treatment_at(spec: &MmrmSpec, t: usize) -> Result<Self> {
        if t == 0 || t > spec.n_timepoints {
            return Err(Error::Domain(format!(
                "timepoint {t} outside 1..={}",
                spec.n_timepoints
            )));
        }
        let mut c = vec![0.0; spec.n_coefficients()];
        c[spec.n_timepoints + t - 1] = 1.0;
        Contrast::new(c, format!("treatment:{t}"))
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

/// Returns `(cᵀβ̂, sqrt(cᵀ V c))`.
pub fn estimate_contrast(fit: &MmrmFit, contrast: &Contrast) -> Result<(f64, f64)> {
    let p = fit.n_coefficients();
    let c = contrast.coefficients();
    if c.len() != p {
        return Err(Error::ContrastShape {
            expected: p,
            got: c.len(),
        });
    }
    let est = c.iter().zip(&fit.beta_hat).map(|(a, b)| a * b).sum();
    let cv = DVector::from_column_slice(c);
    let var = (cv.transpose() * fit.vcov() * &cv)[(0, 0)];
    Ok((est, var.max(0.0).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Subject, TrialData};
    use crate::rank::Direction;

    fn small_trial() -> TrialData {
        let rows: Vec<(u8, f64, [Option<f64>; 3])> = vec![
            (0, 3.0, [Some(4.0), Some(2.0), Some(5.0)]),
            (0, 1.0, [Some(2.0), None, Some(1.0)]),
            (0, 2.0, [Some(7.0), Some(6.0), None]),
            (0, 5.0, [Some(1.0), Some(3.0), Some(2.0)]),
            (1, 4.0, [Some(6.0), Some(8.0), Some(9.0)]),
            (1, 2.5, [Some(3.0), Some(5.0), Some(4.0)]),
            (1, 1.5, [Some(5.0), None, Some(7.0)]),
            (1, 6.0, [Some(8.0), Some(7.0), Some(6.0)]),
            (1, 0.5, [None, Some(1.0), Some(3.0)]),
        ];
        let subjects = rows
            .into_iter()
            .enumerate()
            .map(|(i, (a, b, o))| Subject {
                id: format!("s{i}"),
                arm: Arm::from_code(a).unwrap(),
                baseline: Some(b),
                outcomes: o.to_vec(),
            })
            .collect();
        TrialData::new(subjects, Direction::Higher, "y0", vec!["y1".into(), "y2".into(), "y3".into()]).unwrap()
    }

    #[test]
    fn kronecker_rows_for_complete_and_gappy_subjects() {
        let panel = WinFractionPanel::from_trial(&small_trial()).unwrap();
        let d = build_design(&panel, MmrmSpec::new(3)).unwrap();
        let s = &d.subjects[4];
        assert_eq!(s.x.shape(), (3, 9));
        let w0 = panel.at(4, 0).unwrap();
        for r in 0..3 {
            assert_eq!(s.x[(r, r)], 1.0);
            assert_eq!(s.x[(r, 3 + r)], 1.0);
            assert_eq!(s.x[(r, 6 + r)], w0);
            assert_eq!(s.x.row(r).iter().filter(|v| **v != 0.0).count(), 3);
        }
        let gappy = &d.subjects[1];
        assert_eq!(gappy.observed, vec![0, 2]);
        assert_eq!(gappy.x.shape(), (2, 9));
        assert_eq!(gappy.x[(1, 2)], 1.0);

        let no_cov = build_design(&panel, MmrmSpec::new(3).with_baseline_covariate(false)).unwrap();
        assert_eq!(no_cov.subjects[0].x.ncols(), 6);
    }

    #[test]
    fn contrast_selects_coefficient() {
        let panel = WinFractionPanel::from_trial(&small_trial()).unwrap();
        let d = build_design(&panel, MmrmSpec::new(3)).unwrap();
        let fit = fit_reml(&d, &FitOptions::default()).unwrap();
        let mut c = vec![0.0; 9];
        c[4] = 1.0;
        let (e, se) = estimate_contrast(&fit, &Contrast::new(c, "x").unwrap()).unwrap();
        assert_eq!(e, fit.beta_hat[4]);
        assert!((se - fit.beta_vcov[4 * 9 + 4].sqrt()).abs() < 1e-15);
        let bad = Contrast::new(vec![1.0; 3], "short").unwrap();
        assert!(matches!(
            estimate_contrast(&fit, &bad),
            Err(Error::ContrastShape { expected: 9, got: 3 })
        ));
    }

    #[test]
    fn contrast_rejects_zero_and_nan() {
        assert!(Contrast::new(vec![0.0, 0.0], "z").is_err());
        assert!(Contrast::new(vec![f64::NAN, 1.0], "n").is_err());
    }

    #[test]
    fn loglik_trace_is_monotone_and_sigma_pd() {
        let panel = WinFractionPanel::from_trial(&small_trial()).unwrap();
        let d = build_design(&panel, MmrmSpec::new(3)).unwrap();
        let fit = fit_reml(&d, &FitOptions::default()).unwrap();
        assert!(fit.loglik_trace.windows(2).all(|w| w[1] >= w[0]));
        for arm in [Arm::Control, Arm::Treatment] {
            let s = fit.sigma(arm);
            assert!(SymmetricEigen::new(s).eigenvalues.min() > 0.0);
        }
        assert!(fit.vcov().cholesky().is_some());
    }

    #[test]
    fn single_timepoint_reduces_to_group_variances() {
        let panel = WinFractionPanel::from_trial(&small_trial()).unwrap();
        let spec = MmrmSpec::new(1).with_baseline_covariate(false);
        let d = build_design(&panel, spec).unwrap();
        let opts = FitOptions {
            max_iter: 500,
            tol: 1e-14,
            ..Default::default()
        };
        let fit = fit_reml(&d, &opts).unwrap();
        for arm in [Arm::Control, Arm::Treatment] {
            let w: Vec<f64> = d
                .subjects
                .iter()
                .filter(|s| s.arm == arm)
                .map(|s| s.y[0])
                .collect();
            let n = w.len() as f64;
            let m = w.iter().sum::<f64>() / n;
            let var = w.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
            assert!((fit.sigma(arm)[(0, 0)] - var).abs() < 1e-6 * var.max(1e-3));
        }
    }

    #[test]
    fn too_few_subjects_is_an_error() {
        let panel = WinFractionPanel::from_trial(&small_trial()).unwrap();
        let mut d = build_design(&panel, MmrmSpec::new(3)).unwrap();
        d.subjects.retain(|s| s.arm == Arm::Treatment || s.subject == 0);
        assert!(matches!(fit_reml(&d, &FitOptions::default()), Err(Error::InsufficientData(_))));
    }
}
