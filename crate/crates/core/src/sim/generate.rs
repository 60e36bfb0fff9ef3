use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::{Arm, Subject, TrialData};
use crate::error::{Error, Result};
use crate::rank::Direction;

use super::scenario::{DropoutCase, Mechanism, Scenario, OCCASIONS};

/// Multivariate normal sampler `m + L z`.
#[derive(Debug, Clone)]
pub struct MvNormal {
    mean: DVector<f64>,
    chol: DMatrix<f64>,
}

impl MvNormal {
    pub fn new(mean: DVector<f64>, sigma: DMatrix<f64>) -> Result<Self> {
        if sigma.nrows() != mean.len() || sigma.ncols() != mean.len() {
            return Err(Error::Config("mean and covariance dimensions differ".into()));
        }
        let chol = sigma
            .cholesky()
            .ok_or_else(|| Error::Config("covariance matrix is not positive definite".into()))?
            .l();
        if chol.diagonal().iter().any(|d| !(*d > 1e-12)) {
            return Err(Error::Config("covariance matrix is degenerate".into()));
        }
        Ok(MvNormal { mean, chol })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let z = DVector::from_fn(self.mean.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.mean + &self.chol * z
    }
}

fn labels() -> Vec<String> {
    (1..OCCASIONS).map(|t| format!("t{t}")).collect()
}

/// Complete trial: control subjects first, then treatment, lower scores better.
pub fn generate_complete<R: Rng + ?Sized>(scenario: &Scenario, rng: &mut R) -> Result<TrialData> {
    let mut subjects = Vec::with_capacity(scenario.n[0] + scenario.n[1]);
    for (a, arm) in [Arm::Control, Arm::Treatment].into_iter().enumerate() {
        let dist = MvNormal::new(scenario.mean_vector(a), scenario.sigma(a))?;
        for j in 0..scenario.n[a] {
            let y = dist.sample(rng);
            subjects.push(Subject {
                id: format!("{a}-{j}"),
                arm,
                baseline: Some(y[0]),
                outcomes: (1..OCCASIONS).map(|t| Some(y[t])).collect(),
            });
        }
    }
    TrialData::new(subjects, Direction::Lower, "t0", labels())
}

fn rebuild(data: &TrialData, subjects: Vec<Subject>) -> Result<TrialData> {
    TrialData::new(
        subjects,
        data.direction(),
        data.baseline_label(),
        data.timepoint_labels().to_vec(),
    )
}

/// `round(n / 10)`, halves rounded up.
pub fn mcar_stage_size(n: usize) -> usize {
    (n + 5) / 10
}

/// Monotone MCAR dropout: per arm, three disjoint random groups of
/// `round(0.1 n)` subjects lose every visit from the first, second and third
/// follow-up onwards respectively.
pub fn apply_mcar<R: Rng + ?Sized>(data: &TrialData, rng: &mut R) -> Result<TrialData> {
    let t_max = data.n_timepoints();
    let mut subjects = data.subjects().to_vec();
    for arm in [Arm::Control, Arm::Treatment] {
        let members: Vec<usize> = (0..subjects.len()).filter(|&k| subjects[k].arm == arm).collect();
        let n = members.len();
        if n < 10 {
            return Err(Error::Config(format!(
                "MCAR stages need at least 10 subjects per arm, arm {} has {n}",
                arm.index()
            )));
        }
        let stage = mcar_stage_size(n);
        let chosen = sample(rng, n, stage * t_max.min(3));
        for (pos, idx) in chosen.into_iter().enumerate() {
            let from = pos / stage;
            for t in from..t_max {
                subjects[members[idx]].outcomes[t] = None;
            }
        }
    }
    rebuild(data, subjects)
}

/// Trigger-based dropout. Visits are scanned in order; the first visit whose
/// score exceeds the arm's trigger and whose Bernoulli draw succeeds ends
/// follow-up. MAR keeps that visit, MNAR deletes it too. One uniform is drawn
/// for every follow-up visit of every subject regardless of the outcome, so
/// MAR and MNAR deletions from the same stream are nested.
pub fn apply_mar_mnar<R: Rng + ?Sized>(
    data: &TrialData,
    case: &DropoutCase,
    mechanism: Mechanism,
    rng: &mut R,
) -> Result<TrialData> {
    let keep_trigger = match mechanism {
        Mechanism::Mar => true,
        Mechanism::Mnar => false,
        other => {
            return Err(Error::Config(format!(
                "trigger dropout needs mar or mnar, got {}",
                other.name()
            )))
        }
    };
    let t_max = data.n_timepoints();
    let mut subjects = data.subjects().to_vec();
    for s in subjects.iter_mut() {
        let a = s.arm.index();
        let draws: Vec<f64> = (0..t_max).map(|_| rng.random::<f64>()).collect();
        let fired = (0..t_max).find(|&t| {
            s.outcomes[t].is_some_and(|y| y > case.trigger[a]) && draws[t] < case.p_drop[a]
        });
        if let Some(t) = fired {
            let first_deleted = if keep_trigger { t + 1 } else { t };
            for v in s.outcomes.iter_mut().skip(first_deleted) {
                *v = None;
            }
        }
    }
    rebuild(data, subjects)
}

/// Applies the scenario's missingness mechanism.
pub fn apply_mechanism<R: Rng + ?Sized>(scenario: &Scenario, data: &TrialData, rng: &mut R) -> Result<TrialData> {
    match scenario.mechanism {
        Mechanism::None => Ok(data.clone()),
        Mechanism::Mcar => apply_mcar(data, rng),
        Mechanism::Mar | Mechanism::Mnar => {
            let case = scenario
                .dropout_case()
                .ok_or_else(|| Error::Config("missing trigger combination".into()))?;
            apply_mar_mnar(data, &case, scenario.mechanism, rng)
        }
    }
}

/// True when every subject's observed follow-up visits form a prefix.
pub fn is_monotone(data: &TrialData) -> bool {
    data.subjects().iter().all(|s| {
        let first_gap = s.outcomes.iter().position(Option::is_none).unwrap_or(s.outcomes.len());
        s.outcomes[first_gap..].iter().all(Option::is_none)
    })
}

/// Percentage of each arm missing at the landmark `[control, treatment]`.
pub fn landmark_dropout_pct(data: &TrialData) -> [f64; 2] {
    let obs = data.observed_counts(data.n_timepoints());
    let n = data.arm_sizes();
    [0, 1].map(|a| 100.0 * (n[a] - obs[a]) as f64 / n[a] as f64)
}
