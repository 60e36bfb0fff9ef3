//! Deuchler scoring, midranks and timepoint-specific win fractions.
//!
//! A win fraction is the share of opposing-arm observations that a subject
//! beats at one timepoint, ties counted as one half. It is computed from the
//! difference between the overall midrank and the within-arm midrank, which
//! keeps the cost at `O(n log n)` per timepoint instead of `O(n1 * n0)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which end of the outcome scale counts as a win.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    #[serde(alias = "higher_wins")]
    Higher,
    #[serde(alias = "lower_wins")]
    Lower,
}

impl Direction {
    pub fn flipped(self) -> Self {
        match self {
            Direction::Higher => Direction::Lower,
            Direction::Lower => Direction::Higher,
        }
    }

    /// Orders `a` before `b` when `a` loses to `b`.
    fn cmp(self, a: f64, b: f64) -> std::cmp::Ordering {
        match self {
            Direction::Higher => a.total_cmp(&b),
            Direction::Lower => b.total_cmp(&a),
        }
    }
}

/// Score of `a` against `b`: 1 for a win, 0.5 for a tie, 0 for a loss.
pub fn deuchler_score(a: f64, b: f64, direction: Direction) -> Result<f64> {
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::Domain(format!(
            "cannot score non-finite values ({a}, {b})"
        )));
    }
    Ok(score_unchecked(a, b, direction))
}

#[inline]
pub(crate) fn score_unchecked(a: f64, b: f64, direction: Direction) -> f64 {
    let s = if a > b {
        1.0
    } else if a < b {
        0.0
    } else {
        0.5
    };
    match direction {
        Direction::Higher => s,
        Direction::Lower => 1.0 - s,
    }
}

/// Midranks under `direction`: the best observation gets the largest rank and
/// tied observations share the mean of the ranks they span.
pub fn midranks(values: &[f64], direction: Direction) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::Domain("midranks of an empty sample".into()));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("non-finite value {v} in sample")));
    }
    Ok(midranks_unchecked(values, direction))
}

fn midranks_unchecked(values: &[f64], direction: Direction) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| direction.cmp(values[i], values[j]));
    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold integer ranks start+1..=end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = rank;
        }
        start = end;
    }
    ranks
}

/// Observed scores of one arm at one timepoint.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeColumn {
    subjects: Vec<usize>,
    values: Vec<f64>,
    direction: Direction,
}

impl OutcomeColumn {
    /// Builds a column from `(subject index, score)` pairs.
    pub fn new(entries: Vec<(usize, f64)>, direction: Direction) -> Result<Self> {
        let mut seen = std::collections::HashSet::with_capacity(entries.len());
        for &(s, v) in &entries {
            if !v.is_finite() {
                return Err(Error::Domain(format!(
                    "subject {s} has non-finite score {v}"
                )));
            }
            if !seen.insert(s) {
                return Err(Error::Domain(format!("subject {s} appears twice")));
            }
        }
        let (subjects, values) = entries.into_iter().unzip();
        Ok(OutcomeColumn {
            subjects,
            values,
            direction,
        })
    }

    /// Column whose subject indices are simply `0..values.len()`.
    pub fn from_values(values: &[f64], direction: Direction) -> Result<Self> {
        Self::new(values.iter().copied().enumerate().collect(), direction)
    }

    pub fn subjects(&self) -> &[usize] {
        &self.subjects
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Win fractions of both arms at one timepoint, in column order.
pub fn win_fractions_at_timepoint(
    arm1: &OutcomeColumn,
    arm0: &OutcomeColumn,
) -> Result<(Vec<f64>, Vec<f64>)> {
    win_fractions_at(arm1, arm0, 0)
}

pub(crate) fn win_fractions_at(
    arm1: &OutcomeColumn,
    arm0: &OutcomeColumn,
    timepoint: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if arm1.direction != arm0.direction {
        return Err(Error::Domain(
            "both arms must be ranked in the same direction".into(),
        ));
    }
    if arm1.is_empty() {
        return Err(Error::EmptyArm { arm: 1, timepoint });
    }
    if arm0.is_empty() {
        return Err(Error::EmptyArm { arm: 0, timepoint });
    }
    Ok(win_fractions_raw(&arm1.values, &arm0.values, arm1.direction))
}

/// Core of the rank identity `W = (overall midrank - within-arm midrank) / n_opposing`.
pub(crate) fn win_fractions_raw(
    arm1: &[f64],
    arm0: &[f64],
    direction: Direction,
) -> (Vec<f64>, Vec<f64>) {
    let n1 = arm1.len();
    let n0 = arm0.len();
    let pooled: Vec<f64> = arm1.iter().chain(arm0).copied().collect();
    let overall = midranks_unchecked(&pooled, direction);
    let within1 = midranks_unchecked(arm1, direction);
    let within0 = midranks_unchecked(arm0, direction);
    let w1 = (0..n1)
        .map(|j| (overall[j] - within1[j]) / n0 as f64)
        .collect();
    let w0 = (0..n0)
        .map(|j| (overall[n1 + j] - within0[j]) / n1 as f64)
        .collect();
    (w1, w0)
}

/// Single-timepoint win probability with its rank-based variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaEstimate {
    pub theta_hat: f64,
    pub variance: f64,
    pub n1: usize,
    pub n0: usize,
}

/// Closed-form estimator: mean arm-1 win fraction, variance
/// `sum(e1^2)/(n1(n1-1)) + sum(e0^2)/(n0(n0-1))`.
pub fn theta_single(arm1: &OutcomeColumn, arm0: &OutcomeColumn) -> Result<ThetaEstimate> {
    let (n1, n0) = (arm1.len(), arm0.len());
    if n1 < 2 || n0 < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 observations per arm, have n1 = {n1}, n0 = {n0}"
        )));
    }
    let (w1, w0) = win_fractions_at_timepoint(arm1, arm0)?;
    let (m1, ss1) = mean_and_ss(&w1);
    let (_, ss0) = mean_and_ss(&w0);
    let variance = ss1 / (n1 * (n1 - 1)) as f64 + ss0 / (n0 * (n0 - 1)) as f64;
    Ok(ThetaEstimate {
        theta_hat: m1,
        variance,
        n1,
        n0,
    })
}

pub(crate) fn mean_and_ss(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let ss = x.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, ss)
}
