//! Trial data in wide layout: one row per subject, baseline plus post-baseline visits.

mod csv;
mod epds;

pub use self::csv::{read_wide_csv, read_wide_csv_from, write_wide_csv, CsvOptions};
pub use self::epds::{embedded_epds, EPDS_LISTING};

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rank::Direction;

/// Randomised arm; `Control` is coded 0 and `Treatment` 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Arm {
    Control,
    Treatment,
}

impl Arm {
    pub fn index(self) -> usize {
        match self {
            Arm::Control => 0,
            Arm::Treatment => 1,
        }
    }

    pub fn indicator(self) -> f64 {
        self.index() as f64
    }

    pub fn from_code(code: u8) -> Option<Arm> {
        match code {
            0 => Some(Arm::Control),
            1 => Some(Arm::Treatment),
            _ => None,
        }
    }

    pub fn swapped(self) -> Arm {
        match self {
            Arm::Control => Arm::Treatment,
            Arm::Treatment => Arm::Control,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subject {
    pub id: String,
    pub arm: Arm,
    pub baseline: Option<f64>,
    pub outcomes: Vec<Option<f64>>,
}

impl Subject {
    /// Value at `t`, where 0 is baseline and `1..=T` are the post-baseline visits.
    pub fn at(&self, t: usize) -> Option<f64> {
        if t == 0 {
            self.baseline
        } else {
            self.outcomes.get(t - 1).copied().flatten()
        }
    }

    pub fn is_observed(&self, t: usize) -> bool {
        self.at(t).is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialData {
    subjects: Vec<Subject>,
    direction: Direction,
    baseline_label: String,
    timepoint_labels: Vec<String>,
}

impl TrialData {
    pub fn new(
        subjects: Vec<Subject>,
        direction: Direction,
        baseline_label: impl Into<String>,
        timepoint_labels: Vec<String>,
    ) -> Result<Self> {
        let t = timepoint_labels.len();
        if t == 0 {
            return Err(Error::Domain("at least one post-baseline timepoint is required".into()));
        }
        let mut ids = HashSet::with_capacity(subjects.len());
        let mut per_arm = [0usize; 2];
        for s in &subjects {
            if !ids.insert(s.id.as_str()) {
                return Err(Error::Domain(format!("duplicate subject id '{}'", s.id)));
            }
            if s.outcomes.len() != t {
                return Err(Error::Domain(format!(
                    "subject '{}' has {} outcomes, expected {t}",
                    s.id,
                    s.outcomes.len()
                )));
            }
            let finite = s.baseline.into_iter().chain(s.outcomes.iter().flatten().copied());
            if finite.into_iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain(format!("subject '{}' has a non-finite value", s.id)));
            }
            per_arm[s.arm.index()] += 1;
        }
        if per_arm.contains(&0) {
            return Err(Error::Domain("both arms need at least one subject".into()));
        }
        Ok(TrialData {
            subjects,
            direction,
            baseline_label: baseline_label.into(),
            timepoint_labels,
        })
    }

    pub fn subjects(&self) -> &[Subject] {
        &self.subjects
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn with_direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    /// Relabels every subject into the opposite arm.
    pub fn with_arms_swapped(mut self) -> Self {
        for s in &mut self.subjects {
            s.arm = s.arm.swapped();
        }
        self
    }

    pub fn baseline_label(&self) -> &str {
        &self.baseline_label
    }

    pub fn timepoint_labels(&self) -> &[String] {
        &self.timepoint_labels
    }

    /// Number of post-baseline timepoints `T`.
    pub fn n_timepoints(&self) -> usize {
        self.timepoint_labels.len()
    }

    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }

    /// Observed count per arm at timepoint `t` (0 = baseline), as `[control, treatment]`.
    pub fn observed_counts(&self, t: usize) -> [usize; 2] {
        let mut n = [0; 2];
        for s in self.subjects.iter().filter(|s| s.is_observed(t)) {
            n[s.arm.index()] += 1;
        }
        n
    }

    pub fn arm_sizes(&self) -> [usize; 2] {
        let mut n = [0; 2];
        for s in &self.subjects {
            n[s.arm.index()] += 1;
        }
        n
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn subject(id: &str, arm: Arm, outcomes: Vec<Option<f64>>) -> Subject {
        Subject {
            id: id.into(),
            arm,
            baseline: Some(1.0),
            outcomes,
        }
    }

    #[test]
    fn rejects_duplicate_ids() {
        let s = vec![
            subject("a", Arm::Control, vec![Some(1.0)]),
            subject("a", Arm::Treatment, vec![Some(2.0)]),
        ];
        assert!(TrialData::new(s, Direction::Higher, "y0", vec!["y1".into()]).is_err());
    }

    #[test]
    fn rejects_ragged_outcomes() {
        let s = vec![
            subject("a", Arm::Control, vec![Some(1.0)]),
            subject("b", Arm::Treatment, vec![Some(2.0), None]),
        ];
        assert!(TrialData::new(s, Direction::Higher, "y0", vec!["y1".into()]).is_err());
    }

    #[test]
    fn requires_both_arms() {
        let s = vec![subject("a", Arm::Control, vec![Some(1.0)])];
        assert!(TrialData::new(s, Direction::Higher, "y0", vec!["y1".into()]).is_err());
    }

    #[test]
    fn counts_observed() {
        let s = vec![
            subject("a", Arm::Control, vec![Some(1.0), None]),
            subject("b", Arm::Treatment, vec![Some(2.0), Some(3.0)]),
            subject("c", Arm::Treatment, vec![None, None]),
        ];
        let d = TrialData::new(s, Direction::Higher, "y0", vec!["y1".into(), "y2".into()]).unwrap();
        assert_eq!(d.observed_counts(0), [1, 2]);
        assert_eq!(d.observed_counts(1), [1, 1]);
        assert_eq!(d.observed_counts(2), [0, 1]);
        assert_eq!(d.arm_sizes(), [1, 2]);
    }
}
