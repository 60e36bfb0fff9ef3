use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::norm_cdf;

/// Number of measurement occasions, baseline included.
pub const OCCASIONS: usize = 4;

pub const SIGMA_CONTROL: [[f64; 4]; 4] = [
    [15.6, 12.9, 4.8, 4.4],
    [12.9, 37.5, 22.8, 11.6],
    [4.8, 22.8, 34.2, 17.9],
    [4.4, 11.6, 17.9, 21.9],
];

pub const SIGMA_TREATMENT: [[f64; 4]; 4] = [
    [12.8, 7.4, 3.6, 7.1],
    [7.4, 43.2, 22.7, 23.8],
    [3.6, 22.7, 21.8, 18.8],
    [7.1, 23.8, 18.8, 22.4],
];

/// Mean profiles of the two arms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Trajectory {
    /// Equal profiles.
    T1,
    /// Treatment improves faster, then converges back.
    T2,
    /// Treatment keeps a small advantage at the end.
    T3,
    /// Crossing profiles with a moderate final advantage.
    T4,
}

impl Trajectory {
    pub const ALL: [Trajectory; 4] = [Trajectory::T1, Trajectory::T2, Trajectory::T3, Trajectory::T4];

    pub fn from_number(k: u8) -> Option<Self> {
        Self::ALL.get((k as usize).checked_sub(1)?).copied()
    }

    pub fn number(self) -> u8 {
        self as u8 + 1
    }

    /// `[m_0, m_1]` over baseline and the three follow-up visits.
    pub fn means(self) -> [[f64; 4]; 2] {
        match self {
            Trajectory::T1 => [[20.0, 16.0, 12.0, 11.0], [20.0, 16.0, 12.0, 11.0]],
            Trajectory::T2 => [[20.0, 16.0, 12.0, 11.0], [20.0, 15.0, 9.0, 11.0]],
            Trajectory::T3 => [[20.0, 16.0, 12.0, 11.0], [20.0, 15.0, 9.0, 10.0]],
            Trajectory::T4 => [[20.0, 15.0, 9.0, 11.0], [20.0, 16.0, 12.0, 9.0]],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mechanism {
    None,
    Mcar,
    Mar,
    Mnar,
}

impl Mechanism {
    pub fn name(self) -> &'static str {
        match self {
            Mechanism::None => "none",
            Mechanism::Mcar => "mcar",
            Mechanism::Mar => "mar",
            Mechanism::Mnar => "mnar",
        }
    }
}

/// Trigger-based dropout parameters, indexed by arm `[control, treatment]`.
/// A subject drops out at the first visit whose score exceeds the trigger
/// and whose Bernoulli draw succeeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DropoutCase {
    pub trigger: [f64; 2],
    pub p_drop: [f64; 2],
}

impl DropoutCase {
    /// The four trigger/probability combinations, numbered 1 to 4.
    pub fn combination(k: u8) -> Option<Self> {
        let (trigger, p_drop) = match k {
            1 => ([16.0, 16.0], [0.4, 0.4]),
            2 => ([16.0, 15.0], [0.4, 0.4]),
            3 => ([16.0, 16.0], [0.5, 0.3]),
            4 => ([16.0, 15.0], [0.5, 0.3]),
            _ => return None,
        };
        Some(DropoutCase { trigger, p_drop })
    }
}

/// One simulation setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub trajectory: Trajectory,
    pub mechanism: Mechanism,
    /// Trigger combination 1..=4 for MAR/MNAR.
    pub combination: Option<u8>,
    /// `[n_0, n_1]`.
    pub n: [usize; 2],
}

impl Scenario {
    pub fn new(trajectory: Trajectory, mechanism: Mechanism, combination: Option<u8>, n: [usize; 2]) -> Result<Self> {
        let s = Scenario {
            trajectory,
            mechanism,
            combination,
            n,
        };
        s.validate()?;
        Ok(s)
    }

    fn validate(&self) -> Result<()> {
        match (self.mechanism, self.combination) {
            (Mechanism::Mar | Mechanism::Mnar, Some(1..=4)) => {}
            (Mechanism::Mar | Mechanism::Mnar, c) => {
                return Err(Error::Config(format!(
                    "{} needs a trigger combination 1 to 4, got {c:?}",
                    self.mechanism.name()
                )))
            }
            (_, Some(c)) => {
                return Err(Error::Config(format!(
                    "combination {c} only applies to mar/mnar"
                )))
            }
            _ => {}
        }
        if self.n.iter().any(|&n| n < 2) {
            return Err(Error::Config("each arm needs at least 2 subjects".into()));
        }
        if self.mechanism == Mechanism::Mcar && self.n.iter().any(|&n| n < 10) {
            return Err(Error::Config("MCAR stages need at least 10 subjects per arm".into()));
        }
        Ok(())
    }

    /// Case label 1..=16 within a mechanism: four per trajectory.
    pub fn case_number(&self) -> Option<u8> {
        self.combination
            .map(|c| 4 * (self.trajectory.number() - 1) + c)
    }

    /// Scenario from a case label 1..=16.
    pub fn from_case(mechanism: Mechanism, case: u8, n: [usize; 2]) -> Result<Self> {
        if !(1..=16).contains(&case) {
            return Err(Error::Config(format!("case must be 1 to 16, got {case}")));
        }
        let trajectory = Trajectory::from_number((case - 1) / 4 + 1).expect("in range");
        Scenario::new(trajectory, mechanism, Some((case - 1) % 4 + 1), n)
    }

    pub fn dropout_case(&self) -> Option<DropoutCase> {
        self.combination.and_then(DropoutCase::combination)
    }

    pub fn means(&self) -> [[f64; 4]; 2] {
        self.trajectory.means()
    }

    pub fn sigma(&self, arm: usize) -> DMatrix<f64> {
        let s = if arm == 0 { &SIGMA_CONTROL } else { &SIGMA_TREATMENT };
        DMatrix::from_fn(OCCASIONS, OCCASIONS, |i, j| s[i][j])
    }

    pub fn mean_vector(&self, arm: usize) -> DVector<f64> {
        DVector::from_column_slice(&self.means()[arm])
    }

    /// Landmark win probability when lower scores are better.
    pub fn true_theta(&self) -> f64 {
        true_theta(self.trajectory)
    }

    pub fn label(&self) -> String {
        let mut s = format!("trajectory {} {}", self.trajectory.number(), self.mechanism.name());
        if let Some(c) = self.case_number() {
            s.push_str(&format!(" case {c}"));
        }
        s
    }

    /// Every setting at sample sizes `n`: complete and MCAR for each
    /// trajectory, then MAR and MNAR cases 1 to 16.
    pub fn registry(n: [usize; 2]) -> Vec<Scenario> {
        let mut out = Vec::with_capacity(40);
        for mechanism in [Mechanism::None, Mechanism::Mcar] {
            for t in Trajectory::ALL {
                out.push(Scenario {
                    trajectory: t,
                    mechanism,
                    combination: None,
                    n,
                });
            }
        }
        for mechanism in [Mechanism::Mar, Mechanism::Mnar] {
            for case in 1..=16 {
                out.push(Scenario::from_case(mechanism, case, n).expect("valid case"));
            }
        }
        out
    }
}

/// `Φ((m_0 − m_1) / sqrt(σ²_0 + σ²_1))` at the last visit.
pub fn true_theta(trajectory: Trajectory) -> f64 {
    let m = trajectory.means();
    let last = OCCASIONS - 1;
    let sd = (SIGMA_CONTROL[last][last] + SIGMA_TREATMENT[last][last]).sqrt();
    norm_cdf((m[0][last] - m[1][last]) / sd)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn true_thetas() {
        assert_eq!(true_theta(Trajectory::T1), 0.5);
        assert_eq!(true_theta(Trajectory::T2), 0.5);
        assert!((true_theta(Trajectory::T3) - 0.5597).abs() < 1e-4);
        assert!((true_theta(Trajectory::T4) - 0.6181).abs() < 1e-4);
    }

    #[test]
    fn covariances_are_positive_definite() {
        let s = Scenario::new(Trajectory::T1, Mechanism::None, None, [50, 50]).unwrap();
        for arm in 0..2 {
            assert!(s.sigma(arm).cholesky().is_some());
        }
    }

    #[test]
    fn registry_layout() {
        let r = Scenario::registry([50, 50]);
        assert_eq!(r.len(), 40);
        let case5 = r.iter().find(|s| s.mechanism == Mechanism::Mar && s.case_number() == Some(5)).unwrap();
        assert_eq!(case5.trajectory, Trajectory::T2);
        assert_eq!(case5.dropout_case().unwrap().p_drop, [0.4, 0.4]);
        let case13 = Scenario::from_case(Mechanism::Mnar, 13, [50, 50]).unwrap();
        assert_eq!(case13.trajectory, Trajectory::T4);
        assert_eq!(case13.combination, Some(1));
    }

    #[test]
    fn invalid_settings() {
        assert!(Scenario::new(Trajectory::T1, Mechanism::Mar, None, [50, 50]).is_err());
        assert!(Scenario::new(Trajectory::T1, Mechanism::Mcar, Some(1), [50, 50]).is_err());
        assert!(Scenario::new(Trajectory::T1, Mechanism::Mcar, None, [9, 50]).is_err());
        assert!(Scenario::from_case(Mechanism::Mar, 17, [50, 50]).is_err());
    }
}
