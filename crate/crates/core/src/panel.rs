//! Per-subject, per-timepoint win fractions for a whole trial.

use crate::data::{Arm, TrialData};
use crate::error::{Error, Result};
use crate::rank::win_fractions_raw;

/// Win fractions `W_ijt` for every subject and timepoint, computed among the
/// subjects observed at that timepoint.
#[derive(Debug, Clone, PartialEq)]
pub struct WinFractionPanel {
    arms: Vec<Arm>,
    baseline: Vec<Option<f64>>,
    fractions: Vec<Vec<Option<f64>>>,
    /// `[n_0t, n_1t]` for `t = 0..=T`.
    group_sizes: Vec<[usize; 2]>,
}

impl WinFractionPanel {
    /// Ranks every timepoint of `data`, baseline included. A timepoint where
    /// one arm has no observations is an `EmptyArm` error unless it is the
    /// baseline, whose fractions are then left missing.
    pub fn from_trial(data: &TrialData) -> Result<Self> {
        let n = data.len();
        let t_max = data.n_timepoints();
        let mut columns = vec![vec![None; t_max + 1]; n];
        let mut group_sizes = Vec::with_capacity(t_max + 1);
        for t in 0..=t_max {
            let mut idx = [Vec::new(), Vec::new()];
            let mut val = [Vec::new(), Vec::new()];
            for (k, s) in data.subjects().iter().enumerate() {
                if let Some(v) = s.at(t) {
                    idx[s.arm.index()].push(k);
                    val[s.arm.index()].push(v);
                }
            }
            group_sizes.push([val[0].len(), val[1].len()]);
            if val[0].is_empty() || val[1].is_empty() {
                if t == 0 {
                    continue;
                }
                let arm = if val[1].is_empty() { 1 } else { 0 };
                return Err(Error::EmptyArm { arm, timepoint: t });
            }
            let (w1, w0) = win_fractions_raw(&val[1], &val[0], data.direction());
            for (k, w) in idx[1].iter().zip(w1) {
                columns[*k][t] = Some(w);
            }
            for (k, w) in idx[0].iter().zip(w0) {
                columns[*k][t] = Some(w);
            }
        }
        let baseline = columns.iter().map(|c| c[0]).collect();
        let fractions = columns.into_iter().map(|mut c| c.split_off(1)).collect();
        Ok(WinFractionPanel {
            arms: data.subjects().iter().map(|s| s.arm).collect(),
            baseline,
            fractions,
            group_sizes,
        })
    }

    pub fn arms(&self) -> &[Arm] {
        &self.arms
    }

    pub fn baseline_fractions(&self) -> &[Option<f64>] {
        &self.baseline
    }

    /// Post-baseline fractions, indexed `[subject][t - 1]`.
    pub fn fractions(&self) -> &[Vec<Option<f64>>] {
        &self.fractions
    }

    /// Fraction of subject `k` at `t` (0 = baseline).
    pub fn at(&self, k: usize, t: usize) -> Option<f64> {
        if t == 0 {
            self.baseline[k]
        } else {
            self.fractions[k][t - 1]
        }
    }

    pub fn group_sizes(&self) -> &[[usize; 2]] {
        &self.group_sizes
    }

    pub fn n_subjects(&self) -> usize {
        self.arms.len()
    }

    pub fn n_timepoints(&self) -> usize {
        self.group_sizes.len() - 1
    }

    /// Arm means `[mean W_0.t, mean W_1.t]` at `t`.
    pub fn arm_means(&self, t: usize) -> [f64; 2] {
        let mut sum = [0.0; 2];
        for (k, arm) in self.arms.iter().enumerate() {
            if let Some(w) = self.at(k, t) {
                sum[arm.index()] += w;
            }
        }
        let n = self.group_sizes[t];
        [sum[0] / n[0] as f64, sum[1] / n[1] as f64]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::embedded_epds;

    #[test]
    fn epds_panel_shape_and_complement() {
        let d = embedded_epds();
        let p = WinFractionPanel::from_trial(&d).unwrap();
        assert_eq!(p.n_subjects(), 61);
        assert_eq!(p.n_timepoints(), 6);
        for t in 0..=6 {
            let [m0, m1] = p.arm_means(t);
            assert!((m0 + m1 - 1.0).abs() < 1e-12, "t = {t}");
            assert_eq!(p.group_sizes()[t], d.observed_counts(t));
        }
        for (k, s) in d.subjects().iter().enumerate() {
            for t in 0..=6 {
                assert_eq!(p.at(k, t).is_some(), s.is_observed(t));
                if let Some(w) = p.at(k, t) {
                    assert!((0.0..=1.0).contains(&w));
                }
            }
        }
    }
}
