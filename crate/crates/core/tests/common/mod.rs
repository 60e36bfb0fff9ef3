#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use winprob::rank::{deuchler_score, Direction};
use winprob::{Arm, Subject, TrialData};

/// Pairwise definition of the win fractions.
pub fn brute_force_fractions(arm1: &[f64], arm0: &[f64], dir: Direction) -> (Vec<f64>, Vec<f64>) {
    let w1 = arm1
        .iter()
        .map(|&a| arm0.iter().map(|&b| deuchler_score(a, b, dir).unwrap()).sum::<f64>() / arm0.len() as f64)
        .collect();
    let w0 = arm0
        .iter()
        .map(|&b| arm1.iter().map(|&a| deuchler_score(b, a, dir).unwrap()).sum::<f64>() / arm1.len() as f64)
        .collect();
    (w1, w0)
}

/// Random trial with integer-valued scores (ties likely) and optional gaps.
pub fn random_trial(seed: u64, n: [usize; 2], t: usize, missing: f64, dir: Direction) -> TrialData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut subjects = Vec::new();
    for (a, arm) in [Arm::Control, Arm::Treatment].into_iter().enumerate() {
        for j in 0..n[a] {
            let shift = a as f64 * 1.5;
            let outcomes = (0..t)
                .map(|_| {
                    if rng.random::<f64>() < missing {
                        None
                    } else {
                        Some((rng.random::<f64>() * 12.0 + shift).floor())
                    }
                })
                .collect();
            subjects.push(Subject {
                id: format!("{a}-{j}"),
                arm,
                baseline: Some((rng.random::<f64>() * 10.0).floor()),
                outcomes,
            });
        }
    }
    let labels = (1..=t).map(|k| format!("v{k}")).collect();
    TrialData::new(subjects, dir, "v0", labels).unwrap()
}

/// Makes sure every visit has at least two observations per arm.
pub fn ensure_observed(data: TrialData) -> TrialData {
    let t = data.n_timepoints();
    let mut subjects = data.subjects().to_vec();
    for arm in [Arm::Control, Arm::Treatment] {
        let idx: Vec<usize> = (0..subjects.len()).filter(|&k| subjects[k].arm == arm).take(2).collect();
        for &k in &idx {
            for v in 0..t {
                if subjects[k].outcomes[v].is_none() {
                    subjects[k].outcomes[v] = Some((k + v) as f64);
                }
            }
        }
    }
    TrialData::new(subjects, data.direction(), data.baseline_label(), data.timepoint_labels().to_vec()).unwrap()
}
