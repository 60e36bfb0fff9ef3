mod common;

use common::brute_force_fractions;
use proptest::prelude::*;
use winprob::rank::{midranks, theta_single, win_fractions_at_timepoint, Direction, OutcomeColumn};

fn col(v: &[f64], d: Direction) -> OutcomeColumn {
    OutcomeColumn::from_values(v, d).unwrap()
}

/// All vectors of length `len` over `{0, .., k-1}`.
fn all_vectors(len: usize, k: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|v| {
                (0..k).map(move |x| {
                    let mut w = v.clone();
                    w.push(x as f64);
                    w
                })
            })
            .collect();
    }
    out
}

/// Non-decreasing vectors of length `len` over `{0, .., k-1}`: every multiset once.
fn all_multisets(len: usize, k: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![]];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|v: Vec<f64>| {
                let start = v.last().map_or(0, |&x| x as usize);
                (start..k).map(move |x| {
                    let mut w = v.clone();
                    w.push(x as f64);
                    w
                })
            })
            .collect();
    }
    out
}

#[test]
fn exhaustive_multisets_up_to_eight_per_arm() {
    let arms: Vec<Vec<f64>> = (1..=8).flat_map(|n| all_multisets(n, 4)).collect();
    assert_eq!(arms.len(), 494);
    for dir in [Direction::Higher, Direction::Lower] {
        for a1 in &arms {
            for a0 in &arms {
                let (w1, w0) = win_fractions_at_timepoint(&col(a1, dir), &col(a0, dir)).unwrap();
                let (b1, b0) = brute_force_fractions(a1, a0, dir);
                assert_eq!(w1, b1);
                assert_eq!(w0, b0);
            }
        }
    }
}

#[test]
fn exhaustive_small_instances_match_pairwise_definition() {
    for dir in [Direction::Higher, Direction::Lower] {
        for n1 in 1..=3 {
            for n0 in 1..=3 {
                for a1 in all_vectors(n1, 4) {
                    for a0 in all_vectors(n0, 4) {
                        let (w1, w0) = win_fractions_at_timepoint(&col(&a1, dir), &col(&a0, dir)).unwrap();
                        let (b1, b0) = brute_force_fractions(&a1, &a0, dir);
                        assert_eq!(w1, b1);
                        assert_eq!(w0, b0);
                    }
                }
            }
        }
    }
}

fn arm() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((0u8..4).prop_map(f64::from), 1..=8)
}

fn arm2() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((0u8..4).prop_map(f64::from), 2..=8)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn rank_identity_matches_oracle(a1 in arm(), a0 in arm(), lower in any::<bool>()) {
        let dir = if lower { Direction::Lower } else { Direction::Higher };
        let (w1, w0) = win_fractions_at_timepoint(&col(&a1, dir), &col(&a0, dir)).unwrap();
        let (b1, b0) = brute_force_fractions(&a1, &a0, dir);
        prop_assert_eq!(w1, b1);
        prop_assert_eq!(w0, b0);
    }

    #[test]
    fn complement_identity(a1 in arm(), a0 in arm()) {
        let (w1, w0) = win_fractions_at_timepoint(&col(&a1, Direction::Higher), &col(&a0, Direction::Higher)).unwrap();
        let m1 = w1.iter().sum::<f64>() / w1.len() as f64;
        let m0 = w0.iter().sum::<f64>() / w0.len() as f64;
        prop_assert!((m1 + m0 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn midranks_sum(v in arm()) {
        let r = midranks(&v, Direction::Higher).unwrap();
        let n = v.len() as f64;
        prop_assert!((r.iter().sum::<f64>() - n * (n + 1.0) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn monotone_transform_invariance(a1 in arm2(), a0 in arm2()) {
        let f = |x: &f64| (x * 0.7 + 1.0).exp();
        let t1: Vec<f64> = a1.iter().map(f).collect();
        let t0: Vec<f64> = a0.iter().map(f).collect();
        let d = Direction::Higher;
        let r = theta_single(&col(&a1, d), &col(&a0, d)).unwrap();
        let s = theta_single(&col(&t1, d), &col(&t0, d)).unwrap();
        prop_assert_eq!(r.theta_hat.to_bits(), s.theta_hat.to_bits());
        prop_assert_eq!(r.variance.to_bits(), s.variance.to_bits());
        prop_assert_eq!(midranks(&a1, d).unwrap(), midranks(&t1, d).unwrap());
    }

    #[test]
    fn direction_and_arm_swap_duality(a1 in arm2(), a0 in arm2()) {
        let h = theta_single(&col(&a1, Direction::Higher), &col(&a0, Direction::Higher)).unwrap();
        let l = theta_single(&col(&a1, Direction::Lower), &col(&a0, Direction::Lower)).unwrap();
        prop_assert!((h.theta_hat + l.theta_hat - 1.0).abs() < 1e-12);
        prop_assert!((h.variance - l.variance).abs() < 1e-15);
        let s = theta_single(&col(&a0, Direction::Higher), &col(&a1, Direction::Higher)).unwrap();
        prop_assert!((h.theta_hat + s.theta_hat - 1.0).abs() < 1e-12);
    }
}
