use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::TrialData;
use crate::error::{Error, Result};
use crate::estimators::{cca_estimate, gpc_estimate, mmrm_estimate, Analysis, EstimatorOptions, Method};

use super::generate::{apply_mechanism, generate_complete, is_monotone, landmark_dropout_pct};
use super::scenario::{Mechanism, Scenario};

const TAG_GENERATE: u64 = 0;
const TAG_DELETE: u64 = 1;

/// Independent random stream for one purpose within one replicate.
pub fn replicate_rng(master_seed: u64, replicate: u64, tag: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream((replicate << 2) | (tag & 3));
    rng
}

/// Replicate `k` of a scenario: complete data and the data after deletion.
pub fn simulate_replicate(scenario: &Scenario, master_seed: u64, replicate: u64) -> Result<(TrialData, TrialData)> {
    let complete = generate_complete(scenario, &mut replicate_rng(master_seed, replicate, TAG_GENERATE))?;
    let observed = apply_mechanism(scenario, &complete, &mut replicate_rng(master_seed, replicate, TAG_DELETE))?;
    if matches!(scenario.mechanism, Mechanism::Mcar | Mechanism::Mar) {
        assert!(is_monotone(&observed), "non-monotone dropout pattern");
    }
    Ok((complete, observed))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub n_reps: usize,
    pub master_seed: u64,
    /// Worker threads; 0 lets the pool decide.
    pub threads: usize,
    pub options: EstimatorOptions,
}

impl StudyConfig {
    pub fn new(n_reps: usize, master_seed: u64) -> Self {
        StudyConfig {
            n_reps,
            master_seed,
            threads: threads_from_env(),
            options: EstimatorOptions::default(),
        }
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads;
        self
    }
}

/// Thread cap from `WINPROB_THREADS`; 0 (or unset) means automatic.
pub fn threads_from_env() -> usize {
    std::env::var("WINPROB_THREADS")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(0)
}

/// Landmark result of one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ReplicateOutcome {
    Estimated {
        theta_hat: f64,
        ci: Option<(f64, f64)>,
        p_value: Option<f64>,
        converged: bool,
    },
    Failed(String),
}

/// Operating characteristics over the replicates. Percentages of coverage,
/// tail errors and power are taken over replicates with a usable interval;
/// bias over every replicate with an estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub scenario: String,
    pub trajectory: u8,
    pub mechanism: Mechanism,
    pub case: Option<u8>,
    pub method: Method,
    pub n: [usize; 2],
    pub true_theta: f64,
    pub bias_pct: f64,
    pub coverage_pct: f64,
    pub ml_pct: f64,
    pub mr_pct: f64,
    pub mean_width: f64,
    pub power_pct: f64,
    /// Mean landmark dropout `[control, treatment]` in percent.
    pub dropout_pct: [f64; 2],
    pub n_reps: usize,
    pub n_failed: usize,
    pub n_degenerate: usize,
    pub n_nonconverged: usize,
    pub seed: u64,
}

fn run_method(method: Method, data: &TrialData, options: &EstimatorOptions) -> Result<Analysis> {
    match method {
        Method::Gpc => gpc_estimate(data, options),
        Method::Cca => cca_estimate(data, options),
        Method::Mmrm => mmrm_estimate(data, options).map(|(a, _)| a),
    }
}

fn outcome(result: Result<Analysis>) -> ReplicateOutcome {
    match result {
        Ok(a) => {
            let e = a.landmark();
            ReplicateOutcome::Estimated {
                theta_hat: e.theta_hat,
                ci: e.ci_low.zip(e.ci_high),
                p_value: e.p_value,
                converged: a.diagnostics.converged.unwrap_or(true),
            }
        }
        Err(e) => ReplicateOutcome::Failed(e.to_string()),
    }
}

struct Replicate {
    dropout: [f64; 2],
    outcomes: Vec<ReplicateOutcome>,
}

fn in_pool<T: Send>(threads: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker threads: {e}")))?;
    Ok(pool.install(job))
}

/// Runs several estimators on the same simulated datasets. Replicate `k`
/// draws from streams keyed by `(master_seed, k)`, and results are reduced in
/// replicate order, so reports do not depend on the thread count.
pub fn run_study_methods(scenario: &Scenario, methods: &[Method], config: &StudyConfig) -> Result<Vec<SimulationReport>> {
    if config.n_reps == 0 {
        return Err(Error::Config("at least one replicate is required".into()));
    }
    let replicates: Vec<Result<Replicate>> = in_pool(config.threads, || {
        (0..config.n_reps as u64)
            .into_par_iter()
            .map(|k| {
                let (_, data) = simulate_replicate(scenario, config.master_seed, k)?;
                let outcomes = methods
                    .iter()
                    .map(|&m| outcome(run_method(m, &data, &config.options)))
                    .collect();
                Ok(Replicate {
                    dropout: landmark_dropout_pct(&data),
                    outcomes,
                })
            })
            .collect()
    })?;
    let replicates: Vec<Replicate> = replicates.into_iter().collect::<Result<_>>()?;
    Ok(methods
        .iter()
        .enumerate()
        .map(|(i, &m)| {
            let outs: Vec<&ReplicateOutcome> = replicates.iter().map(|r| &r.outcomes[i]).collect();
            let dropout: Vec<[f64; 2]> = replicates.iter().map(|r| r.dropout).collect();
            summarise(scenario, m, &outs, &dropout, config)
        })
        .collect())
}

pub fn run_study(scenario: &Scenario, method: Method, config: &StudyConfig) -> Result<SimulationReport> {
    Ok(run_study_methods(scenario, &[method], config)?.remove(0))
}

fn summarise(
    scenario: &Scenario,
    method: Method,
    outs: &[&ReplicateOutcome],
    dropout: &[[f64; 2]],
    config: &StudyConfig,
) -> SimulationReport {
    let theta = scenario.true_theta();
    let alpha = config.options.alpha;
    let mut n_est = 0usize;
    let mut n_ci = 0usize;
    let (mut bias, mut width) = (0.0, 0.0);
    let (mut cover, mut ml, mut mr, mut reject) = (0usize, 0usize, 0usize, 0usize);
    let (mut failed, mut degenerate, mut nonconv) = (0usize, 0usize, 0usize);
    for o in outs {
        match o {
            ReplicateOutcome::Failed(msg) => {
                log::debug!("replicate failed: {msg}");
                failed += 1;
            }
            ReplicateOutcome::Estimated {
                theta_hat,
                ci,
                p_value,
                converged,
            } => {
                n_est += 1;
                bias += (theta_hat - theta) / theta;
                if !converged {
                    nonconv += 1;
                }
                match (ci, p_value) {
                    (Some((lo, hi)), Some(p)) => {
                        n_ci += 1;
                        width += hi - lo;
                        if *hi < theta {
                            ml += 1;
                        } else if *lo > theta {
                            mr += 1;
                        } else {
                            cover += 1;
                        }
                        if *p < alpha {
                            reject += 1;
                        }
                    }
                    _ => degenerate += 1,
                }
            }
        }
    }
    let pct = |k: usize, n: usize| if n == 0 { f64::NAN } else { 100.0 * k as f64 / n as f64 };
    let mut mean_drop = [0.0; 2];
    for d in dropout {
        mean_drop[0] += d[0];
        mean_drop[1] += d[1];
    }
    SimulationReport {
        scenario: scenario.label(),
        trajectory: scenario.trajectory.number(),
        mechanism: scenario.mechanism,
        case: scenario.case_number(),
        method,
        n: scenario.n,
        true_theta: theta,
        bias_pct: if n_est == 0 { f64::NAN } else { 100.0 * bias / n_est as f64 },
        coverage_pct: pct(cover, n_ci),
        ml_pct: pct(ml, n_ci),
        mr_pct: pct(mr, n_ci),
        mean_width: if n_ci == 0 { f64::NAN } else { width / n_ci as f64 },
        power_pct: pct(reject, n_ci),
        dropout_pct: mean_drop.map(|s| s / dropout.len() as f64),
        n_reps: outs.len(),
        n_failed: failed,
        n_degenerate: degenerate,
        n_nonconverged: nonconv,
        seed: config.master_seed,
    }
}

/// Aligned text table, one row per report.
pub fn format_reports(reports: &[SimulationReport]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<28} {:<6} {:>7} {:>8} {:>6} {:>6} {:>6} {:>7} {:>6} {:>5} {:>5}",
        "scenario", "method", "theta", "bias%", "ML", "CV%", "MR", "WDx100", "EP", "fail", "nonc"
    );
    for r in reports {
        let _ = writeln!(
            s,
            "{:<28} {:<6} {:>7.4} {:>8.2} {:>6.1} {:>6.1} {:>6.1} {:>7.1} {:>6.1} {:>5} {:>5}",
            r.scenario,
            r.method.name(),
            r.true_theta,
            r.bias_pct,
            r.ml_pct,
            r.coverage_pct,
            r.mr_pct,
            100.0 * r.mean_width,
            r.power_pct,
            r.n_failed,
            r.n_nonconverged
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::scenario::Trajectory;

    #[test]
    fn streams_differ_by_replicate_and_tag() {
        use rand::Rng;
        let a: u64 = replicate_rng(1, 0, 0).random();
        let b: u64 = replicate_rng(1, 1, 0).random();
        let c: u64 = replicate_rng(1, 0, 1).random();
        let a2: u64 = replicate_rng(1, 0, 0).random();
        assert_eq!(a, a2);
        assert!(a != b && a != c && b != c);
    }

    #[test]
    fn complete_data_small_study() {
        let s = Scenario::new(Trajectory::T4, Mechanism::None, None, [30, 30]).unwrap();
        let cfg = StudyConfig::new(20, 7).with_threads(2);
        let r = run_study_methods(&s, &Method::ALL, &cfg).unwrap();
        assert_eq!(r.len(), 3);
        for rep in &r {
            assert_eq!(rep.n_reps, 20);
            assert_eq!(rep.n_failed, 0);
            assert!((rep.ml_pct + rep.coverage_pct + rep.mr_pct - 100.0).abs() < 1e-9);
            assert_eq!(rep.dropout_pct, [0.0, 0.0]);
        }
        let table = format_reports(&r);
        assert_eq!(table.lines().count(), 4);
    }

    #[test]
    fn zero_reps_rejected() {
        let s = Scenario::new(Trajectory::T1, Mechanism::None, None, [10, 10]).unwrap();
        assert!(run_study(&s, Method::Gpc, &StudyConfig::new(0, 1)).is_err());
    }
}
