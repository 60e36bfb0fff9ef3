//! Serialisable analysis results and their JSON and text renderings.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::TrialData;
use crate::error::Result;
use crate::estimators::{
    cca_estimate, format_p, gpc_estimate, mmrm_estimate, Analysis, EffectConversions, EstimatorOptions, Method,
};
use crate::rank::Direction;

/// Hex SHA-256 of the raw input bytes.
pub fn input_digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimepointResult {
    pub label: String,
    pub timepoint: usize,
    pub theta: f64,
    pub se: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub p_value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmCounts {
    pub label: String,
    pub control: usize,
    pub treatment: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    /// Observed subjects per arm at baseline and every visit.
    pub n: Vec<ArmCounts>,
    /// Subjects per arm in the fitted model.
    pub n_analysed: [usize; 2],
    pub alpha: f64,
    pub baseline_covariate: bool,
    pub converged: Option<bool>,
    pub iterations: Option<usize>,
    pub log_likelihood: Option<f64>,
    pub unresolved_pairs: Option<usize>,
    pub software_version: String,
    pub input_digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisResult {
    pub method: Method,
    pub direction: Direction,
    pub timepoints: Vec<TimepointResult>,
    /// Effect scales at the landmark; absent for a boundary estimate.
    pub conversions: Option<EffectConversions>,
    pub warnings: Vec<String>,
    pub metadata: Metadata,
}

impl AnalysisResult {
    pub fn from_analysis(analysis: &Analysis, data: &TrialData, options: &EstimatorOptions, input_digest: &str) -> Self {
        let mut warnings = analysis.warnings.clone();
        let conversions = match analysis.landmark().conversions() {
            Ok(c) => Some(c),
            Err(e) => {
                warnings.push(format!("effect conversions unavailable: {e}"));
                None
            }
        };
        let timepoints = analysis
            .estimates
            .iter()
            .map(|e| TimepointResult {
                label: e.label.clone(),
                timepoint: e.timepoint,
                theta: e.theta_hat,
                se: e.std_error,
                ci_low: e.ci_low,
                ci_high: e.ci_high,
                p_value: e.p_value,
            })
            .collect();
        let labels = std::iter::once(data.baseline_label()).chain(data.timepoint_labels().iter().map(String::as_str));
        let n = labels
            .enumerate()
            .map(|(t, label)| {
                let c = data.observed_counts(t);
                ArmCounts {
                    label: label.to_string(),
                    control: c[0],
                    treatment: c[1],
                }
            })
            .collect();
        let d = &analysis.diagnostics;
        AnalysisResult {
            method: analysis.method,
            direction: data.direction(),
            timepoints,
            conversions,
            warnings,
            metadata: Metadata {
                n,
                n_analysed: d.n_analysed,
                alpha: options.alpha,
                baseline_covariate: options.baseline_covariate,
                converged: d.converged,
                iterations: d.iterations,
                log_likelihood: d.log_likelihood,
                unresolved_pairs: d.unresolved_pairs,
                software_version: env!("CARGO_PKG_VERSION").to_string(),
                input_digest: input_digest.to_string(),
            },
        }
    }

    pub fn landmark(&self) -> &TimepointResult {
        self.timepoints.last().expect("result has at least one timepoint")
    }
}

/// Runs one procedure and packages the result.
pub fn analyze(data: &TrialData, method: Method, options: &EstimatorOptions, input_digest: &str) -> Result<AnalysisResult> {
    let analysis = match method {
        Method::Gpc => gpc_estimate(data, options)?,
        Method::Cca => cca_estimate(data, options)?,
        Method::Mmrm => mmrm_estimate(data, options)?.0,
    };
    Ok(AnalysisResult::from_analysis(&analysis, data, options, input_digest))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Table,
}

/// `0.737 (0.611, 0.834) p=0.0005`, or the bare estimate when degenerate.
pub fn format_estimate(t: &TimepointResult) -> String {
    match (t.ci_low, t.ci_high, t.p_value) {
        (Some(l), Some(u), Some(p)) => format!("{:.3} ({:.3}, {:.3}) p={}", t.theta, l, u, format_p(p)),
        _ => format!("{:.3} (no interval)", t.theta),
    }
}

/// Renders results as a JSON document (an array when there is more than one)
/// or as a method/visit/estimate table.
pub fn write_result(results: &[AnalysisResult], format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Json => {
            let s = if results.len() == 1 {
                serde_json::to_string_pretty(&results[0])
            } else {
                serde_json::to_string_pretty(results)
            };
            s.map(|mut s| {
                s.push('\n');
                s
            })
            .map_err(|e| crate::error::Error::Io(e.to_string()))
        }
        OutputFormat::Table => {
            let mut s = String::new();
            let _ = writeln!(s, "{:<6} {:<8} {:<28} {:>8}", "Method", "Visit", "Estimate (CI)", "P");
            for r in results {
                let multi = r.timepoints.len() > 1;
                for (i, t) in r.timepoints.iter().enumerate() {
                    let method = if i == 0 { r.method.name() } else { "" };
                    let visit = if multi { t.label.as_str() } else { "" };
                    let est = match (t.ci_low, t.ci_high) {
                        (Some(l), Some(u)) => format!("{:.3} ({:.3}, {:.3})", t.theta, l, u),
                        _ => format!("{:.3}", t.theta),
                    };
                    let p = t.p_value.map(format_p).unwrap_or_else(|| "-".into());
                    let _ = writeln!(s, "{method:<6} {visit:<8} {est:<28} {p:>8}");
                }
                let lm = r.landmark();
                let _ = writeln!(s, "{:<6} landmark {}: {}", "", lm.label, format_estimate(lm));
                if let Some(c) = &r.conversions {
                    let _ = writeln!(
                        s,
                        "{:<6} {:<8} NB={:.3} WO={:.3} SMD={:.3}",
                        "", "", c.net_benefit, c.win_odds, c.smd_equivalent
                    );
                }
                for w in &r.warnings {
                    let _ = writeln!(s, "warning: {w}");
                }
            }
            Ok(s)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{embedded_epds, EPDS_LISTING};

    #[test]
    fn digest_is_stable() {
        assert_eq!(
            input_digest(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_eq!(input_digest(EPDS_LISTING.as_bytes()).len(), 64);
    }

    #[test]
    fn epds_mmrm_json_round_trip() {
        let d = embedded_epds();
        let opts = EstimatorOptions::default();
        let r = analyze(&d, Method::Mmrm, &opts, "x").unwrap();
        assert_eq!(r.timepoints.len(), 6);
        assert_eq!(r.metadata.n.len(), 7);
        assert_eq!((r.metadata.n[0].control, r.metadata.n[0].treatment), (27, 34));
        let json = write_result(std::slice::from_ref(&r), OutputFormat::Json).unwrap();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert!(v["conversions"]["smd"].is_number());
        assert_eq!(v["direction"], "lower");
        let back: AnalysisResult = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
        let table = write_result(&[r], OutputFormat::Table).unwrap();
        assert!(table.contains("0.774 (0.609, 0.883)"));
    }

    #[test]
    fn degenerate_result_has_null_interval() {
        use crate::data::{Arm, Subject};
        let subjects = (0..6)
            .map(|i| Subject {
                id: i.to_string(),
                arm: if i < 3 { Arm::Control } else { Arm::Treatment },
                baseline: Some(1.0),
                outcomes: vec![Some(i as f64)],
            })
            .collect();
        let d = TrialData::new(subjects, Direction::Higher, "b", vec!["y".into()]).unwrap();
        let opts = EstimatorOptions::default().with_baseline_covariate(false);
        let r = analyze(&d, Method::Cca, &opts, "").unwrap();
        assert!(!r.warnings.is_empty());
        let v: serde_json::Value =
            serde_json::from_str(&write_result(&[r], OutputFormat::Json).unwrap()).unwrap();
        assert_eq!(v["timepoints"][0]["theta"], 1.0);
        assert!(v["timepoints"][0]["ci_low"].is_null());
        assert!(v["conversions"].is_null());
    }
}
