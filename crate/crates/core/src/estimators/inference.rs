use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

fn std_normal() -> Normal {
    Normal::standard()
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    std_normal().cdf(x)
}

/// Standard normal quantile.
pub fn norm_quantile(p: f64) -> f64 {
    std_normal().inverse_cdf(p)
}

/// Logit-scale test and interval for a win probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogitInference {
    pub statistic: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_value: f64,
}

fn expit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Delta-method inference on `logit(theta)`: the standard error there is
/// `se / (theta (1 - theta))`; the interval is mapped back with the logistic
/// function and the two-sided p-value tests `theta = 1/2`.
pub fn logit_inference(theta_hat: f64, std_error: f64, alpha: f64) -> Result<LogitInference> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if !theta_hat.is_finite() || !std_error.is_finite() || std_error < 0.0 {
        return Err(Error::Domain(format!(
            "invalid estimate {theta_hat} with standard error {std_error}"
        )));
    }
    if theta_hat <= 0.0 || theta_hat >= 1.0 || std_error == 0.0 {
        return Err(Error::DegenerateInference {
            theta_hat,
            std_error,
        });
    }
    let logit = (theta_hat / (1.0 - theta_hat)).ln();
    let se_logit = std_error / (theta_hat * (1.0 - theta_hat));
    let statistic = logit / se_logit;
    let z = norm_quantile(1.0 - alpha / 2.0);
    Ok(LogitInference {
        statistic,
        ci_low: expit(logit - z * se_logit),
        ci_high: expit(logit + z * se_logit),
        p_value: (2.0 * norm_cdf(-statistic.abs())).min(1.0),
    })
}

/// Alternative effect scales implied by a win probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectConversions {
    pub net_benefit: f64,
    pub win_odds: f64,
    /// Standardised mean difference that gives this win probability under
    /// homoscedastic normal outcomes.
    #[serde(rename = "smd")]
    pub smd_equivalent: f64,
}

pub fn convert_effects(theta_hat: f64) -> Result<EffectConversions> {
    if theta_hat.is_nan() {
        return Err(Error::Domain("win probability is NaN".into()));
    }
    if theta_hat <= 0.0 || theta_hat >= 1.0 {
        return Err(Error::DegenerateInference {
            theta_hat,
            std_error: f64::NAN,
        });
    }
    Ok(EffectConversions {
        net_benefit: 2.0 * theta_hat - 1.0,
        win_odds: theta_hat / (1.0 - theta_hat),
        smd_equivalent: std::f64::consts::SQRT_2 * norm_quantile(theta_hat),
    })
}

/// Inverse of the win-odds map.
pub fn theta_from_win_odds(win_odds: f64) -> f64 {
    win_odds / (1.0 + win_odds)
}
