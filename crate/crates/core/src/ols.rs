//! Ordinary least squares with the leverage-corrected (HC2) sandwich covariance.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative pivot tolerance for the rank check on `X'X`.
const RANK_TOL: f64 = 1e-10;

/// Regression design with labelled columns.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    rows: DMatrix<f64>,
    labels: Vec<String>,
}

impl DesignMatrix {
    pub fn new(rows: DMatrix<f64>, labels: Vec<String>) -> Result<Self> {
        if labels.len() != rows.ncols() {
            return Err(Error::Domain(format!(
                "{} labels for {} columns",
                labels.len(),
                rows.ncols()
            )));
        }
        if rows.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("design contains non-finite entries".into()));
        }
        Ok(DesignMatrix { rows, labels })
    }

    /// Intercept, 0/1 treatment indicator and an optional covariate.
    pub fn treatment(treatment: &[f64], covariate: Option<&[f64]>) -> Result<Self> {
        let n = treatment.len();
        if treatment.iter().any(|&g| g != 0.0 && g != 1.0) {
            return Err(Error::Domain("treatment column must be 0/1".into()));
        }
        let mut labels = vec!["intercept".to_string(), "treatment".to_string()];
        let p = if let Some(c) = covariate {
            if c.len() != n {
                return Err(Error::Domain("covariate length mismatch".into()));
            }
            labels.push("baseline".to_string());
            3
        } else {
            2
        };
        let rows = DMatrix::from_fn(n, p, |i, j| match j {
            0 => 1.0,
            1 => treatment[i],
            _ => covariate.unwrap()[i],
        });
        Self::new(rows, labels)
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn nrows(&self) -> usize {
        self.rows.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.rows.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub beta_hat: DVector<f64>,
    pub residuals: DVector<f64>,
    pub leverages: DVector<f64>,
    pub sandwich_vcov: DMatrix<f64>,
    xtx_inv: DMatrix<f64>,
}

impl OlsFit {
    /// `(X'X)^-1`, kept for the sandwich computation.
    pub fn bread(&self) -> &DMatrix<f64> {
        &self.xtx_inv
    }
}

/// Inverse of a symmetric positive semidefinite Gram matrix, or
/// `SingularDesign` when a pivot falls below the rank tolerance.
pub(crate) fn gram_inverse(xtx: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let scale = xtx.diagonal().iter().cloned().fold(0.0_f64, f64::max);
    if scale <= 0.0 {
        return Err(Error::SingularDesign);
    }
    let chol = xtx.clone().cholesky().ok_or(Error::SingularDesign)?;
    let l = chol.l_dirty();
    for k in 0..xtx.nrows() {
        if l[(k, k)] * l[(k, k)] < RANK_TOL * scale {
            return Err(Error::SingularDesign);
        }
    }
    Ok(chol.inverse())
}

pub fn fit_ols(x: &DesignMatrix, y: &[f64]) -> Result<OlsFit> {
    let (n, p) = (x.nrows(), x.ncols());
    if y.len() != n {
        return Err(Error::Domain(format!(
            "response has {} entries, design has {n} rows",
            y.len()
        )));
    }
    if n <= p {
        return Err(Error::InsufficientData(format!(
            "{n} observations for {p} coefficients"
        )));
    }
    let xm = x.matrix();
    let y = DVector::from_column_slice(y);
    let xtx_inv = gram_inverse(&(xm.transpose() * xm))?;
    let beta_hat = &xtx_inv * (xm.transpose() * &y);
    let residuals = &y - xm * &beta_hat;
    let leverages = DVector::from_fn(n, |i, _| {
        let row = xm.row(i);
        (row * &xtx_inv * row.transpose())[(0, 0)]
    });
    let mut fit = OlsFit {
        beta_hat,
        residuals,
        leverages,
        sandwich_vcov: DMatrix::zeros(p, p),
        xtx_inv,
    };
    fit.sandwich_vcov = sandwich_vcov(&fit, x)?;
    Ok(fit)
}

/// `(X'X)^-1 X' diag(e^2 / (1 - h)) X (X'X)^-1`.
pub fn sandwich_vcov(fit: &OlsFit, x: &DesignMatrix) -> Result<DMatrix<f64>> {
    let xm = x.matrix();
    let p = xm.ncols();
    let mut meat = DMatrix::zeros(p, p);
    for i in 0..xm.nrows() {
        let h = fit.leverages[i];
        if h >= 1.0 - 1e-12 {
            return Err(Error::Leverage { index: i, leverage: h });
        }
        let w = fit.residuals[i].powi(2) / (1.0 - h);
        let row = xm.row(i);
        meat += row.transpose() * row * w;
    }
    let v = &fit.xtx_inv * meat * &fit.xtx_inv;
    Ok((&v + v.transpose()) * 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn two_group_means() {
        let g = [0.0, 0.0, 1.0, 1.0];
        let y = [0.0, 0.5, 0.5, 1.0];
        let fit = fit_ols(&DesignMatrix::treatment(&g, None).unwrap(), &y).unwrap();
        assert_abs_diff_eq!(fit.beta_hat[0], 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(fit.beta_hat[1], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(fit.leverages.sum(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_response_has_zero_vcov() {
        let g = [0.0, 1.0, 0.0, 1.0, 1.0];
        let fit = fit_ols(&DesignMatrix::treatment(&g, None).unwrap(), &[0.3; 5]).unwrap();
        assert!(fit.residuals.iter().all(|e| e.abs() < 1e-14));
        assert!(fit.sandwich_vcov.iter().all(|v| v.abs() < 1e-28));
    }

    #[test]
    fn matches_normal_equation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 10;
        let xm = DMatrix::from_fn(n, 2, |_, j| if j == 0 { 1.0 } else { rng.random::<f64>() });
        let y: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let x = DesignMatrix::new(xm.clone(), vec!["a".into(), "b".into()]).unwrap();
        let fit = fit_ols(&x, &y).unwrap();
        // scalar normal equations for a simple regression
        let xs: Vec<f64> = (0..n).map(|i| xm[(i, 1)]).collect();
        let mx = xs.iter().sum::<f64>() / n as f64;
        let my = y.iter().sum::<f64>() / n as f64;
        let sxy: f64 = xs.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = xs.iter().map(|a| (a - mx).powi(2)).sum();
        let slope = sxy / sxx;
        assert_abs_diff_eq!(fit.beta_hat[1], slope, epsilon = 1e-10);
        assert_abs_diff_eq!(fit.beta_hat[0], my - slope * mx, epsilon = 1e-10);
    }

    #[test]
    fn sandwich_matches_brute_force_triple_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 8;
        let g: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
        let c: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let x = DesignMatrix::treatment(&g, Some(&c)).unwrap();
        let fit = fit_ols(&x, &y).unwrap();
        let xm = x.matrix();
        let p = 3;
        // element-wise evaluation of B * M * B
        let b = fit.bread();
        let mut omega = vec![0.0; n];
        for i in 0..n {
            let mut h = 0.0;
            for a in 0..p {
                for d in 0..p {
                    h += xm[(i, a)] * b[(a, d)] * xm[(i, d)];
                }
            }
            omega[i] = fit.residuals[i].powi(2) / (1.0 - h);
        }
        for r in 0..p {
            for s in 0..p {
                let mut v = 0.0;
                for a in 0..p {
                    for d in 0..p {
                        let mut m = 0.0;
                        for i in 0..n {
                            m += xm[(i, a)] * omega[i] * xm[(i, d)];
                        }
                        v += b[(r, a)] * m * b[(d, s)];
                    }
                }
                assert_abs_diff_eq!(fit.sandwich_vcov[(r, s)], v, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn two_group_sandwich_closed_form() {
        let g = [1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        let y = [0.9, 0.4, 0.7, 0.1, 0.3, 0.6, 0.2];
        let fit = fit_ols(&DesignMatrix::treatment(&g, None).unwrap(), &y).unwrap();
        let ss = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|x| (x - m).powi(2)).sum::<f64>()
        };
        let expected = ss(&y[..3]) / 6.0 + ss(&y[3..]) / 12.0;
        assert_abs_diff_eq!(fit.sandwich_vcov[(1, 1)], expected, epsilon = 1e-15);
    }

    #[test]
    fn rank_deficiency_detected() {
        let g = [1.0, 1.0, 1.0];
        let err = fit_ols(&DesignMatrix::treatment(&g, None).unwrap(), &[0.1, 0.2, 0.3]).unwrap_err();
        assert_eq!(err, Error::SingularDesign);
    }

    #[test]
    fn too_few_rows() {
        let err = fit_ols(&DesignMatrix::treatment(&[0.0, 1.0], None).unwrap(), &[0.1, 0.2]).unwrap_err();
        assert!(matches!(err, Error::InsufficientData(_)));
    }

    #[test]
    fn saturated_observation_hits_leverage_error() {
        // the lone treated subject has leverage 1
        let g = [1.0, 0.0, 0.0, 0.0];
        let err = fit_ols(&DesignMatrix::treatment(&g, None).unwrap(), &[0.1, 0.2, 0.3, 0.5]).unwrap_err();
        assert!(matches!(err, Error::Leverage { index: 0, .. }));
    }

    #[test]
    fn non_binary_treatment_rejected() {
        assert!(DesignMatrix::treatment(&[0.0, 2.0], None).is_err());
    }
}
