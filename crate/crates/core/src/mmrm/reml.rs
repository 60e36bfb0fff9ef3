//! Restricted (or full) log-likelihood of the multivariate linear model with
//! per-arm unstructured covariance, and its analytic gradient with respect to
//! log-Cholesky covariance parameters.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::{Estimation, ModelDesign, SubjectDesign};

/// Number of log-Cholesky parameters of a `t x t` covariance.
pub fn n_cov_params(t: usize) -> usize {
    t * (t + 1) / 2
}

/// Cholesky factor from row-major lower-triangle parameters, diagonal on the log scale.
pub fn cholesky_from_params(params: &[f64], t: usize) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(t, t);
    let mut k = 0;
    for a in 0..t {
        for c in 0..=a {
            l[(a, c)] = if a == c { params[k].exp() } else { params[k] };
            k += 1;
        }
    }
    l
}

pub fn covariance_from_params(params: &[f64], t: usize) -> DMatrix<f64> {
    let l = cholesky_from_params(params, t);
    &l * l.transpose()
}

/// Inverse of `covariance_from_params`; `None` if `sigma` is not positive definite.
pub fn params_from_covariance(sigma: &DMatrix<f64>) -> Option<Vec<f64>> {
    let t = sigma.nrows();
    let l = sigma.clone().cholesky()?.l();
    let mut out = Vec::with_capacity(n_cov_params(t));
    for a in 0..t {
        for c in 0..=a {
            out.push(if a == c { l[(a, a)].ln() } else { l[(a, c)] });
        }
    }
    Some(out)
}

struct Pattern {
    block: usize,
    observed: Vec<usize>,
    count: usize,
}

/// Subjects grouped by covariance block and observed-row pattern, so each
/// distinct `V_ij` is factorised once per evaluation.
pub(crate) struct Problem<'a> {
    subjects: Vec<&'a SubjectDesign>,
    pattern_of: Vec<usize>,
    patterns: Vec<Pattern>,
    t: usize,
    p: usize,
    n_blocks: usize,
    n_obs: usize,
    estimation: Estimation,
}

pub(crate) struct Evaluation {
    pub loglik: f64,
    pub beta: DVector<f64>,
    pub a_inv: DMatrix<f64>,
    pub gradient: Vec<f64>,
}

impl<'a> Problem<'a> {
    pub fn new(
        subjects: Vec<&'a SubjectDesign>,
        t: usize,
        p: usize,
        group_specific: bool,
        estimation: Estimation,
    ) -> Self {
        let n_blocks = if group_specific { 2 } else { 1 };
        let mut index: HashMap<(usize, Vec<usize>), usize> = HashMap::new();
        let mut patterns: Vec<Pattern> = Vec::new();
        let mut pattern_of = Vec::with_capacity(subjects.len());
        for s in &subjects {
            let block = if group_specific { s.arm.index() } else { 0 };
            let key = (block, s.observed.clone());
            let id = *index.entry(key).or_insert_with(|| {
                patterns.push(Pattern {
                    block,
                    observed: s.observed.clone(),
                    count: 0,
                });
                patterns.len() - 1
            });
            patterns[id].count += 1;
            pattern_of.push(id);
        }
        let n_obs = subjects.iter().map(|s| s.observed.len()).sum();
        Problem {
            subjects,
            pattern_of,
            patterns,
            t,
            p,
            n_blocks,
            n_obs,
            estimation,
        }
    }

    pub fn n_params(&self) -> usize {
        self.n_blocks * n_cov_params(self.t)
    }

    pub fn covariances(&self, params: &[f64]) -> Vec<DMatrix<f64>> {
        let m = n_cov_params(self.t);
        (0..self.n_blocks)
            .map(|b| covariance_from_params(&params[b * m..(b + 1) * m], self.t))
            .collect()
    }

    /// Log-likelihood, GLS coefficients and (optionally) the gradient.
    /// `None` when a covariance block or the information matrix is not
    /// numerically positive definite.
    pub fn evaluate(&self, params: &[f64], with_gradient: bool) -> Option<Evaluation> {
        let t = self.t;
        let p = self.p;
        let m = n_cov_params(t);
        let chol: Vec<DMatrix<f64>> = (0..self.n_blocks)
            .map(|b| cholesky_from_params(&params[b * m..(b + 1) * m], t))
            .collect();
        let sigma: Vec<DMatrix<f64>> = chol.iter().map(|l| l * l.transpose()).collect();

        let mut v_inv = Vec::with_capacity(self.patterns.len());
        let mut logdet_v = 0.0;
        for pat in &self.patterns {
            let k = pat.observed.len();
            let v = DMatrix::from_fn(k, k, |a, c| sigma[pat.block][(pat.observed[a], pat.observed[c])]);
            let ch = v.cholesky()?;
            let ld: f64 = ch.l_dirty().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
            if !ld.is_finite() {
                return None;
            }
            logdet_v += ld * pat.count as f64;
            v_inv.push(ch.inverse());
        }

        let mut a = DMatrix::<f64>::zeros(p, p);
        let mut rhs = DVector::<f64>::zeros(p);
        let mut vx: Vec<DMatrix<f64>> = Vec::with_capacity(self.subjects.len());
        for (s, &pid) in self.subjects.iter().zip(&self.pattern_of) {
            let b = &v_inv[pid] * &s.x;
            a += s.x.transpose() * &b;
            rhs += b.transpose() * &s.y;
            vx.push(b);
        }
        let a = (&a + a.transpose()) * 0.5;
        let a_chol = a.cholesky()?;
        let logdet_a: f64 = a_chol.l_dirty().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
        let a_inv = a_chol.inverse();
        let beta = &a_inv * &rhs;

        let mut quad = 0.0;
        let mut u_all = Vec::with_capacity(self.subjects.len());
        for (s, &pid) in self.subjects.iter().zip(&self.pattern_of) {
            let r = &s.y - &s.x * &beta;
            let u = &v_inv[pid] * &r;
            quad += r.dot(&u);
            u_all.push(u);
        }

        let (loglik, reml) = match self.estimation {
            Estimation::Reml => (
                -0.5 * (logdet_v + quad + logdet_a + (self.n_obs - p) as f64 * (2.0 * PI).ln()),
                true,
            ),
            Estimation::Ml => (-0.5 * (logdet_v + quad + self.n_obs as f64 * (2.0 * PI).ln()), false),
        };
        if !loglik.is_finite() {
            return None;
        }

        let mut gradient = Vec::new();
        if with_gradient {
            // dl/dSigma_b = -1/2 * sum over subjects of E'(V^-1 - u u' - [V^-1 X A^-1 X' V^-1]) E
            let mut g: Vec<DMatrix<f64>> = vec![DMatrix::zeros(t, t); self.n_blocks];
            for (pid, pat) in self.patterns.iter().enumerate() {
                scatter(&mut g[pat.block], &pat.observed, &v_inv[pid], -0.5 * pat.count as f64);
            }
            for (i, (&pid, u)) in self.pattern_of.iter().zip(&u_all).enumerate() {
                let pat = &self.patterns[pid];
                let mut mi = u * u.transpose();
                if reml {
                    mi += &vx[i] * &a_inv * vx[i].transpose();
                }
                scatter(&mut g[pat.block], &pat.observed, &mi, 0.5);
            }
            gradient.reserve(self.n_params());
            for b in 0..self.n_blocks {
                let d = 2.0 * &g[b] * &chol[b];
                for r in 0..t {
                    for c in 0..=r {
                        gradient.push(if r == c { d[(r, r)] * chol[b][(r, r)] } else { d[(r, c)] });
                    }
                }
            }
        }

        Some(Evaluation {
            loglik,
            beta,
            a_inv,
            gradient,
        })
    }
}

/// Log-likelihood of `design` at covariance parameters `params` (log-Cholesky
/// blocks, control first when arm-specific) and its analytic gradient.
/// `None` where a covariance block is not numerically positive definite.
pub fn objective_and_gradient(
    design: &ModelDesign,
    params: &[f64],
    estimation: Estimation,
) -> Option<(f64, Vec<f64>)> {
    let spec = design.spec;
    let problem = Problem::new(
        design.subjects.iter().collect(),
        spec.n_timepoints,
        spec.n_coefficients(),
        spec.group_specific_covariance,
        estimation,
    );
    if params.len() != problem.n_params() {
        return None;
    }
    let e = problem.evaluate(params, true)?;
    Some((e.loglik, e.gradient))
}

fn scatter(target: &mut DMatrix<f64>, idx: &[usize], m: &DMatrix<f64>, scale: f64) {
    for (a, &ra) in idx.iter().enumerate() {
        for (c, &rc) in idx.iter().enumerate() {
            target[(ra, rc)] += scale * m[(a, c)];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_round_trip() {
        let sigma = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let p = params_from_covariance(&sigma).unwrap();
        assert_eq!(p.len(), 6);
        let back = covariance_from_params(&p, 3);
        assert!((back - sigma).abs().max() < 1e-12);
    }

    #[test]
    fn non_pd_has_no_params() {
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(params_from_covariance(&sigma).is_none());
    }
}
