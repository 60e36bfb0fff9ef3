//! Quasi-Newton minimiser with backtracking line search.

#[derive(Debug, Clone)]
pub(crate) struct Minimum {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Objective at the start point and after every accepted step.
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Settings {
    pub max_iter: usize,
    pub rel_tol: f64,
    pub step_tol: f64,
    pub grad_tol: f64,
    pub max_step: f64,
}

const ARMIJO: f64 = 1e-4;

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimises `f`, which returns `None` where the objective is undefined.
/// The start point must be feasible.
pub(crate) fn bfgs<F>(mut f: F, x0: Vec<f64>, s: Settings) -> Option<Minimum>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let (mut fx, mut g) = f(&x0)?;
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let mut x = x0;
    let mut h = identity(n);
    let mut trace = vec![fx];
    let mut fresh = true;
    let mut iterations = 0;
    let mut converged = inf_norm(&g) <= s.grad_tol * fx.abs().max(1.0);

    while !converged && iterations < s.max_iter {
        let mut d: Vec<f64> = (0..n).map(|i| -dot(&h[i], &g)).collect();
        let mut slope = dot(&g, &d);
        if slope >= 0.0 {
            h = identity(n);
            fresh = true;
            d = g.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
        }
        let longest = inf_norm(&d);
        let mut alpha = if longest > s.max_step { s.max_step / longest } else { 1.0 };

        let mut accepted = None;
        while alpha > 1e-14 {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + alpha * di).collect();
            if let Some((ft, gt)) = f(&trial) {
                if ft.is_finite()
                    && gt.iter().all(|v| v.is_finite())
                    && ft <= fx + ARMIJO * alpha * slope
                {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            alpha *= 0.5;
        }

        let Some((x_new, f_new, g_new)) = accepted else {
            if fresh {
                // steepest descent also failed: this is as good as it gets
                converged = inf_norm(&g) <= 1e-3 * fx.abs().max(1.0);
                break;
            }
            h = identity(n);
            fresh = true;
            continue;
        };

        iterations += 1;
        let step: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let dg: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let rel_change = (fx - f_new).abs() / fx.abs().max(1.0);
        let step_norm = inf_norm(&step);
        let sy = dot(&step, &dg);
        if sy > 1e-12 * dot(&dg, &dg).sqrt() * dot(&step, &step).sqrt() {
            if fresh {
                // Shanno scaling of the initial inverse Hessian
                let scale = sy / dot(&dg, &dg);
                h.iter_mut().for_each(|row| row.iter_mut().for_each(|v| *v *= scale));
            }
            bfgs_update(&mut h, &step, &dg, sy);
            fresh = false;
        }
        x = x_new;
        fx = f_new;
        g = g_new;
        trace.push(fx);

        let grad = inf_norm(&g);
        let scale = fx.abs().max(1.0);
        converged = grad <= s.grad_tol * scale
            || ((rel_change < s.rel_tol || step_norm < s.step_tol) && grad <= 1e-3 * scale);
    }

    Some(Minimum {
        x,
        iterations,
        converged,
        trace,
    })
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

/// Inverse-Hessian update `H <- (I - r s y') H (I - r y s') + r s s'`.
fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let r = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| dot(&h[i], y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i][j] += (1.0 + r * yhy) * r * s[i] * s[j] - r * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings() -> Settings {
        Settings {
            max_iter: 500,
            rel_tol: 1e-14,
            step_tol: 1e-12,
            grad_tol: 1e-10,
            max_step: 10.0,
        }
    }

    #[test]
    fn minimises_rosenbrock() {
        let rosen = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
            Some((f, g))
        };
        let m = bfgs(rosen, vec![-1.2, 1.0], settings()).unwrap();
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] - 1.0).abs() < 1e-6);
        assert!(m.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn respects_infeasible_region() {
        // log barrier: undefined for x <= 0
        let f = |x: &[f64]| {
            if x[0] <= 0.0 {
                None
            } else {
                Some((x[0] - x[0].ln(), vec![1.0 - 1.0 / x[0]]))
            }
        };
        let m = bfgs(f, vec![5.0], settings()).unwrap();
        assert!((m.x[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn infeasible_start_is_none() {
        assert!(bfgs(|_: &[f64]| None, vec![0.0], settings()).is_none());
    }
}
