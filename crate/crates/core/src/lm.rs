//! Small dense Levenberg-Marquardt solver for the lineshape fits.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub(crate) struct LmOutcome {
    pub params: DVector<f64>,
    /// Residual vector at `params`.
    pub residuals: DVector<f64>,
    /// `JᵀJ` at `params`.
    pub normal_matrix: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl LmOutcome {
    pub fn cost(&self) -> f64 {
        self.residuals.norm_squared()
    }
}

/// Minimizes `|r(p)|²`. `model` returns residuals and their Jacobian.
/// Converged when the largest relative parameter step drops below `xtol`,
/// or when no damping level reduces the cost any further.
pub(crate) fn levenberg_marquardt<F>(p0: DVector<f64>, mut model: F, max_iter: usize, xtol: f64) -> LmOutcome
where
    F: FnMut(&DVector<f64>) -> (DVector<f64>, DMatrix<f64>),
{
    let mut p = p0;
    let (mut r, mut jac) = model(&p);
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;

    for it in 1..=max_iter {
        let a = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        let dmax = a.diagonal().max().max(f64::MIN_POSITIVE);
        loop {
            let mut m = a.clone();
            for i in 0..m.nrows() {
                m[(i, i)] += lambda * a[(i, i)].max(1e-12 * dmax);
            }
            let Some(chol) = m.cholesky() else {
                lambda *= 10.0;
                if lambda > 1e16 {
                    return LmOutcome { params: p, residuals: r, normal_matrix: a, iterations: it, converged: false };
                }
                continue;
            };
            let step = chol.solve(&(-&g));
            let trial = &p + &step;
            let (r_new, jac_new) = model(&trial);
            let cost_new = r_new.norm_squared();
            if cost_new.is_finite() && cost_new < cost {
                let rel = step.iter().zip(trial.iter()).map(|(d, x)| d.abs() / (x.abs() + 1e-12)).fold(0.0, f64::max);
                p = trial;
                r = r_new;
                jac = jac_new;
                cost = cost_new;
                lambda = (lambda / 10.0).max(1e-12);
                if rel < xtol {
                    let a = jac.transpose() * &jac;
                    return LmOutcome { params: p, residuals: r, normal_matrix: a, iterations: it, converged: true };
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e16 {
                // no descent direction left: stationary point
                return LmOutcome { params: p, residuals: r, normal_matrix: a, iterations: it, converged: true };
            }
        }
    }
    let a = jac.transpose() * &jac;
    LmOutcome { params: p, residuals: r, normal_matrix: a, iterations: max_iter, converged: false }
}
