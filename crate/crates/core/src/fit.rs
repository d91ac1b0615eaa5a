//! Small dense Levenberg-Marquardt solver for the curve fits in this crate.

use nalgebra::{DMatrix, DVector};

pub(crate) struct LmOutcome {
    pub params: DVector<f64>,
    /// Sum of squared residuals at `params`.
    pub cost: f64,
    pub jacobian: DMatrix<f64>,
    pub residuals: DVector<f64>,
}

impl LmOutcome {
    /// Parameter covariance `s² (JᵀJ)⁻¹`, or `None` when `JᵀJ` is singular.
    pub fn covariance(&self) -> Option<DMatrix<f64>> {
        let m = self.residuals.len();
        let k = self.params.len();
        if m <= k {
            return None;
        }
        let jtj = self.jacobian.transpose() * &self.jacobian;
        let inv = jtj.try_inverse()?;
        if inv.iter().any(|x| !x.is_finite()) {
            return None;
        }
        Some(inv * (self.cost / (m - k) as f64))
    }
}

/// Minimize `Σ r(p)²` from `start`. `model` returns residuals and their
/// Jacobian with respect to the parameters.
pub(crate) fn levenberg_marquardt<F>(start: DVector<f64>, model: F, max_iter: usize) -> LmOutcome
where
    F: Fn(&DVector<f64>) -> (DVector<f64>, DMatrix<f64>),
{
    let mut p = start;
    let (mut r, mut j) = model(&p);
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    for _ in 0..max_iter {
        if cost == 0.0 {
            break;
        }
        let jtj = j.transpose() * &j;
        let grad = j.transpose() * &r;
        let mut improved = false;
        while lambda < 1e20 {
            let mut a = jtj.clone();
            for d in 0..a.nrows() {
                a[(d, d)] += lambda * jtj[(d, d)].max(1e-12);
            }
            let Some(step) = a.lu().solve(&(-&grad)) else {
                lambda *= 10.0;
                continue;
            };
            let candidate = &p + &step;
            let (rc, jc) = model(&candidate);
            let cc = rc.norm_squared();
            if cc.is_finite() && cc < cost {
                let small_step = step.amax() <= 1e-15 * (candidate.amax() + 1e-15);
                let small_gain = cost - cc <= 1e-30 + 1e-15 * cost;
                p = candidate;
                r = rc;
                j = jc;
                cost = cc;
                lambda = (lambda / 3.0).max(1e-15);
                improved = !(small_step && small_gain);
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
    }
    LmOutcome { params: p, cost, jacobian: j, residuals: r }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fits_exponential_exactly() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.5 * (-1.3 * x).exp()).collect();
        let out = levenberg_marquardt(
            DVector::from_vec(vec![1.0, -0.5]),
            |p| {
                let r = DVector::from_iterator(xs.len(), xs.iter().zip(&ys).map(|(x, y)| p[0] * (p[1] * x).exp() - y));
                let j = DMatrix::from_fn(xs.len(), 2, |i, c| {
                    let e = (p[1] * xs[i]).exp();
                    if c == 0 { e } else { p[0] * xs[i] * e }
                });
                (r, j)
            },
            200,
        );
        assert!((out.params[0] - 2.5).abs() < 1e-10);
        assert!((out.params[1] + 1.3).abs() < 1e-10);
    }
}
