//! Central finite-difference gradient oracle.
//!
//! `finite_diff_check` perturbs every entry of every parameter by `±epsilon`,
//! re-evaluates the loss through a caller-supplied closure, and compares the
//! numeric gradient against the analytic one. The closure only ever runs the
//! forward path, so the oracle stays independent of the backward code it
//! verifies.

use super::matrix::Matrix;

/// Comparison result for one named parameter.
#[derive(Debug, Clone)]
pub struct ParamCheck {
    pub name: String,
    /// Largest absolute analytic-vs-numeric difference over entries.
    pub max_abs_diff: f64,
    /// Gradient scale: max absolute entry across both gradients.
    pub scale: f64,
    /// `max_abs_diff` relative to `scale` (0 when both gradients vanish).
    pub rel_error: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
    pub max_rel_error: f64,
}

impl GradCheckReport {
    pub fn worst_param(&self) -> &str {
        self.params
            .iter()
            .max_by(|a, b| a.rel_error.total_cmp(&b.rel_error))
            .map(|p| p.name.as_str())
            .unwrap_or("<none>")
    }
}

/// Scales below this are indistinguishable from central-difference rounding
/// noise (~|f| * 2e-10 at eps 1e-6); both gradients count as zero there. A
/// parameter can have an exactly-zero gradient for structural reasons, e.g. a
/// row-constant shift feeding a softmax.
const ZERO_GRAD_TOL: f64 = 1e-7;

/// Compare `analytic` gradients (one per parameter, same order) against
/// central finite differences of `loss` with step `epsilon`.
///
/// The relative error is measured per parameter against the larger of the two
/// gradients' max-abs entries; a parameter whose gradients both stay below
/// [`ZERO_GRAD_TOL`] scores zero. `loss` must be deterministic.
pub fn finite_diff_check<F>(
    params: &[(String, Matrix)],
    analytic: &[Matrix],
    loss: F,
    epsilon: f64,
) -> GradCheckReport
where
    F: Fn(&[(String, Matrix)]) -> f64,
{
    assert_eq!(
        params.len(),
        analytic.len(),
        "finite_diff_check: {} params but {} analytic gradients",
        params.len(),
        analytic.len()
    );
    let mut work: Vec<(String, Matrix)> = params.to_vec();
    let mut checks = Vec::with_capacity(params.len());
    for (k, (name, base)) in params.iter().enumerate() {
        let grad = &analytic[k];
        assert_eq!(
            grad.shape(),
            base.shape(),
            "analytic gradient shape mismatch for {name}"
        );
        let mut max_abs_diff = 0.0f64;
        let mut scale = grad.max_abs();
        for e in 0..base.data().len() {
            let orig = base.data()[e];
            work[k].1.data_mut()[e] = orig + epsilon;
            let plus = loss(&work);
            work[k].1.data_mut()[e] = orig - epsilon;
            let minus = loss(&work);
            work[k].1.data_mut()[e] = orig;
            let numeric = (plus - minus) / (2.0 * epsilon);
            scale = scale.max(numeric.abs());
            max_abs_diff = max_abs_diff.max((numeric - grad.data()[e]).abs());
        }
        let rel_error = if scale <= ZERO_GRAD_TOL { 0.0 } else { max_abs_diff / scale };
        checks.push(ParamCheck { name: name.clone(), max_abs_diff, scale, rel_error });
    }
    let max_rel_error = checks.iter().fold(0.0f64, |acc, c| acc.max(c.rel_error));
    GradCheckReport { params: checks, max_rel_error }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::Tape;

    #[test]
    fn quadratic_form_gradient_is_exact_to_1e7() {
        // f(w) = sum((w A) .* w) with fixed A; df/dw = w(A + A^T)
        let a = Matrix::from_rows(&[vec![2.0, 1.0], vec![0.5, 3.0]]);
        let w0 = Matrix::from_rows(&[vec![0.7, -1.2]]);
        let eval = |p: &[(String, Matrix)]| -> f64 {
            let mut t = Tape::new();
            let w = t.param(p[0].1.clone());
            let ac = t.constant(a.clone());
            let wa = t.matmul(w, ac);
            let q = t.mul_elem(wa, w);
            let s = t.sum_all(q);
            t.value(s).get(0, 0)
        };
        let asum = a.add(&a.transpose());
        let analytic = vec![w0.matmul(&asum)];
        let params = vec![("w".to_string(), w0)];
        let report = finite_diff_check(&params, &analytic, eval, 1e-6);
        assert!(report.max_rel_error < 1e-7, "rel error {}", report.max_rel_error);
    }

    #[test]
    fn constant_function_scores_zero() {
        let params = vec![("w".to_string(), Matrix::filled(2, 2, 0.3))];
        let analytic = vec![Matrix::zeros(2, 2)];
        let report = finite_diff_check(&params, &analytic, |_| 4.2, 1e-6);
        assert_eq!(report.max_rel_error, 0.0);
        assert_eq!(report.params[0].max_abs_diff, 0.0);
    }
}
