use super::{NumKitError, Result};

/// Compare an analytic gradient against central finite differences.
///
/// Returns the maximum over coordinates of
/// `|analytic - numeric| / max(1, |numeric|)`.
pub fn grad_check<F>(mut f: F, params: &[f64], analytic: &[f64], h: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if params.len() != analytic.len() {
        return Err(NumKitError::Shape(format!(
            "grad_check: {} params vs {} analytic entries",
            params.len(),
            analytic.len()
        )));
    }
    let mut work = params.to_vec();
    let mut max_err: f64 = 0.0;
    for i in 0..params.len() {
        let orig = work[i];
        work[i] = orig + h;
        let fp = f(&work)?;
        work[i] = orig - h;
        let fm = f(&work)?;
        work[i] = orig;
        if !fp.is_finite() || !fm.is_finite() {
            return Err(NumKitError::Numeric("non-finite function value in grad_check".into()));
        }
        let numeric = (fp - fm) / (2.0 * h);
        let err = (analytic[i] - numeric).abs() / numeric.abs().max(1.0);
        max_err = max_err.max(err);
    }
    Ok(max_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_function_checks_out() {
        // f(x) = x^2 at x = 3: analytic gradient 6
        let err = grad_check(|p| Ok(p[0] * p[0]), &[3.0], &[6.0], 1e-5).unwrap();
        assert!(err < 1e-8, "err={err}");
    }

    #[test]
    fn hinge_away_from_kink_is_exact() {
        // f(x) = max(0, 1 - x) at x = 3 is locally linear with gradient 0
        let f = |p: &[f64]| Ok((1.0 - p[0]).max(0.0));
        let err = grad_check(f, &[3.0], &[0.0], 1e-5).unwrap();
        assert!(err < 1e-12, "err={err}");
        // and at x = -1 the gradient is -1
        let err = grad_check(f, &[-1.0], &[-1.0], 1e-5).unwrap();
        assert!(err < 1e-10, "err={err}");
    }

    #[test]
    fn constant_function_has_zero_gradient() {
        let err = grad_check(|_| Ok(7.5), &[1.0, 2.0], &[0.0, 0.0], 1e-5).unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn wrong_gradient_is_caught() {
        let err = grad_check(|p| Ok(p[0] * p[0]), &[3.0], &[5.0], 1e-5).unwrap();
        assert!(err > 0.1);
    }

    #[test]
    fn non_finite_function_is_an_error() {
        let r = grad_check(|p| Ok(p[0].ln()), &[0.0], &[0.0], 1e-5);
        assert!(r.is_err());
    }
}
