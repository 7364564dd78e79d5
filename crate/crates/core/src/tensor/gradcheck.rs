use super::{ParamSet, Tensor, TensorError};

/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-8);
    (analytic - numeric).abs() / denom
}

/// Outcome of a finite-difference comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub max_relative_error: f64,
    /// Parameter name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    /// Analytic and numeric derivative at the worst coordinate.
    pub worst_values: Option<(f64, f64)>,
    pub coordinates: usize,
}

/// Compares analytic gradients against central differences with step `step`.
///
/// `f` evaluates the loss at the given parameter values and returns it with
/// one gradient tensor per parameter, in parameter order.
pub fn grad_check<F>(params: &ParamSet, step: f64, mut f: F) -> Result<GradCheck, TensorError>
where
    F: FnMut(&ParamSet) -> Result<(f64, Vec<Tensor>), TensorError>,
{
    let (loss, grads) = f(params)?;
    if !loss.is_finite() {
        return Err(TensorError::NonFinite { op: "grad_check" });
    }
    if grads.len() != params.len() {
        return Err(TensorError::Invalid(format!(
            "expected {} gradients, got {}",
            params.len(),
            grads.len()
        )));
    }
    let mut work = params.clone();
    let mut report = GradCheck {
        max_relative_error: 0.0,
        worst: None,
        worst_values: None,
        coordinates: 0,
    };
    for (pi, grad) in grads.iter().enumerate() {
        let id = work.ids()[pi];
        for idx in 0..grad.data().len() {
            let original = work.value(id).data()[idx];
            work.value_mut(id).data_mut()[idx] = original + step;
            let (plus, _) = f(&work)?;
            work.value_mut(id).data_mut()[idx] = original - step;
            let (minus, _) = f(&work)?;
            work.value_mut(id).data_mut()[idx] = original;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(TensorError::NonFinite { op: "grad_check" });
            }
            let numeric = (plus - minus) / (2.0 * step);
            let err = relative_error(grad.data()[idx], numeric);
            report.coordinates += 1;
            if report.worst.is_none() || err > report.max_relative_error {
                report.max_relative_error = err;
                report.worst = Some((work.name(id).to_string(), idx));
                report.worst_values = Some((grad.data()[idx], numeric));
            }
        }
    }
    Ok(report)
}
