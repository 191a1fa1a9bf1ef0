//! Central finite-difference validation of analytic gradients.

use crate::error::{Error, Result};
use crate::tensor::Parameter;

/// Compares the gradients stored in `params` against central finite
/// differences of `loss_fn` and returns the maximum relative error
/// `|analytic - cd| / max(|analytic|, |cd|, 1e-8)`.
///
/// `loss_fn` must be a pure function of the parameter values (it may not
/// touch the stored gradients). Call the analytic backward to populate
/// `params[i].grad` before invoking this.
pub fn grad_check<F>(mut loss_fn: F, params: &mut [Parameter], h: f64) -> Result<f64>
where
    F: FnMut(&[Parameter]) -> Result<f64>,
{
    if h <= 0.0 {
        return Err(Error::config(format!("finite-difference step h must be > 0, got {h}")));
    }
    let mut max_rel = 0.0f64;
    for i in 0..params.len() {
        for j in 0..params[i].value.values.len() {
            let orig = params[i].value.values[j];
            params[i].value.values[j] = orig + h;
            let plus = loss_fn(params)?;
            params[i].value.values[j] = orig - h;
            let minus = loss_fn(params)?;
            params[i].value.values[j] = orig;

            let cd = (plus - minus) / (2.0 * h);
            let analytic = params[i].grad.values[j];
            let rel = (analytic - cd).abs() / analytic.abs().max(cd.abs()).max(1e-8);
            if rel > max_rel {
                max_rel = rel;
            }
        }
    }
    Ok(max_rel)
}
