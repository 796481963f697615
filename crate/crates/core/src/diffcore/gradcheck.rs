use crate::diffcore::array::Array;
use crate::error::{Error, Result};

/// Gradient magnitudes below this are compared absolutely.
const REL_FLOOR: f64 = 1e-6;

/// Largest relative error between `analytic` and central differences of `f`
/// around `theta`, over every coordinate.
///
/// The relative error of a coordinate is `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn grad_check<F>(mut f: F, theta: &Array, analytic: &Array, h: f64) -> Result<f64>
where
    F: FnMut(&Array) -> f64,
{
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("finite-difference step must be positive, got {h}")));
    }
    if theta.shape() != analytic.shape() {
        return Err(Error::shape(
            "grad_check",
            format!("theta {:?} vs gradient {:?}", theta.shape(), analytic.shape()),
        ));
    }
    let mut probe = theta.clone();
    let mut worst: f64 = 0.0;
    for i in 0..theta.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + h;
        let plus = f(&probe);
        probe.data_mut()[i] = orig - h;
        let minus = f(&probe);
        probe.data_mut()[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite(format!("grad_check objective at coordinate {i}")));
        }
        let numeric = (plus - minus) / (2.0 * h);
        let a = analytic.data()[i];
        let denom = a.abs().max(numeric.abs()).max(REL_FLOOR);
        worst = worst.max((a - numeric).abs() / denom);
    }
    Ok(worst)
}
