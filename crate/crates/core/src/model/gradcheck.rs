use super::LossResult;
use crate::Result;

/// Largest relative error between the analytic gradient of `f` at `point`
/// and central differences with step `eps`. The denominator per coordinate
/// is `max(|analytic|, |numeric|, 1e-8)`.
pub fn finite_diff_check<F>(f: F, point: &[f64], eps: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<LossResult>,
{
    assert!(eps > 0.0, "eps must be positive");
    let analytic = f(point)?.grad;
    let mut x = point.to_vec();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + eps;
        let up = f(&x)?.value;
        x[i] = orig - eps;
        let down = f(&x)?.value;
        x[i] = orig;
        let numeric = (up - down) / (2.0 * eps);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-8);
        worst = worst.max((analytic[i] - numeric).abs() / denom);
    }
    Ok(worst)
}

/// Relative error of the whole gradient vector,
/// `||analytic - numeric|| / max(||analytic||, ||numeric||)`, with central
/// differences of step `eps`. Zero when both vectors vanish.
///
/// Unlike [`finite_diff_check`] this is not dominated by coordinates whose
/// gradient is near the rounding noise of the loss value.
pub fn finite_diff_norm_error<F>(f: F, point: &[f64], eps: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<LossResult>,
{
    assert!(eps > 0.0, "eps must be positive");
    let analytic = f(point)?.grad;
    let mut x = point.to_vec();
    let (mut diff, mut na, mut nn) = (0.0, 0.0, 0.0);
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + eps;
        let up = f(&x)?.value;
        x[i] = orig - eps;
        let down = f(&x)?.value;
        x[i] = orig;
        let numeric = (up - down) / (2.0 * eps);
        diff += (analytic[i] - numeric).powi(2);
        na += analytic[i].powi(2);
        nn += numeric.powi(2);
    }
    let denom = na.max(nn).sqrt();
    Ok(if denom == 0.0 { 0.0 } else { diff.sqrt() / denom })
}

/// [`finite_diff_check`] for a `(scores, gold)` loss.
pub fn finite_diff_check_loss<F>(loss: F, scores: &[f64], gold: &[f64], eps: f64) -> Result<f64>
where
    F: Fn(&[f64], &[f64]) -> Result<LossResult>,
{
    finite_diff_check(|s| loss(s, gold), scores, eps)
}
