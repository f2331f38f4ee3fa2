//! Regression metrics over paired true and predicted speeds.

use crate::error::{Error, Result};

fn check_pairs(truth: &[f64], pred: &[f64]) -> Result<()> {
    if truth.len() != pred.len() {
        return Err(Error::LengthMismatch(truth.len(), pred.len()));
    }
    if truth.is_empty() {
        return Err(Error::Empty);
    }
    Ok(())
}

/// Mean absolute error.
pub fn mae(truth: &[f64], pred: &[f64]) -> Result<f64> {
    check_pairs(truth, pred)?;
    let total: f64 = truth.iter().zip(pred).map(|(t, p)| (t - p).abs()).sum();
    Ok(total / truth.len() as f64)
}

/// Mean absolute percentage error, per sample relative to the true speed.
pub fn mape(truth: &[f64], pred: &[f64]) -> Result<f64> {
    check_pairs(truth, pred)?;
    if let Some(&bad) = truth.iter().find(|&&t| t.is_nan() || t <= 0.0) {
        return Err(Error::NonPositiveTruth(bad));
    }
    let total: f64 = truth.iter().zip(pred).map(|(t, p)| (t - p).abs() / t).sum();
    Ok(100.0 * total / truth.len() as f64)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn residual_ratio(truth: &[f64], pred: &[f64], reference: &[f64]) -> Result<f64> {
    check_pairs(truth, pred)?;
    if truth.len() < 2 {
        return Err(Error::InvalidArgument("R^2 needs at least 2 pairs".into()));
    }
    let centre = mean(reference);
    let ss_tot: f64 = reference.iter().map(|r| (r - centre).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::DegenerateTruth);
    }
    let ss_res: f64 = truth.iter().zip(pred).map(|(t, p)| (t - p).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Coefficient of determination with the total sum of squares taken about
/// the mean of the true values.
pub fn r2(truth: &[f64], pred: &[f64]) -> Result<f64> {
    residual_ratio(truth, pred, truth)
}

/// Variant whose denominator is the spread of the predictions about their
/// own mean. Kept for comparison with results reported that way; it is not
/// bounded above by 1 and the constant predictor makes it undefined.
pub fn r2_about_predictions(truth: &[f64], pred: &[f64]) -> Result<f64> {
    residual_ratio(truth, pred, pred)
}
