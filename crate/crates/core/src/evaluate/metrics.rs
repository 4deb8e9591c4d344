use nalgebra::DMatrix;

use crate::error::{BlinError, Result};

/// `1 − Σ(ŷ − y)² / Σy²`, with no intercept adjustment.
pub fn r_squared(y_true: &[f64], y_hat: &[f64]) -> Result<f64> {
    if y_true.len() != y_hat.len() || y_true.is_empty() {
        return Err(BlinError::Shape(format!(
            "r_squared needs equal nonempty lengths, got {} and {}",
            y_true.len(),
            y_hat.len()
        )));
    }
    let den: f64 = y_true.iter().map(|v| v * v).sum();
    if den == 0.0 {
        return Err(BlinError::ZeroDenominator);
    }
    let num: f64 = y_true.iter().zip(y_hat).map(|(y, f)| (f - y).powi(2)).sum();
    Ok(1.0 - num / den)
}

/// R² pooled over a sequence of matrix slices.
pub fn r_squared_slices(y_true: &[DMatrix<f64>], y_hat: &[DMatrix<f64>]) -> Result<f64> {
    if y_true.len() != y_hat.len() || y_true.is_empty() {
        return Err(BlinError::Shape("slice counts differ or are zero".into()));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (y, f) in y_true.iter().zip(y_hat) {
        if y.shape() != f.shape() {
            return Err(BlinError::Shape(format!("slice shapes {:?} vs {:?}", y.shape(), f.shape())));
        }
        num += (f - y).norm_squared();
        den += y.norm_squared();
    }
    if den == 0.0 {
        return Err(BlinError::ZeroDenominator);
    }
    Ok(1.0 - num / den)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        let y = [1.0, -2.0, 0.5];
        assert_eq!(r_squared(&y, &y).unwrap(), 1.0);
        assert_eq!(r_squared(&y, &[0.0; 3]).unwrap(), 0.0);
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        assert_eq!(r_squared(&y, &neg).unwrap(), -3.0);
    }

    #[test]
    fn zero_denominator_errors() {
        assert!(matches!(r_squared(&[0.0, 0.0], &[1.0, 0.0]), Err(BlinError::ZeroDenominator)));
        assert!(r_squared(&[1.0], &[1.0, 2.0]).is_err());
    }
}
