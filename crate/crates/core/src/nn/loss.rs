use crate::error::{Error, Result};

/// Mean squared error and its gradient with respect to `pred`.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::DimensionMismatch { expected: pred.len(), found: target.len() });
    }
    let n = pred.len() as f64;
    let loss = pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n;
    let grad = pred.iter().zip(target).map(|(p, t)| 2.0 * (p - t) / n).collect();
    Ok((loss, grad))
}

/// Categorical cross-entropy `-ln probs[class]` for a softmax output, with the
/// gradient with respect to the probabilities. Backpropagating it through the
/// softmax layer yields the familiar `probs - onehot(class)`.
pub fn cce_loss(probs: &[f64], class: usize) -> Result<(f64, Vec<f64>)> {
    if class >= probs.len() {
        return Err(Error::ClassOutOfRange { index: class, classes: probs.len() });
    }
    let p = probs[class].max(f64::MIN_POSITIVE);
    let mut grad = vec![0.0; probs.len()];
    grad[class] = -1.0 / p;
    Ok((-p.ln(), grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_of_exact_prediction_is_zero() {
        let (loss, grad) = mse_loss(&[0.5], &[0.5]).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(grad, vec![0.0]);
    }

    #[test]
    fn mse_shape_mismatch() {
        assert!(mse_loss(&[0.5, 0.1], &[0.5]).is_err());
    }

    #[test]
    fn cce_values() {
        let third = 1.0 / 3.0;
        let (loss, _) = cce_loss(&[third, third, third], 2).unwrap();
        assert!((loss - 3f64.ln()).abs() < 1e-12);
        assert!((loss - 1.0986).abs() < 1e-4);

        let (loss, grad) = cce_loss(&[0.7, 0.2, 0.1], 0).unwrap();
        assert!((loss - 0.356_674_943_938_732_4).abs() < 1e-12);
        assert_eq!(grad, vec![-1.0 / 0.7, 0.0, 0.0]);
    }

    #[test]
    fn cce_class_out_of_range() {
        assert!(matches!(
            cce_loss(&[0.5, 0.5], 2),
            Err(Error::ClassOutOfRange { index: 2, classes: 2 })
        ));
    }
}
