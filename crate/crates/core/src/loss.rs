//! Softmax cross-entropy for 2-class heads, stabilized in log space.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(logits: &Tensor) -> Tensor {
    let c = logits.cols();
    let mut out = logits.clone();
    for row in out.data_mut().chunks_mut(c) {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln()
}

/// Mean negative log-likelihood over the batch and its gradient wrt the
/// logits: `(softmax − onehot) / batch`.
///
/// The loss is computed as `logsumexp(row) − row[label]`, which stays
/// finite for saturated logits where `log(softmax)` would overflow.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[u8]) -> Result<(f64, Tensor)> {
    if logits.shape().len() != 2 {
        return Err(Error::Dimension(format!(
            "logits must be [batch × classes], got {:?}",
            logits.shape()
        )));
    }
    let (batch, classes) = (logits.rows(), logits.cols());
    if batch == 0 {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    if labels.len() != batch {
        return Err(Error::Dimension(format!(
            "{} labels for batch of {}",
            labels.len(),
            batch
        )));
    }
    if let Some(bad) = labels.iter().find(|&&l| usize::from(l) >= classes) {
        return Err(Error::InvalidArgument(format!(
            "label {bad} out of range for {classes} classes"
        )));
    }
    let mut grad = softmax_rows(logits);
    let mut total = 0.0;
    let inv = 1.0 / batch as f64;
    for (r, &label) in labels.iter().enumerate() {
        let row = logits.row(r);
        total += log_sum_exp(row) - row[usize::from(label)];
        let grow = &mut grad.data_mut()[r * classes..(r + 1) * classes];
        grow[usize::from(label)] -= 1.0;
        for v in grow.iter_mut() {
            *v *= inv;
        }
    }
    Ok((total * inv, grad))
}
