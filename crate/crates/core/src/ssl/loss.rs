//! Segmentation losses. Gradients are returned with respect to the
//! pre-softmax logits in pixel-major `[pixel][class]` layout so they feed
//! straight into [`crate::network::backward`].

use crate::data::{LabelMap, ProbMap};
use crate::error::{Error, Result};

pub const CE_PROB_FLOOR: f64 = 1e-12;
pub const DICE_SMOOTH: f64 = 1e-5;

fn check(p: &ProbMap, y: &LabelMap) -> Result<()> {
    if p.height() != y.height() || p.width() != y.width() {
        return Err(Error::shape(format!(
            "prediction {}x{} vs target {}x{}",
            p.height(),
            p.width(),
            y.height(),
            y.width()
        )));
    }
    if usize::from(y.max_class()) >= p.num_classes() {
        return Err(Error::shape(format!(
            "target class {} out of range for {} classes",
            y.max_class(),
            p.num_classes()
        )));
    }
    Ok(())
}

/// Mean pixel cross-entropy `-ln p[y]` (probabilities floored at 1e-12)
/// and its logit gradient `(p - onehot(y)) / pixels`.
pub fn cross_entropy_loss(p: &ProbMap, y: &LabelMap) -> Result<(f64, Vec<f64>)> {
    check(p, y)?;
    let c = p.num_classes();
    let n = p.num_pixels() as f64;
    let mut loss = 0.0;
    let mut grad = p.data().to_vec();
    for (i, &t) in y.data().iter().enumerate() {
        let t = usize::from(t);
        loss -= p.data()[i * c + t].max(CE_PROB_FLOOR).ln();
        grad[i * c + t] -= 1.0;
    }
    grad.iter_mut().for_each(|g| *g /= n);
    Ok((loss / n, grad))
}

/// Soft Dice over the foreground classes:
/// `1 - mean_c (2 sum p_c y_c + eps) / (sum p_c + sum y_c + eps)`.
/// Returns the loss and its gradient with respect to the probabilities.
pub fn soft_dice_loss(p: &ProbMap, y: &LabelMap) -> Result<(f64, Vec<f64>)> {
    check(p, y)?;
    let c = p.num_classes();
    let fg = (c - 1) as f64;
    let mut inter = vec![0.0; c];
    let mut psum = vec![0.0; c];
    let mut ysum = vec![0.0; c];
    for (px, &t) in p.pixels().zip(y.data()) {
        for k in 1..c {
            psum[k] += px[k];
        }
        let t = usize::from(t);
        if t > 0 {
            inter[t] += px[t];
            ysum[t] += 1.0;
        }
    }
    let mut mean_dice = 0.0;
    let mut num = vec![0.0; c];
    let mut den = vec![0.0; c];
    for k in 1..c {
        num[k] = 2.0 * inter[k] + DICE_SMOOTH;
        den[k] = psum[k] + ysum[k] + DICE_SMOOTH;
        mean_dice += num[k] / den[k] / fg;
    }
    let mut grad = vec![0.0; p.data().len()];
    for (i, &t) in y.data().iter().enumerate() {
        let t = usize::from(t);
        for k in 1..c {
            let yk = if t == k { 1.0 } else { 0.0 };
            grad[i * c + k] = -(2.0 * yk * den[k] - num[k]) / (den[k] * den[k]) / fg;
        }
    }
    Ok((1.0 - mean_dice, grad))
}

/// Chains a probability gradient through the per-pixel softmax:
/// `dL/dz_k = p_k (g_k - sum_j p_j g_j)`.
pub fn softmax_backward(p: &ProbMap, grad_probs: &[f64]) -> Vec<f64> {
    let c = p.num_classes();
    let mut out = vec![0.0; grad_probs.len()];
    for ((px, g), o) in p.pixels().zip(grad_probs.chunks_exact(c)).zip(out.chunks_exact_mut(c)) {
        let dot: f64 = px.iter().zip(g).map(|(a, b)| a * b).sum();
        for k in 0..c {
            o[k] = px[k] * (g[k] - dot);
        }
    }
    out
}

/// Cross-entropy plus soft Dice for one prediction, with the logit
/// gradient of the sum.
pub fn segmentation_loss(p: &ProbMap, y: &LabelMap) -> Result<(f64, Vec<f64>)> {
    let (ce, mut grad) = cross_entropy_loss(p, y)?;
    let (dl, dgrad) = soft_dice_loss(p, y)?;
    for (g, d) in grad.iter_mut().zip(softmax_backward(p, &dgrad)) {
        *g += d;
    }
    Ok((ce + dl, grad))
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnifiedLoss {
    /// Mean over samples of cross-entropy + soft Dice.
    pub total: f64,
    pub per_sample: Vec<f64>,
    /// Logit gradient of `total` for each sample.
    pub grad_logits: Vec<Vec<f64>>,
}

/// Labeled and pseudo-labeled predictions treated as one joint batch:
/// every sample weighs the same, with no separate unlabeled weight.
pub fn unified_loss(preds: &[&ProbMap], targets: &[&LabelMap]) -> Result<UnifiedLoss> {
    if preds.len() != targets.len() {
        return Err(Error::shape(format!(
            "{} predictions vs {} targets",
            preds.len(),
            targets.len()
        )));
    }
    if preds.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let b = preds.len() as f64;
    let mut per_sample = Vec::with_capacity(preds.len());
    let mut grad_logits = Vec::with_capacity(preds.len());
    for (p, y) in preds.iter().zip(targets) {
        let (l, mut g) = segmentation_loss(p, y)?;
        g.iter_mut().for_each(|v| *v /= b);
        per_sample.push(l);
        grad_logits.push(g);
    }
    Ok(UnifiedLoss {
        total: per_sample.iter().sum::<f64>() / b,
        per_sample,
        grad_logits,
    })
}
