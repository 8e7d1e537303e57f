//! Central finite-difference check of the end-to-end parameter gradient.

use rayon::prelude::*;

use super::loss::segmentation_loss;
use super::trainer::{batch_loss_and_grad, BatchItem};
use crate::error::Result;
use crate::network::{ForwardTape, NetworkParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub params_checked: usize,
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub analytic_at_worst: f64,
    pub numeric_at_worst: f64,
}

/// `|a - n| / max(|a|, |n|, floor)`.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

pub const REL_ERROR_FLOOR: f64 = 1e-6;

/// Compares every parameter's analytic gradient against
/// `(L(w + h) - L(w - h)) / 2h`. The perturbed losses come from
/// [`ForwardTape`], which recomputes only what a single parameter reaches.
pub fn check_gradients(params: &NetworkParams, items: &[BatchItem], step: f64) -> Result<GradCheckReport> {
    let analytic: Vec<f64> = batch_loss_and_grad(params, items)?.grads.values().copied().collect();
    let tapes = items
        .iter()
        .map(|it| ForwardTape::new(params, &it.image))
        .collect::<Result<Vec<_>>>()?;
    let loss_at = |index: usize, value: f64| -> Result<f64> {
        let mut total = 0.0;
        for (tape, it) in tapes.iter().zip(items) {
            total += segmentation_loss(&tape.probs_with(params, index, value)?, &it.target)?.0;
        }
        Ok(total / items.len().max(1) as f64)
    };
    let base: Vec<f64> = params.values().copied().collect();
    let n = analytic.len();
    let errors: Vec<Result<(f64, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| Ok((loss_at(i, base[i] + step)?, loss_at(i, base[i] - step)?)))
        .collect();
    let mut report = GradCheckReport {
        params_checked: n,
        max_rel_error: 0.0,
        worst_index: 0,
        analytic_at_worst: 0.0,
        numeric_at_worst: 0.0,
    };
    for (i, e) in errors.into_iter().enumerate() {
        let (plus, minus) = e?;
        let num = (plus - minus) / (2.0 * step);
        let rel = relative_error(analytic[i], num, REL_ERROR_FLOOR);
        if rel > report.max_rel_error || i == 0 {
            report.max_rel_error = rel;
            report.worst_index = i;
            report.analytic_at_worst = analytic[i];
            report.numeric_at_worst = num;
        }
    }
    Ok(report)
}
