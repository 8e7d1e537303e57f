//! Pseudo-labels, per-image entropy scores and the reverse filter that
//! drops the most confident unlabeled samples.

use std::cmp::Ordering;

use crate::data::{LabelMap, ProbMap};

/// Per-pixel argmax with no confidence threshold. Ties go to the lowest
/// class index.
pub fn make_pseudo_label(p: &ProbMap) -> LabelMap {
    let data = p
        .pixels()
        .map(|px| {
            let mut best = 0;
            for k in 1..px.len() {
                if px[k] > px[best] {
                    best = k;
                }
            }
            best as u8
        })
        .collect();
    LabelMap::new(p.height(), p.width(), data).expect("one label per pixel")
}

/// Mean over pixels of `-sum_c p_c ln p_c` (nats, `0 ln 0 = 0`), clamped
/// to `[0, ln C]` against rounding.
pub fn image_entropy(p: &ProbMap) -> f64 {
    let total: f64 = p
        .pixels()
        .map(|px| -px.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>())
        .sum();
    let mean = total / p.num_pixels() as f64;
    mean.clamp(0.0, (p.num_classes() as f64).ln())
}

#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyScore {
    pub sample_id: String,
    pub score: f64,
}

impl UncertaintyScore {
    pub fn new(sample_id: impl Into<String>, score: f64) -> Self {
        Self {
            sample_id: sample_id.into(),
            score,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FilterOutcome {
    /// Surviving ids, in input order.
    pub retained: Vec<String>,
    /// Removed samples, lowest score first.
    pub dropped: Vec<UncertaintyScore>,
}

/// Number of samples a filter round removes: `floor(fraction * n)`. The
/// small epsilon keeps products such as `0.15 * 20` from landing just
/// below an integer.
pub fn drop_count(drop_fraction: f64, n: usize) -> usize {
    ((drop_fraction * n as f64 + 1e-9).floor() as usize).min(n)
}

/// Removes the `floor(drop_fraction * n)` lowest-entropy samples. Equal
/// scores are ordered by sample id, so the lexicographically smaller id
/// goes first.
pub fn filter_unlabeled(scores: &[UncertaintyScore], drop_fraction: f64) -> FilterOutcome {
    let k = drop_count(drop_fraction, scores.len());
    let mut order: Vec<&UncertaintyScore> = scores.iter().collect();
    order.sort_by(|a, b| match a.score.total_cmp(&b.score) {
        Ordering::Equal => a.sample_id.cmp(&b.sample_id),
        o => o,
    });
    let dropped: Vec<UncertaintyScore> = order[..k].iter().map(|s| (*s).clone()).collect();
    let dropped_ids: std::collections::HashSet<&str> = dropped.iter().map(|s| s.sample_id.as_str()).collect();
    FilterOutcome {
        retained: scores
            .iter()
            .filter(|s| !dropped_ids.contains(s.sample_id.as_str()))
            .map(|s| s.sample_id.clone())
            .collect(),
        dropped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pm(c: usize, data: Vec<f64>) -> ProbMap {
        let n = data.len() / c;
        ProbMap::new(1, n, c, data).unwrap()
    }

    #[test]
    fn argmax_and_ties() {
        let p = pm(3, vec![0.2, 0.7, 0.1]);
        assert_eq!(make_pseudo_label(&p).data(), &[1]);
        let p = pm(2, vec![0.5, 0.5]);
        assert_eq!(make_pseudo_label(&p).data(), &[0]);
        let p = pm(3, vec![0.1, 0.45, 0.45]);
        assert_eq!(make_pseudo_label(&p).data(), &[1]);
    }

    #[test]
    fn entropy_cases() {
        assert_eq!(image_entropy(&pm(3, vec![0.0, 1.0, 0.0, 1.0, 0.0, 0.0])), 0.0);
        let u = pm(4, vec![0.25; 8]);
        assert!((image_entropy(&u) - 4f64.ln()).abs() < 1e-12);
        // half one-hot, half uniform over two classes
        let half = pm(2, vec![1.0, 0.0, 0.5, 0.5]);
        assert!((image_entropy(&half) - 2f64.ln() / 2.0).abs() < 1e-15);
    }

    fn scores(pairs: &[(&str, f64)]) -> Vec<UncertaintyScore> {
        pairs.iter().map(|(id, s)| UncertaintyScore::new(*id, *s)).collect()
    }

    #[test]
    fn drops_the_lowest() {
        let s = scores(&[("a", 0.9), ("b", 0.5), ("c", 0.3), ("d", 0.1)]);
        let out = filter_unlabeled(&s, 0.25);
        assert_eq!(out.retained, vec!["a", "b", "c"]);
        assert_eq!(out.dropped, vec![UncertaintyScore::new("d", 0.1)]);
        assert_eq!(filter_unlabeled(&s, 0.0).retained, vec!["a", "b", "c", "d"]);
    }

    #[test]
    fn ties_drop_smallest_ids() {
        let s = scores(&[("q", 0.4), ("b", 0.4), ("z", 0.4), ("a", 0.4)]);
        let out = filter_unlabeled(&s, 0.5);
        let ids: Vec<&str> = out.dropped.iter().map(|d| d.sample_id.as_str()).collect();
        assert_eq!(ids, vec!["a", "b"]);
        assert_eq!(out.retained, vec!["q", "z"]);
    }

    #[test]
    fn floor_rule() {
        assert_eq!(drop_count(0.15, 10), 1);
        assert_eq!(drop_count(0.15, 9), 1);
        assert_eq!(drop_count(0.15, 6), 0);
        assert_eq!(drop_count(0.15, 20), 3);
        assert_eq!(drop_count(0.15, 133), 19);
        assert_eq!(drop_count(0.9, 10), 9);
        assert_eq!(drop_count(0.5, 0), 0);
    }
}
