use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DatasetSplit, Sample};
use crate::error::{Error, Result};

/// Seeded partition into validation, test, labeled and unlabeled sets.
///
/// Validation and test are taken first from a shuffled order; of the
/// remaining pool, `max(1, round(labeled_ratio * pool))` samples (half
/// rounds up) keep their labels and the rest become unlabeled with their
/// labels moved to the hidden slot.
pub fn split_dataset(
    samples: Vec<Sample>,
    num_classes: usize,
    labeled_ratio: f64,
    val_count: usize,
    test_count: usize,
    seed: u64,
) -> Result<DatasetSplit> {
    if !(labeled_ratio > 0.0 && labeled_ratio <= 1.0) {
        return Err(Error::invalid(format!("labeled_ratio {labeled_ratio} not in (0, 1]")));
    }
    if samples.iter().any(|s| !s.is_labeled()) {
        return Err(Error::invalid("split_dataset needs fully labeled samples"));
    }
    if val_count + test_count >= samples.len() {
        return Err(Error::invalid(format!(
            "pool too small: {} samples, {val_count} validation + {test_count} test",
            samples.len()
        )));
    }
    let mut samples = samples;
    samples.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut rest = samples.split_off(val_count);
    let validation = samples;
    let pool = rest.split_off(test_count);
    let test = rest;

    let labeled_count = labeled_count(labeled_ratio, pool.len());
    let mut labeled = pool;
    let unlabeled = labeled.split_off(labeled_count).into_iter().map(Sample::into_unlabeled).collect();

    let split = DatasetSplit {
        labeled,
        unlabeled,
        validation,
        test,
        num_classes,
    };
    split.validate()?;
    Ok(split)
}

pub(crate) fn labeled_count(ratio: f64, pool: usize) -> usize {
    ((ratio * pool as f64).round() as usize).clamp(1, pool)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, GenConfig};
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn corpus(n: usize) -> Vec<Sample> {
        let cfg = GenConfig {
            count: n,
            height: 8,
            width: 8,
            ..Default::default()
        };
        generate_synthetic(&cfg, 1).unwrap()
    }

    #[test]
    fn five_percent_of_two_hundred() {
        let s = split_dataset(corpus(200), 3, 0.05, 20, 40, 0).unwrap();
        assert_eq!(s.validation.len(), 20);
        assert_eq!(s.test.len(), 40);
        assert_eq!(s.labeled.len(), 7);
        assert_eq!(s.unlabeled.len(), 133);
        assert!(s.unlabeled.iter().all(|u| !u.is_labeled() && u.hidden_label().is_some()));
    }

    #[test]
    fn full_ratio_leaves_no_unlabeled() {
        let s = split_dataset(corpus(30), 3, 1.0, 5, 5, 0).unwrap();
        assert_eq!(s.labeled.len(), 20);
        assert!(s.unlabeled.is_empty());
    }

    #[test]
    fn same_seed_same_partition() {
        let ids = |s: &DatasetSplit| -> Vec<Vec<String>> {
            s.parts().iter().map(|(_, p)| p.iter().map(|x| x.id.clone()).collect()).collect()
        };
        let a = split_dataset(corpus(40), 3, 0.1, 5, 5, 9).unwrap();
        let b = split_dataset(corpus(40), 3, 0.1, 5, 5, 9).unwrap();
        assert_eq!(ids(&a), ids(&b));
    }

    #[test]
    fn tiny_ratio_still_labels_one() {
        let s = split_dataset(corpus(20), 3, 0.001, 2, 2, 0).unwrap();
        assert_eq!(s.labeled.len(), 1);
    }

    #[test]
    fn empty_pool_is_an_error() {
        assert!(split_dataset(corpus(10), 3, 0.5, 5, 5, 0).is_err());
        assert!(split_dataset(corpus(10), 3, 0.0, 1, 1, 0).is_err());
    }

    #[test]
    fn round_half_up() {
        assert_eq!(labeled_count(0.05, 140), 7);
        assert_eq!(labeled_count(0.5, 5), 3);
        assert_eq!(labeled_count(0.25, 2), 1);
        assert_eq!(labeled_count(0.1, 140), 14);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn partition_is_disjoint_and_complete(n in 5usize..40, ratio in 0.01f64..=1.0, seed in any::<u64>(), v in 0usize..3, t in 0usize..3) {
            let samples = corpus(n);
            let all: HashSet<String> = samples.iter().map(|s| s.id.clone()).collect();
            let s = split_dataset(samples, 3, ratio, v, t, seed).unwrap();
            let mut seen = HashSet::new();
            for (_, part) in s.parts() {
                for x in part {
                    prop_assert!(seen.insert(x.id.clone()));
                }
            }
            prop_assert_eq!(seen, all);
            prop_assert_eq!(s.labeled.len(), labeled_count(ratio, n - v - t));
        }
    }
}
