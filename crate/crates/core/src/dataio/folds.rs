use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::rng::seeded;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    /// Fold index of every row, in `[0, k)`.
    pub assignments: Vec<usize>,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        self.indices(|f| f == fold)
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        self.indices(|f| f != fold)
    }

    fn indices(&self, keep: impl Fn(usize) -> bool) -> Vec<usize> {
        self.assignments
            .iter()
            .enumerate()
            .filter(|(_, &f)| keep(f))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Stratified k-fold assignment. Each class is shuffled with the seed and dealt
/// round-robin; the majority deal starts where the minority deal stopped so
/// overall fold sizes stay within one of each other too.
pub fn stratified_kfold(dataset: &Dataset, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Config(format!("fold count must be at least 2, got {k}")));
    }
    let mut rng = seeded(seed);
    let mut assignments = vec![0usize; dataset.len()];
    let mut offset = 0;
    for class in [true, false] {
        let mut members: Vec<usize> = (0..dataset.len()).filter(|&i| dataset.labels[i] == class).collect();
        if members.len() < k {
            return Err(Error::Dataset(format!(
                "class `{}` has {} rows, fewer than the {k} folds requested",
                if class { &dataset.positive_label } else { &dataset.negative_label },
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        for (pos, &row) in members.iter().enumerate() {
            assignments[row] = (offset + pos) % k;
        }
        offset = (offset + members.len()) % k;
    }
    Ok(FoldPlan { k, assignments })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{FeatureSpec, Schema, Value};
    use proptest::prelude::*;

    fn toy(n_pos: usize, n_neg: usize) -> Dataset {
        let schema = Schema::new(vec![FeatureSpec::numeric("x")]);
        let rows = (0..n_pos + n_neg).map(|i| vec![Value::Num(i as f64)]).collect();
        let labels = (0..n_pos + n_neg).map(|i| i < n_pos).collect();
        Dataset::new("toy", schema, rows, labels, "p", "n").unwrap()
    }

    fn per_class_counts(ds: &Dataset, plan: &FoldPlan, class: bool) -> Vec<usize> {
        let mut c = vec![0; plan.k];
        for (i, &f) in plan.assignments.iter().enumerate() {
            if ds.labels[i] == class {
                c[f] += 1;
            }
        }
        c
    }

    #[test]
    fn forty_two_minority_over_ten_folds() {
        let ds = toy(42, 689);
        let plan = stratified_kfold(&ds, 10, 3).unwrap();
        let mut c = per_class_counts(&ds, &plan, true);
        c.sort();
        assert_eq!(c, vec![4, 4, 4, 4, 4, 4, 4, 4, 5, 5]);
    }

    #[test]
    fn two_folds_of_four_plus_four() {
        let ds = toy(4, 4);
        let plan = stratified_kfold(&ds, 2, 0).unwrap();
        assert_eq!(per_class_counts(&ds, &plan, true), vec![2, 2]);
        assert_eq!(per_class_counts(&ds, &plan, false), vec![2, 2]);
    }

    #[test]
    fn small_class_is_an_error() {
        let ds = toy(5, 50);
        assert!(stratified_kfold(&ds, 10, 0).is_err());
        assert!(stratified_kfold(&ds, 1, 0).is_err());
    }

    proptest! {
        #[test]
        fn partition_and_stratification(n_pos in 5usize..30, extra in 0usize..60, k in 2usize..6, seed: u64) {
            let ds = toy(n_pos, n_pos + extra);
            let plan = stratified_kfold(&ds, k, seed).unwrap();
            prop_assert_eq!(plan.assignments.len(), ds.len());
            let mut seen = vec![false; ds.len()];
            for f in 0..k {
                for i in plan.test_indices(f) {
                    prop_assert!(!seen[i]);
                    seen[i] = true;
                }
            }
            prop_assert!(seen.iter().all(|&s| s));
            for class in [true, false] {
                let c = per_class_counts(&ds, &plan, class);
                prop_assert!(c.iter().max().unwrap() - c.iter().min().unwrap() <= 1);
            }
            prop_assert_eq!(stratified_kfold(&ds, k, seed).unwrap(), plan);
        }
    }
}
