use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DataError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub test_fraction: f64,
    pub folds: usize,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            test_fraction: 0.2,
            folds: 3,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.folds < 2 {
            return Err(DataError::BadConfig("folds must be >= 2".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(DataError::BadConfig("test_fraction must be in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Held-out test indices plus `folds` disjoint validation subsets of the remaining pool.
/// All index lists are sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Splits {
    pub test: Vec<usize>,
    pub pool: Vec<usize>,
    pub folds: Vec<Vec<usize>>,
}

impl Splits {
    /// Training indices of fold `k`: the pool minus that fold's validation subset.
    pub fn fold_train(&self, k: usize) -> Vec<usize> {
        let val = &self.folds[k];
        self.pool.iter().copied().filter(|i| val.binary_search(i).is_err()).collect()
    }
}

/// Stratified by label. The test size `round(f·N)` is shared between the classes by largest
/// remainder, and each class's pool is dealt round-robin into folds with the dealing
/// position carried across classes so fold sizes differ by at most one.
pub fn make_splits(labels: &[bool], spec: &SplitSpec) -> Result<Splits, DataError> {
    spec.validate()?;
    let n = labels.len();
    let need = spec.folds * 5;
    if n < need {
        return Err(DataError::TooSmall { n, need });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut classes: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, &l) in labels.iter().enumerate() {
        classes[l as usize].push(i);
    }
    for c in classes.iter_mut() {
        c.shuffle(&mut rng);
    }

    let n_test = (spec.test_fraction * n as f64).round() as usize;
    let exact: Vec<f64> = classes.iter().map(|c| c.len() as f64 * n_test as f64 / n as f64).collect();
    let mut take: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let short = n_test - take.iter().sum::<usize>();
    if short > 0 {
        // at most one short for two classes; larger remainder wins, label 0 on a tie
        let k = if exact[1] - exact[1].floor() > exact[0] - exact[0].floor() { 1 } else { 0 };
        take[k] += short;
    }

    let mut test = Vec::with_capacity(n_test);
    let mut folds = vec![Vec::new(); spec.folds];
    let mut dealer = 0usize;
    for (c, &t) in classes.iter().zip(&take) {
        test.extend_from_slice(&c[..t]);
        for &i in &c[t..] {
            folds[dealer % spec.folds].push(i);
            dealer += 1;
        }
    }
    test.sort_unstable();
    let mut pool: Vec<usize> = folds.iter().flatten().copied().collect();
    pool.sort_unstable();
    for f in folds.iter_mut() {
        f.sort_unstable();
    }
    Ok(Splits { test, pool, folds })
}
