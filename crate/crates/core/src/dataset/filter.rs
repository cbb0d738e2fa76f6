use std::collections::BTreeMap;

use super::{Dataset, DatasetKind};

/// Per-object kept counts `(successes, failures)` under a cap.
///
/// The minority class is kept whole up to half the cap, and the majority fills the rest
/// of the cap without ever widening the raw imbalance. This reproduces both
/// 200/500 → 200+300 and 600/600 → 250+250 at cap 500. On a tie, successes are treated
/// as the minority.
pub fn balance_counts(successes: usize, failures: usize, cap: usize) -> (usize, usize) {
    let success_is_minority = successes <= failures;
    let (minority, majority) = if success_is_minority {
        (successes, failures)
    } else {
        (failures, successes)
    };
    let keep_min = minority.min(cap / 2);
    let keep_maj = majority.min(cap - keep_min).min(keep_min + (majority - minority));
    if success_is_minority {
        (keep_min, keep_maj)
    } else {
        (keep_maj, keep_min)
    }
}

/// Applies `balance_counts` per object, keeping the lowest attempt indices of each class.
/// Surviving samples stay in their original order.
pub fn filter_balance(raw: &Dataset, cap: usize) -> Dataset {
    let mut per: BTreeMap<&str, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
    for (i, s) in raw.samples.iter().enumerate() {
        let e = per.entry(&s.object_id).or_default();
        if s.success {
            e.0.push(i);
        } else {
            e.1.push(i);
        }
    }
    let mut keep = vec![false; raw.len()];
    for (succ, fail) in per.values_mut() {
        let (ks, kf) = balance_counts(succ.len(), fail.len(), cap);
        for (class, k) in [(succ, ks), (fail, kf)] {
            class.sort_by_key(|&i| (raw.samples[i].attempt_index, i));
            for &i in &class[..k] {
                keep[i] = true;
            }
        }
    }
    let indices: Vec<usize> = (0..raw.len()).filter(|&i| keep[i]).collect();
    let mut out = raw.subset(&indices);
    out.kind = DatasetKind::Filtered;
    out
}
