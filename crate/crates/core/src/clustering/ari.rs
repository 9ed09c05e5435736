// SPDX-License-Identifier: Apache-2.0

use std::collections::HashMap;
use std::hash::Hash;

fn pairs(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

fn pair_sum<'a>(counts: impl Iterator<Item = &'a u64>) -> f64 {
    counts.map(|&c| pairs(c)).sum::<u64>() as f64
}

/// Chance-corrected agreement between two labelings of the same samples.
/// Returns 1.0 when both partitions are trivially identical (all one
/// cluster or all singletons).
pub fn adjusted_rand_index<A: Hash + Eq, B: Hash + Eq>(a: &[A], b: &[B]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings must cover the same samples");
    let n = a.len() as u64;
    let mut cells: HashMap<(&A, &B), u64> = HashMap::new();
    let mut rows: HashMap<&A, u64> = HashMap::new();
    let mut cols: HashMap<&B, u64> = HashMap::new();
    for (x, y) in a.iter().zip(b) {
        *cells.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    // Integer sums, so hash iteration order cannot change the result.
    let index = pair_sum(cells.values());
    let sum_a = pair_sum(rows.values());
    let sum_b = pair_sum(cols.values());
    let total = pairs(n) as f64;
    if total == 0.0 {
        return 1.0;
    }
    let expected = sum_a * sum_b / total;
    let max = (sum_a + sum_b) / 2.0;
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}
