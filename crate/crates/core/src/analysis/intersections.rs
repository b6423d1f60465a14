//! Exclusive fuzzer-subset intersections for upset charts.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

/// Bugs triggered by exactly the fuzzers in `fuzzers`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntersectionGroup {
    pub fuzzers: Vec<String>,
    pub bugs: Vec<String>,
    pub tp: usize,
    pub fp: usize,
}

/// Largest number of fuzzers accepted; the output has `2^k - 1` groups.
pub const MAX_FUZZERS: usize = 16;

/// One group per non-empty fuzzer subset, ordered by subset size and then by
/// the sorted fuzzer names.
pub fn intersections(
    per_fuzzer: &BTreeMap<String, BTreeSet<String>>,
    is_false_positive: impl Fn(&str) -> bool,
) -> Vec<IntersectionGroup> {
    let names: Vec<&String> = per_fuzzer.keys().collect();
    let k = names.len();
    assert!(k <= MAX_FUZZERS, "too many fuzzers for subset enumeration");
    let mut by_mask: BTreeMap<u32, BTreeSet<&String>> = BTreeMap::new();
    let all: BTreeSet<&String> = per_fuzzer.values().flatten().collect();
    for bug in all {
        let mask = names
            .iter()
            .enumerate()
            .filter(|(_, f)| per_fuzzer[**f].contains(bug))
            .fold(0u32, |m, (i, _)| m | (1 << i));
        by_mask.entry(mask).or_default().insert(bug);
    }
    let mut masks: Vec<u32> = (1..(1u32 << k)).collect();
    masks.sort_by_key(|m| {
        let members: Vec<&String> = (0..k).filter(|i| m & (1 << i) != 0).map(|i| names[i]).collect();
        (m.count_ones(), members)
    });
    masks
        .into_iter()
        .map(|m| {
            let fuzzers = (0..k).filter(|i| m & (1 << i) != 0).map(|i| names[i].clone()).collect();
            let bugs: Vec<String> = by_mask
                .get(&m)
                .map(|s| s.iter().map(|b| (*b).clone()).collect())
                .unwrap_or_default();
            let fp = bugs.iter().filter(|b| is_false_positive(b)).count();
            IntersectionGroup {
                fuzzers,
                tp: bugs.len() - fp,
                fp,
                bugs,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn disjoint_pair() {
        let mut m = BTreeMap::new();
        m.insert("F1".to_string(), set(&["a"]));
        m.insert("F2".to_string(), set(&["b"]));
        let g = intersections(&m, |_| false);
        assert_eq!(g.len(), 3);
        assert_eq!((g[0].fuzzers.clone(), g[0].bugs.clone()), (vec!["F1".into()], vec!["a".into()]));
        assert_eq!((g[1].fuzzers.clone(), g[1].bugs.clone()), (vec!["F2".into()], vec!["b".into()]));
        assert_eq!(g[2].fuzzers, vec!["F1".to_string(), "F2".to_string()]);
        assert!(g[2].bugs.is_empty());
    }

    #[test]
    fn single_fuzzer_and_fp_split() {
        let mut m = BTreeMap::new();
        m.insert("F".to_string(), set(&["B1", "FP_X"]));
        let g = intersections(&m, |b| b.starts_with("FP_"));
        assert_eq!(g.len(), 1);
        assert_eq!((g[0].tp, g[0].fp), (1, 1));
    }
}
