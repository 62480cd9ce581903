//! Textual plan similarity: positional accuracy, bigram F1 and step-level
//! edit distance. Steps compare equal only when verb, item, quantity and tool
//! all match.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::step::Step;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricResult {
    /// Percentage in `[0, 100]`.
    pub accuracy: f64,
    /// Percentage in `[0, 100]`.
    pub f1: f64,
    pub edit_distance: usize,
}

/// All three metrics of `generated` against `truth`.
pub fn evaluate(generated: &[Step], truth: &[Step]) -> MetricResult {
    MetricResult {
        accuracy: accuracy(generated, truth),
        f1: f1(generated, truth),
        edit_distance: edit_distance(generated, truth),
    }
}

/// Share of positions holding the same step, over the longer plan's length.
pub fn accuracy(generated: &[Step], truth: &[Step]) -> f64 {
    let len = generated.len().max(truth.len());
    if len == 0 {
        return 100.0;
    }
    let hits = generated.iter().zip(truth).filter(|(a, b)| a == b).count();
    100.0 * hits as f64 / len as f64
}

/// F1 over (previous step, step) pairs, with a start marker before the first
/// step. Pairs are counted as multisets.
pub fn f1(generated: &[Step], truth: &[Step]) -> f64 {
    if generated.is_empty() && truth.is_empty() {
        return 100.0;
    }
    let gen = bigrams(generated);
    let mut remaining = bigrams(truth);
    let mut matched = 0usize;
    for (pair, n) in gen {
        if let Some(m) = remaining.get_mut(&pair) {
            let common = n.min(*m);
            matched += common;
            *m -= common;
        }
    }
    if matched == 0 {
        return 0.0;
    }
    let precision = matched as f64 / generated.len() as f64;
    let recall = matched as f64 / truth.len() as f64;
    200.0 * precision * recall / (precision + recall)
}

fn bigrams(plan: &[Step]) -> BTreeMap<(Option<&Step>, &Step), usize> {
    let mut out = BTreeMap::new();
    let mut previous = None;
    for step in plan {
        *out.entry((previous, step)).or_insert(0) += 1;
        previous = Some(step);
    }
    out
}

/// Levenshtein distance over whole steps with unit costs.
pub fn edit_distance<T: PartialEq>(generated: &[T], truth: &[T]) -> usize {
    let mut row: Vec<usize> = (0..=truth.len()).collect();
    for (i, a) in generated.iter().enumerate() {
        let mut diagonal = row[0];
        row[0] = i + 1;
        for (j, b) in truth.iter().enumerate() {
            let substitute = diagonal + usize::from(a != b);
            diagonal = row[j + 1];
            row[j + 1] = substitute.min(row[j] + 1).min(row[j + 1] + 1);
        }
    }
    row[truth.len()]
}

/// Per-bucket means of a set of results.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MetricSummary {
    pub count: usize,
    pub accuracy: f64,
    pub f1: f64,
    pub edit_distance: f64,
}

/// Groups results by key and averages each metric within the group.
pub fn aggregate<K: Ord, I: IntoIterator<Item = (K, MetricResult)>>(
    results: I,
) -> BTreeMap<K, MetricSummary> {
    let mut sums: BTreeMap<K, MetricSummary> = BTreeMap::new();
    for (key, r) in results {
        let s = sums.entry(key).or_default();
        s.count += 1;
        s.accuracy += r.accuracy;
        s.f1 += r.f1;
        s.edit_distance += r.edit_distance as f64;
    }
    for s in sums.values_mut() {
        let n = s.count as f64;
        s.accuracy /= n;
        s.f1 /= n;
        s.edit_distance /= n;
    }
    sums
}
