mod common;

use bar_core::{
    choose_anchors_scoring, choose_anchors_sliding, DecompositionResult, Goal, StageMemoryEntry,
    StageMemoryStore, Step, StepRating,
};
use common::{id, q, tech_tree};
use proptest::prelude::*;

fn entry(rate: f64, recorded_at: u64, logs: u32) -> StageMemoryEntry {
    let db = tech_tree();
    StageMemoryEntry {
        goal: Goal::obtain(id("planks"), q(3)),
        decomposition: DecompositionResult::new(
            Step::parse("Craft 3 planks", &db).unwrap(),
            vec![Goal::obtain(id("log"), q(logs))],
        ),
        success_rate: rate,
        source_task: "t".into(),
        recorded_at,
    }
}

proptest! {
    #[test]
    fn retrieval_respects_the_threshold(
        rates in proptest::collection::vec(0.0f64..=1.0, 1..8),
        threshold in 0.0f64..=1.0,
    ) {
        let mut store = StageMemoryStore::new();
        for (i, r) in rates.iter().enumerate() {
            store.insert(entry(*r, i as u64, i as u32 + 1));
        }
        let goal = Goal::obtain(id("planks"), q(3));
        let best = rates
            .iter()
            .enumerate()
            .filter(|(_, r)| **r >= threshold)
            .max_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)));
        match (store.retrieve(&goal, threshold), best) {
            (None, None) => {}
            (Some(hint), Some((i, _))) => {
                prop_assert_eq!(hint.sub_goals, vec![Goal::obtain(id("log"), q(i as u32 + 1))]);
            }
            (got, want) => prop_assert!(false, "got {:?}, want {:?}", got, want),
        }
    }

    #[test]
    fn scoring_anchors_are_disjoint_and_bounded(
        scores in proptest::collection::vec(1u8..=10, 0..12),
        t in 1u8..=10,
        k in 1usize..5,
    ) {
        let ratings: Vec<StepRating> = scores
            .iter()
            .enumerate()
            .map(|(i, s)| StepRating::new(i + 1, *s).unwrap())
            .collect();
        let pairs = choose_anchors_scoring(&ratings, t, k, scores.len());
        for p in &pairs {
            prop_assert!(p.start < p.end && p.end - p.start <= k && p.end <= scores.len());
            prop_assert!(scores[p.start - 1] < t);
        }
        for w in pairs.windows(2) {
            prop_assert!(w[0].end < w[1].start);
        }
        for (i, s) in scores.iter().enumerate() {
            let index = i + 1;
            if *s < t && index < scores.len() {
                prop_assert!(pairs.iter().any(|p| p.start <= index && index <= p.end));
            }
        }
    }

    #[test]
    fn sliding_anchors_are_seeded(len in 0usize..20, k in 1usize..5, seed in any::<u64>()) {
        let a = choose_anchors_sliding(len, k, seed, None);
        prop_assert_eq!(&a, &choose_anchors_sliding(len, k, seed, None));
        prop_assert!(a.len() <= len.div_ceil(k + 1));
        for p in &a {
            prop_assert!(p.start < p.end && p.end <= len && p.end - p.start <= k);
        }
        for w in a.windows(2) {
            prop_assert!(w[0].end < w[1].start);
        }
    }
}
