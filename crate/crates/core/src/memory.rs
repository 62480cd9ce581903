//! Stage memory: decompositions remembered together with the execution
//! success rate of the plan they came from.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::decompose::DecompositionResult;
use crate::goal::{Goal, GoalKey};
use crate::item::Quantity;
use crate::planner::{MemoryHints, PlanningTrace};
use crate::recipe::RecipeDb;
use crate::step::Step;

pub const DEFAULT_THRESHOLD: f64 = 0.3;

#[derive(Clone, Debug, PartialEq)]
pub struct StageMemoryEntry {
    pub goal: Goal,
    pub decomposition: DecompositionResult,
    /// In `[0, 1]`.
    pub success_rate: f64,
    pub source_task: String,
    /// Milliseconds since the Unix epoch, supplied by the caller.
    pub recorded_at: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MatchMode {
    /// Goal item and quantity must both match.
    #[default]
    Exact,
    /// Any stored quantity of the same item; the hint is rescaled.
    ItemOnly,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StageMemoryStore {
    entries: BTreeMap<GoalKey, Vec<StageMemoryEntry>>,
    mode: MatchMode,
}

impl StageMemoryStore {
    pub fn new() -> Self {
        StageMemoryStore::default()
    }

    pub fn with_match_mode(mut self, mode: MatchMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn match_mode(&self) -> MatchMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.entries.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries grouped by key, in key order then insertion order.
    pub fn entries(&self) -> impl Iterator<Item = &StageMemoryEntry> {
        self.entries.values().flatten()
    }

    /// Adds one entry. An entry with the same goal and decomposition already
    /// present keeps the higher success rate.
    pub fn insert(&mut self, entry: StageMemoryEntry) {
        let slot = self.entries.entry(entry.goal.key()).or_default();
        match slot
            .iter_mut()
            .find(|e| e.decomposition.same_decomposition(&entry.decomposition))
        {
            Some(existing) => {
                if entry.success_rate > existing.success_rate {
                    *existing = entry;
                }
            }
            None => slot.push(entry),
        }
    }

    /// Stamps every decomposition in `trace` with the plan's success rate.
    pub fn record(
        &mut self,
        trace: &PlanningTrace,
        success_rate: f64,
        task_id: &str,
        recorded_at: u64,
    ) {
        let success_rate = success_rate.clamp(0.0, 1.0);
        for entry in &trace.entries {
            self.insert(StageMemoryEntry {
                goal: entry.goal.clone(),
                decomposition: entry.result.clone(),
                success_rate,
                source_task: task_id.into(),
                recorded_at,
            });
        }
    }

    /// Best remembered decomposition of `goal` with a success rate of at least
    /// `threshold`; ties go to the most recent entry.
    pub fn retrieve(&self, goal: &Goal, threshold: f64) -> Option<DecompositionResult> {
        match (self.mode, goal) {
            (MatchMode::ItemOnly, Goal::ObtainItem { item, qty }) => {
                let best = self
                    .entries
                    .iter()
                    .filter(|(key, _)| matches!(key, GoalKey::Item { item: i, .. } if i == item))
                    .flat_map(|(_, list)| list.iter().enumerate())
                    .filter(|(_, e)| e.success_rate >= threshold)
                    .max_by(rank)?;
                let stored = match best.1.goal {
                    Goal::ObtainItem { qty, .. } => qty,
                    Goal::ReachBelowGround { .. } => return None,
                };
                Some(rescale(&best.1.decomposition, stored, *qty))
            }
            _ => {
                let list = self.entries.get(&goal.key())?;
                list.iter()
                    .enumerate()
                    .filter(|(_, e)| e.success_rate >= threshold)
                    .max_by(rank)
                    .map(|(_, e)| e.decomposition.clone())
            }
        }
    }

    /// Drops entries whose items are unknown to `db`; returns how many went.
    pub fn retain_valid(&mut self, db: &RecipeDb) -> usize {
        let before = self.len();
        for list in self.entries.values_mut() {
            list.retain(|e| entry_is_valid(e, db));
        }
        self.entries.retain(|_, list| !list.is_empty());
        before - self.len()
    }

    /// Read-only view usable as planner hints.
    pub fn hints(&self, threshold: f64) -> Retriever<'_> {
        Retriever {
            store: self,
            threshold,
        }
    }
}

fn rank(a: &(usize, &StageMemoryEntry), b: &(usize, &StageMemoryEntry)) -> core::cmp::Ordering {
    a.1.success_rate
        .total_cmp(&b.1.success_rate)
        .then(a.1.recorded_at.cmp(&b.1.recorded_at))
        .then(a.0.cmp(&b.0))
}

/// Whether every item the entry mentions exists in `db`.
pub fn entry_is_valid(entry: &StageMemoryEntry, db: &RecipeDb) -> bool {
    let goal_items = |g: &Goal| match g {
        Goal::ObtainItem { item, .. } => db.contains(item),
        Goal::ReachBelowGround { tool } => db.contains(tool),
    };
    let step = &entry.decomposition.step;
    (0.0..=1.0).contains(&entry.success_rate)
        && goal_items(&entry.goal)
        && step.item().is_none_or(|i| db.contains(i))
        && step.tool().is_none_or(|t| db.contains(t))
        && entry.decomposition.sub_goals.iter().all(goal_items)
}

/// Scales a decomposition stored for `from` units so it targets `to` units.
fn rescale(result: &DecompositionResult, from: Quantity, to: Quantity) -> DecompositionResult {
    let scale = |q: Quantity| {
        let n = (u64::from(q.get()) * u64::from(to.get())).div_ceil(u64::from(from.get()));
        Quantity::new(u32::try_from(n).unwrap_or(u32::MAX)).unwrap_or(Quantity::ONE)
    };
    let step = match &result.step {
        Step::DigDown { .. } => result.step.clone(),
        other => other.with_qty(scale(other.qty().unwrap_or(Quantity::ONE))),
    };
    // tools and stations are over-asked here; canonicalization caps them at one
    let sub_goals = result
        .sub_goals
        .iter()
        .map(|g| match g {
            Goal::ObtainItem { item, qty } => Goal::ObtainItem {
                item: item.clone(),
                qty: scale(*qty),
            },
            other => other.clone(),
        })
        .collect();
    DecompositionResult {
        step,
        sub_goals,
        thought: result.thought.clone(),
    }
}

/// A [`StageMemoryStore`] with a fixed retrieval threshold.
#[derive(Clone, Copy, Debug)]
pub struct Retriever<'a> {
    store: &'a StageMemoryStore,
    threshold: f64,
}

impl MemoryHints for Retriever<'_> {
    fn hint(&self, goal: &Goal) -> Option<DecompositionResult> {
        self.store.retrieve(goal, self.threshold)
    }
}
