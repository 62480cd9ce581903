//! Plan repair between anchor steps.
//!
//! Steps are rated, low-rated stretches become (start, end) anchor pairs, the
//! stretch between each pair is rebuilt by forward reasoning from the state
//! just before the start anchor, and the rebuilt piece is merged back into the
//! plan.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::goal::Goal;
use crate::item::{ItemId, Quantity};
use crate::planner::{normalize_plan, order_by_dependencies, PlanningTrace};
use crate::recipe::{Location, RecipeDb, RecipeKind, RequiredLocation};
use crate::simulator::{
    run_steps, simulate_step, ExecutionMode, FailureReason, StepStatus, StochasticProfile,
    WorldState,
};
use crate::step::{Plan, Step, StepKey};

/// Score of one plan step, 1 (likely wrong from here) to 10 (sound).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StepRating {
    /// 1-based step position.
    pub index: usize,
    pub score: u8,
}

impl StepRating {
    pub fn new(index: usize, score: u8) -> Option<Self> {
        (index >= 1 && (1..=10).contains(&score)).then_some(StepRating { index, score })
    }
}

/// A 1-based (start, end) step range with `start < end`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AnchorPair {
    pub start: usize,
    pub end: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AnchorMethod {
    #[default]
    StepScoring,
    SlidingWindow,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConsistencyConfig {
    pub method: AnchorMethod,
    /// Steps scoring below this start an anchor pair.
    pub t: u8,
    /// Window length.
    pub k: usize,
    /// Seed for sliding-window pair selection.
    pub seed: u64,
    /// Number of sliding-window pairs; `None` means `ceil(len / (k + 1))`.
    pub window_pairs: Option<usize>,
    /// Score/repair passes.
    pub rounds: u32,
}

impl Default for ConsistencyConfig {
    fn default() -> Self {
        ConsistencyConfig {
            method: AnchorMethod::StepScoring,
            t: 5,
            k: 3,
            seed: 0,
            window_pairs: None,
            rounds: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ConsistencyError {
    #[error("could not make {step:?} executable within {limit} inserted steps")]
    RepairDepthExceeded { step: String, limit: usize },
    #[error("partial plan does not start with {start:?} and end with {end:?}")]
    AnchorMismatch { start: String, end: String },
    #[error("anchor pair ({start}, {end}) is outside a plan of {len} steps")]
    PairOutOfRange {
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("remote backend unavailable: {0}")]
    RemoteUnavailable(String),
    #[error("could not parse remote response: {0:?}")]
    RemoteParseError(String),
}

/// Rates every step of a plan.
pub trait StepScorer {
    fn score(
        &self,
        goal: &Goal,
        plan: &Plan,
        initial: &WorldState,
    ) -> Result<Vec<StepRating>, ConsistencyError>;
}

/// Produces the partial plan between two anchor steps.
pub trait ForwardCompleter {
    fn complete(
        &self,
        goal: &Goal,
        start: &Step,
        end: &Step,
        state_at_start: &WorldState,
    ) -> Result<Plan, ConsistencyError>;
}

/// Rates a step 1 if any of the next `k` steps fails in simulation, else 10.
///
/// The simulation skips failed steps and continues, so one early mistake does
/// not condemn the whole tail. Only the scores 1 and 10 are ever produced.
#[derive(Clone, Debug)]
pub struct SimulationScorer<'a> {
    pub db: &'a RecipeDb,
    pub k: usize,
}

impl StepScorer for SimulationScorer<'_> {
    fn score(
        &self,
        _goal: &Goal,
        plan: &Plan,
        initial: &WorldState,
    ) -> Result<Vec<StepRating>, ConsistencyError> {
        let failed = failures(plan, initial, self.db);
        Ok((0..plan.len())
            .map(|i| {
                let ahead = &failed[(i + 1).min(failed.len())..(i + 1 + self.k).min(failed.len())];
                let score = if ahead.iter().any(|f| *f) { 1 } else { 10 };
                StepRating {
                    index: i + 1,
                    score,
                }
            })
            .collect())
    }
}

/// Per-step failure flags from a failure-skipping simulation.
fn failures(plan: &Plan, initial: &WorldState, db: &RecipeDb) -> Vec<bool> {
    let profile = StochasticProfile::deterministic();
    let (outcomes, _) = run_steps(
        initial,
        plan,
        db,
        &mut profile.sampler(0),
        ExecutionMode::SkipFailures,
    );
    outcomes.iter().map(|o| !o.is_completed()).collect()
}

/// Completes a segment by executing the start anchor, then inserting enabling
/// steps until the end anchor runs: Dig down for location, the producing
/// recipe for missing materials, stations and tools.
#[derive(Clone, Debug)]
pub struct SimulationCompleter<'a> {
    pub db: &'a RecipeDb,
    /// Maximum number of inserted steps, normally `2 * k`.
    pub max_insertions: usize,
}

impl<'a> SimulationCompleter<'a> {
    pub fn new(db: &'a RecipeDb, k: usize) -> Self {
        SimulationCompleter {
            db,
            max_insertions: 2 * k,
        }
    }

    fn ensure(
        &self,
        step: &Step,
        state: &mut WorldState,
        out: &mut Vec<Step>,
        inserted: &mut usize,
    ) -> Result<(), ConsistencyError> {
        let profile = StochasticProfile::deterministic();
        loop {
            let outcome = simulate_step(state, step, self.db, &mut profile.sampler(0));
            let reason = match outcome.status {
                StepStatus::Completed => {
                    *state = outcome.state_after;
                    out.push(step.clone());
                    return Ok(());
                }
                StepStatus::Failed(reason) => reason,
            };
            let exceeded = || ConsistencyError::RepairDepthExceeded {
                step: step.to_string(),
                limit: self.max_insertions,
            };
            let enabling = self.enabling_step(&reason, state).ok_or_else(exceeded)?;
            if *inserted >= self.max_insertions {
                return Err(exceeded());
            }
            *inserted += 1;
            self.ensure(&enabling, state, out, inserted)?;
        }
    }

    fn enabling_step(&self, reason: &FailureReason, state: &WorldState) -> Option<Step> {
        match reason {
            FailureReason::WrongLocation {
                required: Location::BelowGround,
                ..
            } => {
                let tool = state
                    .best_fitting_tool(self.db, 0)
                    .or_else(|| self.db.dig_tool())?;
                Some(Step::DigDown { tool: tool.clone() })
            }
            FailureReason::MissingTool(item) | FailureReason::MissingStation(item) => {
                self.producing_step(item, Quantity::ONE)
            }
            FailureReason::MissingMaterials(missing) => {
                let (item, short) = missing.first()?;
                self.producing_step(item, Quantity::new(*short)?)
            }
            _ => None,
        }
    }

    fn producing_step(&self, item: &ItemId, qty: Quantity) -> Option<Step> {
        let recipe = self.db.producer(item)?;
        let item = item.clone();
        Some(match recipe.kind {
            RecipeKind::Mine => Step::Mine {
                item,
                qty,
                tool: recipe.min_tool.clone(),
            },
            RecipeKind::Craft => Step::Craft { item, qty },
            RecipeKind::Smelt => Step::Smelt { item, qty },
        })
    }
}

impl ForwardCompleter for SimulationCompleter<'_> {
    fn complete(
        &self,
        _goal: &Goal,
        start: &Step,
        end: &Step,
        state_at_start: &WorldState,
    ) -> Result<Plan, ConsistencyError> {
        let mut state = state_at_start.clone();
        let mut out = Vec::new();
        let mut inserted = 0;
        self.ensure(start, &mut state, &mut out, &mut inserted)?;
        // a start anchor that itself needed repair keeps its enablers in front
        let start_at = out.len() - 1;
        self.ensure(end, &mut state, &mut out, &mut inserted)?;
        if start_at > 0 {
            let anchor = out.remove(start_at);
            out.insert(0, anchor);
        }
        Ok(Plan::new(out))
    }
}

/// Turns low ratings into anchor pairs.
///
/// Each step scoring below `t` is a start anchor whose end is `k` steps later,
/// clamped to the plan. Starts are taken left to right; a start that falls
/// inside the previous pair is absorbed by it, so pairs never overlap and
/// never span more than `k`. Pairs with `start == end` are dropped.
pub fn choose_anchors_scoring(
    ratings: &[StepRating],
    t: u8,
    k: usize,
    plan_len: usize,
) -> Vec<AnchorPair> {
    let mut starts: Vec<usize> = ratings
        .iter()
        .filter(|r| r.score < t && r.index >= 1 && r.index <= plan_len)
        .map(|r| r.index)
        .collect();
    starts.sort_unstable();
    starts.dedup();
    let mut pairs: Vec<AnchorPair> = Vec::new();
    for start in starts {
        if pairs.last().is_some_and(|p| start <= p.end) {
            continue;
        }
        let end = (start + k).min(plan_len);
        if end > start {
            pairs.push(AnchorPair { start, end });
        }
    }
    pairs
}

/// Seeded random non-overlapping pairs, each spanning `k` steps (clamped at
/// the plan end). `count` defaults to `ceil(plan_len / (k + 1))`; fewer pairs
/// are returned when no more fit.
pub fn choose_anchors_sliding(
    plan_len: usize,
    k: usize,
    seed: u64,
    count: Option<usize>,
) -> Vec<AnchorPair> {
    if plan_len < 2 || k == 0 {
        return Vec::new();
    }
    let wanted = count.unwrap_or_else(|| plan_len.div_ceil(k + 1));
    let mut starts: Vec<usize> = (1..plan_len).collect();
    starts.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut pairs: Vec<AnchorPair> = Vec::new();
    for start in starts {
        if pairs.len() == wanted {
            break;
        }
        let end = (start + k).min(plan_len);
        if pairs.iter().all(|p| end < p.start || start > p.end) {
            pairs.push(AnchorPair { start, end });
        }
    }
    pairs.sort_unstable();
    pairs
}

/// Replaces `initial[start..=end]` with its merge against `partial`.
///
/// The segment and the partial plan are aligned on their longest common
/// subsequence of step keys; aligned steps keep the larger quantity, and
/// unaligned steps from both sides are kept, initial ones first. Duplicate
/// keys across the result are then merged at their first position with the
/// larger quantity.
pub fn integrate(
    initial: &Plan,
    partial: &Plan,
    pair: AnchorPair,
    db: &RecipeDb,
) -> Result<Plan, ConsistencyError> {
    let AnchorPair { start, end } = pair;
    if start == 0 || start > end || end > initial.len() {
        return Err(ConsistencyError::PairOutOfRange {
            start,
            end,
            len: initial.len(),
        });
    }
    let segment = &initial[start - 1..end];
    let anchors_match = partial.first().map(Step::key) == segment.first().map(Step::key)
        && partial.last().map(Step::key) == segment.last().map(Step::key);
    if !anchors_match {
        return Err(ConsistencyError::AnchorMismatch {
            start: segment[0].to_string(),
            end: segment[segment.len() - 1].to_string(),
        });
    }

    let merged = lcs_merge(segment, partial);
    let mut steps: Vec<Step> = initial[..start - 1].to_vec();
    steps.extend(merged);
    steps.extend_from_slice(&initial[end..]);
    Ok(merge_duplicates(&steps, db))
}

fn lcs_merge(a: &[Step], b: &[Step]) -> Vec<Step> {
    let ka: Vec<StepKey> = a.iter().map(Step::key).collect();
    let kb: Vec<StepKey> = b.iter().map(Step::key).collect();
    // table[i][j] = LCS length of ka[i..] and kb[j..]
    let mut table = alloc::vec![alloc::vec![0usize; kb.len() + 1]; ka.len() + 1];
    for i in (0..ka.len()).rev() {
        for j in (0..kb.len()).rev() {
            table[i][j] = if ka[i] == kb[j] {
                table[i + 1][j + 1] + 1
            } else {
                table[i + 1][j].max(table[i][j + 1])
            };
        }
    }
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::with_capacity(a.len() + b.len());
    let mut only_b = Vec::new();
    while i < a.len() && j < b.len() {
        if ka[i] == kb[j] {
            out.append(&mut only_b);
            out.push(larger(&a[i], &b[j]));
            i += 1;
            j += 1;
        } else if table[i + 1][j] >= table[i][j + 1] {
            out.push(a[i].clone());
            i += 1;
        } else {
            only_b.push(b[j].clone());
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.append(&mut only_b);
    out.extend_from_slice(&b[j..]);
    out
}

fn larger(a: &Step, b: &Step) -> Step {
    match (a.qty(), b.qty()) {
        (Some(x), Some(y)) if y > x => b.clone(),
        _ => a.clone(),
    }
}

/// Merges same-key steps at their first position keeping the larger quantity;
/// Dig down steps collapse to the first, with the lowest-tier tool.
fn merge_duplicates(steps: &[Step], db: &RecipeDb) -> Plan {
    let mut out: Vec<Step> = Vec::with_capacity(steps.len());
    let mut slots: BTreeMap<StepKey, usize> = BTreeMap::new();
    let mut dig: Option<usize> = None;
    for step in steps {
        if let Step::DigDown { tool } = step {
            match dig {
                None => {
                    dig = Some(out.len());
                    out.push(step.clone());
                }
                Some(at) => {
                    let lower = match &out[at] {
                        Step::DigDown { tool: kept } => db
                            .tool_tier(tool)
                            .zip(db.tool_tier(kept))
                            .is_some_and(|(new, old)| new < old),
                        _ => false,
                    };
                    if lower {
                        out[at] = step.clone();
                    }
                }
            }
            continue;
        }
        match slots.get(&step.key()) {
            Some(&at) => out[at] = larger(&out[at], step),
            None => {
                slots.insert(step.key(), out.len());
                out.push(step.clone());
            }
        }
    }
    Plan::new(out)
}

/// Scores `plan`, repairs every anchor pair left to right and returns the
/// result. A plan in which no pair needs repair comes back unchanged;
/// otherwise the repaired plan is put back into canonical order.
pub fn maintain_consistency(
    plan: &Plan,
    goal: &Goal,
    config: &ConsistencyConfig,
    scorer: &dyn StepScorer,
    completer: &dyn ForwardCompleter,
    db: &RecipeDb,
) -> Result<Plan, ConsistencyError> {
    let initial = WorldState::new();
    let mut current = plan.clone();
    for _ in 0..config.rounds.max(1) {
        if current.len() < 2 {
            break;
        }
        let pairs = match config.method {
            AnchorMethod::StepScoring => {
                let ratings = scorer.score(goal, &current, &initial)?;
                choose_anchors_scoring(&ratings, config.t, config.k, current.len())
            }
            AnchorMethod::SlidingWindow => {
                choose_anchors_sliding(current.len(), config.k, config.seed, config.window_pairs)
            }
        };
        // pairs are resolved by step identity since earlier repairs shift indices
        let targets: Vec<(StepKey, StepKey)> = pairs
            .iter()
            .map(|p| (current[p.start - 1].key(), current[p.end - 1].key()))
            .collect();
        let mut changed = false;
        let mut from = 0;
        for (start_key, end_key) in targets {
            let Some(si) = (from..current.len()).find(|&i| current[i].key() == start_key) else {
                continue;
            };
            let Some(ei) = (si + 1..current.len()).find(|&i| current[i].key() == end_key) else {
                continue;
            };
            let failed = failures(&current, &initial, db);
            if !failed[si..=ei].iter().any(|f| *f) {
                from = si;
                continue;
            }
            let profile = StochasticProfile::deterministic();
            let (_, state) = run_steps(
                &initial,
                &current[..si],
                db,
                &mut profile.sampler(0),
                ExecutionMode::SkipFailures,
            );
            let partial = match completer.complete(goal, &current[si], &current[ei], &state) {
                Ok(partial) => partial,
                Err(e @ ConsistencyError::RepairDepthExceeded { .. }) => {
                    log::warn!("leaving steps {}..{} unrepaired: {e}", si + 1, ei + 1);
                    from = si;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let pair = AnchorPair {
                start: si + 1,
                end: ei + 1,
            };
            let repaired = integrate(&current, &partial, pair, db)?;
            if repaired != current {
                changed = true;
                current = repaired;
            }
            from = si;
        }
        if !changed {
            break;
        }
        current = normalize_plan(&order_by_dependencies(&current, db), db);
    }
    Ok(current)
}

/// Brings recorded decompositions in line with a repaired plan: a Mine entry
/// for a below-ground item gains a dig-down sub-goal when the repaired plan
/// digs down before that mine.
pub fn repair_trace(trace: &PlanningTrace, repaired: &Plan, db: &RecipeDb) -> PlanningTrace {
    let dig_at = repaired
        .iter()
        .position(|s| matches!(s, Step::DigDown { .. }));
    let mut out = trace.clone();
    let Some(dig_at) = dig_at else {
        return out;
    };
    for entry in &mut out.entries {
        let Step::Mine { item, tool, .. } = &entry.result.step else {
            continue;
        };
        let below = db
            .recipe(item, RecipeKind::Mine)
            .is_some_and(|r| r.location == RequiredLocation::BelowGround);
        let mined_after = repaired
            .iter()
            .position(|s| s.key() == entry.result.step.key())
            .is_some_and(|at| at > dig_at);
        let has_dig = entry
            .result
            .sub_goals
            .iter()
            .any(|g| matches!(g, Goal::ReachBelowGround { .. }));
        if below && mined_after && !has_dig {
            let tool = tool.clone().or_else(|| db.dig_tool().cloned());
            if let Some(tool) = tool {
                entry.result.sub_goals.push(Goal::ReachBelowGround { tool });
            }
        }
    }
    out
}
