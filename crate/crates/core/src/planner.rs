//! Backward planning with a FIFO goal queue and a LIFO step stack, followed by
//! step fusion and canonical ordering.
//!
//! Starting from the task goal, each iteration pops the head goal, asks the
//! decomposer for one achieving step plus sub-goals, pushes the step and
//! enqueues the sub-goals. Popping the stack afterwards yields the steps from
//! the initial state towards the goal.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::vec::Vec;

use crate::decompose::{DecomposeError, Decomposer, DecompositionResult};
use crate::goal::Goal;
use crate::item::{ItemId, Quantity};
use crate::recipe::{Recipe, RecipeDb, RecipeKind, RequiredLocation};
use crate::step::{Plan, Step, StepKey};

pub const DEFAULT_ITERATION_BUDGET: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PlannerConfig {
    /// Maximum number of decompose calls per plan.
    pub iteration_budget: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            iteration_budget: DEFAULT_ITERATION_BUDGET,
        }
    }
}

/// Source of remembered decompositions consulted before each decompose call.
pub trait MemoryHints {
    fn hint(&self, goal: &Goal) -> Option<DecompositionResult>;
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceEntry {
    pub goal: Goal,
    pub result: DecompositionResult,
}

/// Every decomposition made while planning, in call order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PlanningTrace {
    pub entries: Vec<TraceEntry>,
}

impl PlanningTrace {
    pub fn iterations(&self) -> usize {
        self.entries.len()
    }

    /// The popped step stack: decomposed steps in reverse call order.
    pub fn raw_plan(&self) -> Plan {
        self.entries
            .iter()
            .rev()
            .map(|e| e.result.step.clone())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum PlanError {
    #[error("planning did not finish within {budget} decompositions")]
    IterationBudgetExceeded { budget: usize },
    #[error("decomposition loops back on itself: {}", render_chain(.0))]
    DecompositionCycle(Vec<Goal>),
    #[error(transparent)]
    Decompose(#[from] DecomposeError),
}

fn render_chain(chain: &[Goal]) -> alloc::string::String {
    let parts: Vec<alloc::string::String> = chain.iter().map(|g| alloc::format!("{g}")).collect();
    parts.join(" -> ")
}

/// Goal identity for cycle detection; quantities do not matter.
#[derive(Clone, Debug, PartialEq, Eq)]
enum Label {
    Item(ItemId),
    Below(ItemId),
}

fn label(goal: &Goal) -> Label {
    match goal {
        Goal::ObtainItem { item, .. } => Label::Item(item.clone()),
        Goal::ReachBelowGround { tool } => Label::Below(tool.clone()),
    }
}

/// Runs the goal-queue/step-stack loop and returns the trace; the raw plan is
/// [`PlanningTrace::raw_plan`].
pub fn expand_goal(
    goal: &Goal,
    decomposer: &dyn Decomposer,
    db: &RecipeDb,
    memory: Option<&dyn MemoryHints>,
    config: &PlannerConfig,
) -> Result<PlanningTrace, PlanError> {
    // each queued goal carries the goals it was derived from
    let mut queue: VecDeque<(Goal, Vec<Goal>)> = VecDeque::new();
    queue.push_back((goal.clone(), Vec::new()));
    let mut stack: Vec<Step> = Vec::new();
    let mut trace = PlanningTrace::default();

    while let Some((top, ancestors)) = queue.pop_front() {
        if let Goal::ObtainItem { item, .. } = &top {
            if db.is_reusable(item) && stack.iter().any(|s| produces(s) == Some(item)) {
                continue;
            }
        }
        if trace.entries.len() >= config.iteration_budget {
            return Err(PlanError::IterationBudgetExceeded {
                budget: config.iteration_budget,
            });
        }
        let hint = memory.and_then(|m| m.hint(&top));
        let result = decomposer.decompose(&top, hint.as_ref())?;

        let mut chain = ancestors;
        chain.push(top.clone());
        for sub in &result.sub_goals {
            let l = label(sub);
            if let Some(at) = chain.iter().position(|g| label(g) == l) {
                let mut cycle = chain[at..].to_vec();
                cycle.push(sub.clone());
                return Err(PlanError::DecompositionCycle(cycle));
            }
            queue.push_back((sub.clone(), chain.clone()));
        }
        stack.push(result.step.clone());
        trace.entries.push(TraceEntry { goal: top, result });
    }
    Ok(trace)
}

/// Plans `goal` backwards and returns the canonical plan plus the trace.
pub fn plan_backward(
    goal: &Goal,
    decomposer: &dyn Decomposer,
    db: &RecipeDb,
    memory: Option<&dyn MemoryHints>,
    config: &PlannerConfig,
) -> Result<(Plan, PlanningTrace), PlanError> {
    let trace = expand_goal(goal, decomposer, db, memory, config)?;
    let plan = canonicalize(&trace.raw_plan(), goal, db);
    Ok((plan, trace))
}

/// Fusion, quantity reconciliation, dependency ordering and normalization.
pub fn canonicalize(raw: &Plan, goal: &Goal, db: &RecipeDb) -> Plan {
    let fused = fuse_steps(raw, db);
    let reconciled = reconcile_quantities(&fused, goal, db);
    let ordered = order_by_dependencies(&reconciled, db);
    normalize_plan(&ordered, db)
}

/// The item a Mine, Craft or Smelt step adds to the inventory.
fn produces(step: &Step) -> Option<&ItemId> {
    match step {
        Step::Mine { item, .. } | Step::Craft { item, .. } | Step::Smelt { item, .. } => Some(item),
        Step::Equip { .. } | Step::DigDown { .. } => None,
    }
}

fn recipe_of<'a>(step: &Step, db: &'a RecipeDb) -> Option<&'a Recipe> {
    let kind = match step {
        Step::Mine { .. } => RecipeKind::Mine,
        Step::Craft { .. } => RecipeKind::Craft,
        Step::Smelt { .. } => RecipeKind::Smelt,
        _ => return None,
    };
    db.recipe(step.item()?, kind)
}

/// Merges steps with the same verb, item and tool into one placed at the
/// earliest occurrence, summing quantities.
///
/// Reusable items are capped at quantity 1. All Dig down steps collapse into
/// the first one, keeping the lowest-tier tool among them.
pub fn fuse_steps(plan: &Plan, db: &RecipeDb) -> Plan {
    let mut out: Vec<Step> = Vec::with_capacity(plan.len());
    let mut slots: BTreeMap<StepKey, usize> = BTreeMap::new();
    let mut dig: Option<usize> = None;
    for step in plan.iter() {
        if let Step::DigDown { tool } = step {
            match dig {
                None => {
                    dig = Some(out.len());
                    out.push(step.clone());
                }
                Some(at) => {
                    let Step::DigDown { tool: kept } = &out[at] else {
                        unreachable!()
                    };
                    if let (Some(new), Some(old)) = (db.tool_tier(tool), db.tool_tier(kept)) {
                        if new < old {
                            out[at] = step.clone();
                        }
                    }
                }
            }
            continue;
        }
        let key = step.key();
        match slots.get(&key) {
            Some(&at) => {
                let qty = match (out[at].qty(), step.qty()) {
                    (Some(a), Some(b)) => a.saturating_add(b),
                    (a, b) => a.or(b).unwrap_or(Quantity::ONE),
                };
                out[at] = out[at].with_qty(qty);
            }
            None => {
                slots.insert(key, out.len());
                out.push(step.clone());
            }
        }
    }
    for step in &mut out {
        if step.item().is_some_and(|i| db.is_reusable(i))
            && step.verb() != crate::step::StepVerb::Equip
        {
            *step = step.with_qty(Quantity::ONE);
        }
    }
    Plan::new(out)
}

/// Sets each producing step's quantity to exactly what the rest of the plan
/// consumes (plus the goal amount).
///
/// Per-goal rounding during decomposition over-produces raw materials, e.g.
/// three separate plank requests each round their logs up. Items produced by
/// more than one step, or by nothing, are left alone.
pub fn reconcile_quantities(plan: &Plan, goal: &Goal, db: &RecipeDb) -> Plan {
    let mut steps = plan.0.clone();
    for item in db.topological_order().iter().rev() {
        let mut producers = steps
            .iter()
            .enumerate()
            .filter(|(_, s)| produces(s) == Some(item));
        let (Some((p, _)), None) = (producers.next(), producers.next()) else {
            continue;
        };
        if db.is_reusable(item) {
            let qty = match goal {
                Goal::ObtainItem { item: g, qty } if g == item => *qty,
                _ => Quantity::ONE,
            };
            steps[p] = steps[p].with_qty(qty);
            continue;
        }
        let mut demand: u32 = match goal {
            Goal::ObtainItem { item: g, qty } if g == item => qty.get(),
            _ => 0,
        };
        for (j, step) in steps.iter().enumerate() {
            if j == p {
                continue;
            }
            let (Some(recipe), Some(qty)) = (recipe_of(step, db), step.qty()) else {
                continue;
            };
            let batches = recipe.batches(qty.get());
            for (input, n) in recipe.inputs.iter().chain(recipe.fuel.iter()) {
                if input == item {
                    demand = demand.saturating_add(n.get().saturating_mul(batches));
                }
            }
        }
        if let Some(qty) = Quantity::new(demand) {
            steps[p] = steps[p].with_qty(qty);
        }
    }
    Plan::new(steps)
}

/// Tool tier a Mine or Dig down step needs, if any.
fn required_tier(step: &Step, db: &RecipeDb) -> Option<usize> {
    match step {
        Step::Mine { item, tool, .. } => {
            let min = db
                .recipe(item, RecipeKind::Mine)
                .and_then(|r| r.min_tool.as_ref())
                .and_then(|t| db.tool_tier(t));
            let declared = tool.as_ref().and_then(|t| db.tool_tier(t));
            min.max(declared)
        }
        Step::DigDown { tool } => Some(db.tool_tier(tool).unwrap_or(0)),
        _ => None,
    }
}

fn mine_location(step: &Step, db: &RecipeDb) -> RequiredLocation {
    match step {
        Step::Mine { item, .. } => db
            .recipe(item, RecipeKind::Mine)
            .map_or(RequiredLocation::Any, |r| r.location),
        _ => RequiredLocation::Any,
    }
}

/// Items the step uses up.
fn consumes(step: &Step, db: &RecipeDb) -> Vec<ItemId> {
    match step {
        Step::Craft { .. } | Step::Smelt { .. } => recipe_of(step, db)
            .map(|r| {
                r.inputs
                    .iter()
                    .chain(r.fuel.iter())
                    .map(|(i, _)| i.clone())
                    .collect()
            })
            .unwrap_or_default(),
        _ => Vec::new(),
    }
}

/// Items that must be held but are not used up; for tool requirements every
/// acceptable tier is listed.
fn catalysts(step: &Step, db: &RecipeDb) -> Vec<ItemId> {
    let mut out = Vec::new();
    match step {
        Step::Craft { .. } | Step::Smelt { .. } => {
            if let Some(station) = recipe_of(step, db).and_then(|r| r.station.clone()) {
                out.push(station);
            }
        }
        Step::Equip { item, .. } => out.push(item.clone()),
        Step::Mine { .. } | Step::DigDown { .. } => {
            if let Some(tool) = step.tool() {
                if db.tool_tier(tool).is_none() {
                    out.push(tool.clone());
                }
            }
            if let Some(tier) = required_tier(step, db) {
                out.extend(db.tool_order().iter().skip(tier).cloned());
            }
        }
    }
    out
}

/// Topologically orders steps so producers come before the steps needing
/// their output, Dig down comes after its tool and after any above-ground
/// mining, and below-ground mining comes after Dig down. Ties keep input
/// order. Plans whose needs are circular are returned unchanged.
pub fn order_by_dependencies(plan: &Plan, db: &RecipeDb) -> Plan {
    let n = plan.len();
    let mut edges: BTreeSet<(usize, usize)> = BTreeSet::new();
    for (c, step) in plan.iter().enumerate() {
        let mut needs = consumes(step, db);
        if let Some(tier) = required_tier(step, db) {
            // depend on the weakest acceptable tool the plan makes
            let tool = db
                .tool_order()
                .iter()
                .skip(tier)
                .find(|t| plan.iter().any(|s| produces(s) == Some(*t)));
            needs.extend(tool.cloned());
        }
        let mut held = catalysts(step, db);
        if required_tier(step, db).is_some() {
            held.retain(|i| db.tool_tier(i).is_none());
        }
        needs.extend(held);
        for (p, other) in plan.iter().enumerate() {
            if p != c && produces(other).is_some_and(|i| needs.contains(i)) {
                edges.insert((p, c));
            }
        }
        if let Step::DigDown { .. } = step {
            for (m, other) in plan.iter().enumerate() {
                match mine_location(other, db) {
                    RequiredLocation::AboveGround => {
                        edges.insert((m, c));
                    }
                    RequiredLocation::BelowGround => {
                        edges.insert((c, m));
                    }
                    RequiredLocation::Any => {}
                }
            }
        }
    }
    let mut indegree = alloc::vec![0usize; n];
    for &(_, to) in &edges {
        indegree[to] += 1;
    }
    let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(i) = ready.pop_first() {
        order.push(i);
        for &(_, to) in edges.range((i, 0)..(i + 1, 0)) {
            indegree[to] -= 1;
            if indegree[to] == 0 {
                ready.insert(to);
            }
        }
    }
    if order.len() < n {
        log::debug!("plan has circular needs; keeping its order");
        return plan.clone();
    }
    order.into_iter().map(|i| plan[i].clone()).collect()
}

fn interacts(a: &Step, b: &Step, db: &RecipeDb) -> bool {
    let touches = |x: &Step, y: &Step| {
        let needs_y = consumes(y, db);
        let held_y = catalysts(y, db);
        if let Some(item) = produces(x) {
            if needs_y.contains(item) || held_y.contains(item) {
                return true;
            }
        }
        consumes(x, db).iter().any(|i| held_y.contains(i))
    };
    let location = |x: &Step, y: &Step| {
        matches!(x, Step::DigDown { .. }) && mine_location(y, db) != RequiredLocation::Any
    };
    touches(a, b) || touches(b, a) || location(a, b) || location(b, a)
}

fn class(step: &Step, db: &RecipeDb) -> u8 {
    match step {
        Step::Mine { .. } => 0,
        Step::DigDown { .. } => 1,
        Step::Craft { item, .. } | Step::Smelt { item, .. } => {
            if db.is_reusable(item) {
                3
            } else {
                2
            }
        }
        Step::Equip { .. } => 4,
    }
}

/// Puts a plan into canonical order without changing which steps can run.
///
/// Steps that interact (one makes, uses up or needs something the other
/// touches, or one digs down and the other mines at a fixed level) keep their
/// relative order. Each step gets a depth, the length of the longest chain of
/// interacting predecessors, and the plan is stable-sorted by depth; within a
/// depth mining comes first, then digging, then consumable crafts, then tools
/// and stations, then equips, ties broken by item name.
pub fn normalize_plan(plan: &Plan, db: &RecipeDb) -> Plan {
    let steps = plan.steps();
    let mut depth = alloc::vec![0usize; steps.len()];
    for j in 0..steps.len() {
        for i in 0..j {
            if depth[i] + 1 > depth[j] && interacts(&steps[i], &steps[j], db) {
                depth[j] = depth[i] + 1;
            }
        }
    }
    let mut order: Vec<usize> = (0..steps.len()).collect();
    order.sort_by(|&a, &b| {
        let key = |i: usize| {
            let s = &steps[i];
            (
                depth[i],
                class(s, db),
                s.item().cloned(),
                s.verb(),
                s.tool().cloned(),
            )
        };
        key(a).cmp(&key(b))
    });
    order.into_iter().map(|i| steps[i].clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decompose::{FaultProfile, RecipeOracle};
    use crate::recipe::fixtures::{id, q, tech_tree};
    use crate::simulator::{execute_plan, ExecutionMode, StochasticProfile};
    use alloc::string::ToString;
    use alloc::vec;
    use proptest::prelude::*;

    const STONE: &str = "1. Mine 3 log with barehand\n2. Craft 9 planks\n3. Craft 2 stick\n\
                         4. Craft 1 crafting_table\n5. Craft 1 wooden_pickaxe\n\
                         6. Dig down with wooden_pickaxe\n7. Mine 3 stone with wooden_pickaxe";

    fn plan_for(goal: &Goal, db: &RecipeDb) -> (Plan, PlanningTrace) {
        let oracle = RecipeOracle::new(db);
        plan_backward(goal, &oracle, db, None, &PlannerConfig::default()).unwrap()
    }

    fn parse(text: &str, db: &RecipeDb) -> Plan {
        Plan::parse(text, db).unwrap()
    }

    fn accepted(goal: &Goal, plan: &Plan, db: &RecipeDb) -> bool {
        let report = execute_plan(
            goal,
            plan,
            db,
            &StochasticProfile::deterministic(),
            ExecutionMode::Strict,
        );
        report.all_completed()
    }

    #[test]
    fn collect_three_stone() {
        let db = tech_tree();
        let goal = Goal::obtain(id("stone"), q(3));
        let (plan, trace) = plan_for(&goal, &db);
        assert_eq!(plan.to_string(), STONE);
        assert_eq!(trace.iterations(), 11);
    }

    #[test]
    fn leaf_goal_is_one_iteration() {
        let db = tech_tree();
        let goal = Goal::obtain(id("log"), q(3));
        let (plan, trace) = plan_for(&goal, &db);
        assert_eq!(plan.to_string(), "1. Mine 3 log with barehand");
        assert_eq!(trace.iterations(), 1);
    }

    #[test]
    fn diamond_pickaxe_plan() {
        let db = tech_tree();
        let goal = Goal::obtain(id("diamond_pickaxe"), q(1));
        let (plan, _) = plan_for(&goal, &db);
        assert!((15..=17).contains(&plan.len()), "{plan}");
        assert_eq!(
            plan.first().unwrap().to_string(),
            "Mine 5 log with barehand"
        );
        assert_eq!(plan.last().unwrap().to_string(), "Craft 1 diamond_pickaxe");
        assert!(accepted(&goal, &plan, &db));
    }

    #[test]
    fn trace_reversed_is_the_raw_plan() {
        let db = tech_tree();
        let goal = Goal::obtain(id("iron_pickaxe"), q(1));
        let oracle = RecipeOracle::new(&db);
        let trace = expand_goal(&goal, &oracle, &db, None, &PlannerConfig::default()).unwrap();
        let mut steps: Vec<Step> = trace
            .entries
            .iter()
            .map(|e| e.result.step.clone())
            .collect();
        steps.reverse();
        assert_eq!(trace.raw_plan().into_steps(), steps);
    }

    #[test]
    fn budget_is_enforced() {
        let db = tech_tree();
        let goal = Goal::obtain(id("diamond_pickaxe"), q(1));
        let oracle = RecipeOracle::new(&db);
        let tight = PlannerConfig {
            iteration_budget: 5,
        };
        assert_eq!(
            plan_backward(&goal, &oracle, &db, None, &tight).unwrap_err(),
            PlanError::IterationBudgetExceeded { budget: 5 }
        );
    }

    struct Looping;

    impl Decomposer for Looping {
        fn decompose(
            &self,
            goal: &Goal,
            _hint: Option<&DecompositionResult>,
        ) -> Result<DecompositionResult, DecomposeError> {
            let (step, sub) = match goal.item().map(ItemId::as_str) {
                Some("planks") => (
                    Step::Craft {
                        item: id("planks"),
                        qty: q(3),
                    },
                    "log",
                ),
                _ => (
                    Step::Mine {
                        item: id("log"),
                        qty: q(1),
                        tool: None,
                    },
                    "planks",
                ),
            };
            Ok(DecompositionResult::new(
                step,
                vec![Goal::obtain(id(sub), q(1))],
            ))
        }
    }

    #[test]
    fn cyclic_decomposer_is_caught() {
        let db = tech_tree();
        let goal = Goal::obtain(id("planks"), q(3));
        match plan_backward(&goal, &Looping, &db, None, &PlannerConfig::default()) {
            Err(PlanError::DecompositionCycle(chain)) => {
                assert_eq!(chain.first().and_then(Goal::item), Some(&id("planks")));
                assert_eq!(chain.last().and_then(Goal::item), Some(&id("planks")));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn fusion_sums_and_caps() {
        let db = tech_tree();
        let raw = parse(
            "Craft 3 stick\nCraft 1 crafting_table\nCraft 2 stick\nCraft 1 crafting_table",
            &db,
        );
        assert_eq!(
            fuse_steps(&raw, &db).to_string(),
            "1. Craft 5 stick\n2. Craft 1 crafting_table"
        );
        let distinct = parse("Mine 3 log with barehand\nCraft 9 planks", &db);
        assert_eq!(fuse_steps(&distinct, &db), distinct);
        let digs = parse(
            "Dig down with stone_pickaxe\nMine 1 log with barehand\nDig down with wooden_pickaxe",
            &db,
        );
        assert_eq!(
            fuse_steps(&digs, &db).to_string(),
            "1. Dig down with wooden_pickaxe\n2. Mine 1 log with barehand"
        );
    }

    #[test]
    fn crafting_table_before_stick_input_is_canonicalized() {
        let db = tech_tree();
        let swapped = parse(
            "Mine 3 log with barehand\nCraft 9 planks\nCraft 1 crafting_table\nCraft 2 stick\n\
             Craft 1 wooden_pickaxe\nDig down with wooden_pickaxe\nMine 3 stone with wooden_pickaxe",
            &db,
        );
        assert_eq!(normalize_plan(&swapped, &db).to_string(), STONE);
        let canonical = parse(STONE, &db);
        assert_eq!(normalize_plan(&canonical, &db), canonical);
    }

    #[test]
    fn dependency_order_fixes_raw_stack_order() {
        let db = tech_tree();
        let raw = parse(
            "Mine 3 log with barehand\nCraft 9 planks\nDig down with wooden_pickaxe\n\
             Craft 1 crafting_table\nCraft 2 stick\nCraft 1 wooden_pickaxe\n\
             Mine 3 stone with wooden_pickaxe",
            &db,
        );
        let ordered = order_by_dependencies(&raw, &db);
        assert_eq!(normalize_plan(&ordered, &db).to_string(), STONE);
    }

    #[test]
    fn reconcile_removes_rounding_waste() {
        let db = tech_tree();
        let goal = Goal::obtain(id("stone"), q(3));
        let fused = parse(
            "Mine 4 log with barehand\nCraft 9 planks\nCraft 1 crafting_table\nCraft 2 stick\n\
             Dig down with wooden_pickaxe\nCraft 1 wooden_pickaxe\nMine 3 stone with wooden_pickaxe",
            &db,
        );
        let out = reconcile_quantities(&fused, &goal, &db);
        assert_eq!(out[0].to_string(), "Mine 3 log with barehand");
    }

    #[test]
    fn with_and_without_faults_differ_only_by_dig_down() {
        let db = tech_tree();
        for item in ["stone", "iron_pickaxe", "diamond_pickaxe", "torch"] {
            let goal = Goal::obtain(id(item), q(2));
            let (good, _) = plan_for(&goal, &db);
            let faulty = RecipeOracle::new(&db).with_fault(FaultProfile::OmitDigDown);
            let (bad, _) =
                plan_backward(&goal, &faulty, &db, None, &PlannerConfig::default()).unwrap();
            let mut a: Vec<alloc::string::String> = good
                .iter()
                .filter(|s| !matches!(s, Step::DigDown { .. }))
                .map(|s| s.to_string())
                .collect();
            let mut b: Vec<alloc::string::String> = bad.iter().map(|s| s.to_string()).collect();
            a.sort();
            b.sort();
            assert_eq!(a, b, "{item}");
        }
    }

    /// Number of decompositions the tree of `goal` has when every sub-goal is
    /// expanded independently, reusable items only once.
    fn tree_size(goal: &Goal, db: &RecipeDb, oracle: &RecipeOracle<'_>) -> usize {
        let result = oracle.exact(goal).unwrap();
        1 + result
            .sub_goals
            .iter()
            .map(|g| tree_size(g, db, oracle))
            .sum::<usize>()
    }

    #[test]
    fn iterations_bounded_by_unfolded_tree() {
        let db = tech_tree();
        let oracle = RecipeOracle::new(&db);
        for item in db.items() {
            let goal = Goal::obtain(item.clone(), q(4));
            let (_, trace) = plan_for(&goal, &db);
            assert!(trace.iterations() <= tree_size(&goal, &db, &oracle));
        }
    }

    #[test]
    fn every_item_yields_an_executable_plan() {
        let db = tech_tree();
        for item in db.items() {
            for n in [1, 2, 7] {
                let goal = Goal::obtain(item.clone(), q(n));
                let (plan, _) = plan_for(&goal, &db);
                let report = execute_plan(
                    &goal,
                    &plan,
                    &db,
                    &StochasticProfile::deterministic(),
                    ExecutionMode::Strict,
                );
                assert!(report.goal_achieved, "{goal}:\n{plan}");
            }
        }
    }

    fn arb_goal() -> impl Strategy<Value = Goal> {
        let items: &'static [&str] = &[
            "stone",
            "torch",
            "iron_pickaxe",
            "diamond_pickaxe",
            "furnace",
            "iron_ingot",
        ];
        (proptest::sample::select(items), 1u32..6).prop_map(|(i, n)| Goal::obtain(id(i), q(n)))
    }

    /// A random linear extension of the interaction order of `plan`.
    fn shuffle_independent(plan: &Plan, db: &RecipeDb, picks: &[usize]) -> Plan {
        let steps = plan.steps();
        let mut placed = vec![false; steps.len()];
        let mut out = Vec::new();
        for k in 0..steps.len() {
            let ready: Vec<usize> = (0..steps.len())
                .filter(|&j| !placed[j])
                .filter(|&j| (0..j).all(|i| placed[i] || !interacts(&steps[i], &steps[j], db)))
                .collect();
            let pick = ready[picks[k % picks.len()] % ready.len()];
            placed[pick] = true;
            out.push(steps[pick].clone());
        }
        Plan::new(out)
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(goal in arb_goal()) {
            let db = tech_tree();
            let (plan, _) = plan_for(&goal, &db);
            prop_assert_eq!(normalize_plan(&plan, &db), plan);
        }

        #[test]
        fn normalize_ignores_independent_shuffles(goal in arb_goal(), picks in proptest::collection::vec(0usize..100, 1..30)) {
            let db = tech_tree();
            let (plan, _) = plan_for(&goal, &db);
            let shuffled = shuffle_independent(&plan, &db, &picks);
            prop_assert!(accepted(&goal, &shuffled, &db));
            prop_assert_eq!(normalize_plan(&shuffled, &db), plan);
        }

        #[test]
        fn normalize_preserves_acceptance(goal in arb_goal(), swaps in proptest::collection::vec((0usize..20, 0usize..20), 0..6)) {
            let db = tech_tree();
            let (plan, _) = plan_for(&goal, &db);
            let mut messy = plan.clone();
            for (a, b) in swaps {
                let n = messy.len();
                messy.swap(a % n, b % n);
            }
            let normalized = normalize_plan(&messy, &db);
            prop_assert_eq!(accepted(&goal, &messy, &db), accepted(&goal, &normalized, &db));
        }
    }
}
