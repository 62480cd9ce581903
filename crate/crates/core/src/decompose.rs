//! One-goal decomposition: a single achieving step plus the sub-goals that
//! must hold before it.

use alloc::string::String;
use alloc::vec::Vec;

use crate::goal::Goal;
use crate::item::{ItemId, Quantity};
use crate::recipe::{Recipe, RecipeDb, RecipeKind, RequiredLocation};
use crate::step::Step;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DecompositionResult {
    pub step: Step,
    pub sub_goals: Vec<Goal>,
    pub thought: Option<String>,
}

impl DecompositionResult {
    pub fn new(step: Step, sub_goals: Vec<Goal>) -> Self {
        DecompositionResult {
            step,
            sub_goals,
            thought: None,
        }
    }

    /// Equality ignoring the free-text thought.
    pub fn same_decomposition(&self, other: &DecompositionResult) -> bool {
        self.step == other.step && self.sub_goals == other.sub_goals
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum DecomposeError {
    #[error("no recipe produces {0}")]
    NoRecipe(ItemId),
    #[error("remote decomposer unavailable: {0}")]
    RemoteUnavailable(String),
    #[error("could not parse remote response: {0:?}")]
    RemoteParseError(String),
}

/// The `Decompose` call of the backward planner.
pub trait Decomposer {
    /// Splits `goal` into a step and sub-goals. A `hint` comes from stage
    /// memory and targets the same goal.
    fn decompose(
        &self,
        goal: &Goal,
        hint: Option<&DecompositionResult>,
    ) -> Result<DecompositionResult, DecomposeError>;
}

impl<D: Decomposer + ?Sized> Decomposer for &D {
    fn decompose(
        &self,
        goal: &Goal,
        hint: Option<&DecompositionResult>,
    ) -> Result<DecompositionResult, DecomposeError> {
        (**self).decompose(goal, hint)
    }
}

/// Deliberate mistakes injected into oracle output, for exercising repair.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum FaultProfile {
    #[default]
    None,
    /// Drop every "dig down" sub-goal.
    OmitDigDown,
}

/// Decomposes goals by looking recipes up in a [`RecipeDb`].
#[derive(Clone, Debug)]
pub struct RecipeOracle<'a> {
    db: &'a RecipeDb,
    fault: FaultProfile,
}

impl<'a> RecipeOracle<'a> {
    pub fn new(db: &'a RecipeDb) -> Self {
        RecipeOracle {
            db,
            fault: FaultProfile::None,
        }
    }

    pub fn with_fault(mut self, fault: FaultProfile) -> Self {
        self.fault = fault;
        self
    }

    pub fn db(&self) -> &'a RecipeDb {
        self.db
    }

    /// Fault-free decomposition straight from the recipes.
    pub fn exact(&self, goal: &Goal) -> Result<DecompositionResult, DecomposeError> {
        match goal {
            Goal::ReachBelowGround { tool } => Ok(DecompositionResult::new(
                Step::DigDown { tool: tool.clone() },
                Vec::new(),
            )),
            Goal::ObtainItem { item, qty } => {
                let recipe = self
                    .db
                    .producer(item)
                    .ok_or_else(|| DecomposeError::NoRecipe(item.clone()))?;
                Ok(decompose_with(recipe, *qty))
            }
        }
    }
}

fn decompose_with(recipe: &Recipe, qty: Quantity) -> DecompositionResult {
    let item = recipe.output.clone();
    let mut sub_goals = Vec::new();
    let step = match recipe.kind {
        RecipeKind::Mine => {
            if let Some(tool) = &recipe.min_tool {
                sub_goals.push(Goal::obtain(tool.clone(), Quantity::ONE));
                if recipe.location == RequiredLocation::BelowGround {
                    sub_goals.push(Goal::ReachBelowGround { tool: tool.clone() });
                }
            }
            Step::Mine {
                item,
                qty,
                tool: recipe.min_tool.clone(),
            }
        }
        RecipeKind::Craft | RecipeKind::Smelt => {
            let batches = recipe.batches(qty.get());
            for (input, n) in &recipe.inputs {
                sub_goals.push(Goal::obtain(input.clone(), scaled(*n, batches)));
            }
            if let Some(station) = &recipe.station {
                sub_goals.push(Goal::obtain(station.clone(), Quantity::ONE));
            }
            if let Some((fuel, n)) = &recipe.fuel {
                sub_goals.push(Goal::obtain(fuel.clone(), scaled(*n, batches)));
            }
            if recipe.kind == RecipeKind::Craft {
                Step::Craft { item, qty }
            } else {
                Step::Smelt { item, qty }
            }
        }
    };
    DecompositionResult::new(step, sub_goals)
}

fn scaled(n: Quantity, batches: u32) -> Quantity {
    Quantity::new(n.get().saturating_mul(batches)).unwrap_or(Quantity::ONE)
}

impl Decomposer for RecipeOracle<'_> {
    fn decompose(
        &self,
        goal: &Goal,
        hint: Option<&DecompositionResult>,
    ) -> Result<DecompositionResult, DecomposeError> {
        if let Some(hint) = hint {
            match validate_hint(self.db, goal, hint) {
                Ok(()) => return Ok(hint.clone()),
                Err(reason) => log::warn!("discarding memory hint for {goal}: {reason}"),
            }
        }
        let mut result = self.exact(goal)?;
        if self.fault == FaultProfile::OmitDigDown {
            result
                .sub_goals
                .retain(|g| !matches!(g, Goal::ReachBelowGround { .. }));
        }
        Ok(result)
    }
}

/// Checks that `hint` is a sound decomposition of `goal` under `db`: its step
/// achieves the goal and its sub-goals cover every precondition of that step.
pub fn validate_hint(db: &RecipeDb, goal: &Goal, hint: &DecompositionResult) -> Result<(), String> {
    use alloc::format;

    let mut items: Vec<&ItemId> = hint
        .step
        .item()
        .into_iter()
        .chain(hint.step.tool())
        .collect();
    for sub in &hint.sub_goals {
        match sub {
            Goal::ObtainItem { item, .. } => items.push(item),
            Goal::ReachBelowGround { tool } => items.push(tool),
        }
    }
    if let Some(unknown) = items.iter().find(|i| !db.contains(i)) {
        return Err(format!("unknown item {unknown}"));
    }

    let obtains = |item: &ItemId, at_least: u32| {
        hint.sub_goals.iter().any(|g| {
            matches!(g, Goal::ObtainItem { item: i, qty } if i == item && qty.get() >= at_least)
        })
    };
    let tier_at_least = |tool: &ItemId, min: &ItemId| match (db.tool_tier(tool), db.tool_tier(min))
    {
        (Some(t), Some(m)) => t >= m,
        _ => false,
    };

    match goal {
        Goal::ReachBelowGround { tool } => match &hint.step {
            Step::DigDown { tool: used } if tier_at_least(used, tool) || used == tool => Ok(()),
            other => Err(format!("step {other} does not dig down with {tool}")),
        },
        Goal::ObtainItem { item, qty } => {
            let step = &hint.step;
            if step.item() != Some(item) {
                return Err(format!("step {step} does not produce {item}"));
            }
            if step.qty().map_or(0, Quantity::get) < qty.get() {
                return Err(format!("step {step} makes fewer than {qty} {item}"));
            }
            let kind = match step {
                Step::Mine { .. } => RecipeKind::Mine,
                Step::Craft { .. } => RecipeKind::Craft,
                Step::Smelt { .. } => RecipeKind::Smelt,
                _ => return Err(format!("step {step} does not produce items")),
            };
            let recipe = db
                .recipe(item, kind)
                .ok_or_else(|| format!("no {kind} recipe for {item}"))?;
            match kind {
                RecipeKind::Mine => {
                    let Some(min) = &recipe.min_tool else {
                        return Ok(());
                    };
                    let Some(tool) = step.tool() else {
                        return Err(format!("mining {item} needs at least {min}"));
                    };
                    if !tier_at_least(tool, min) {
                        return Err(format!("{tool} is below {min}"));
                    }
                    if !obtains(tool, 1) {
                        return Err(format!("no sub-goal obtains {tool}"));
                    }
                    let digs = hint
                        .sub_goals
                        .iter()
                        .any(|g| matches!(g, Goal::ReachBelowGround { .. }));
                    if recipe.location == RequiredLocation::BelowGround && !digs {
                        return Err(format!("mining {item} needs to dig down first"));
                    }
                    Ok(())
                }
                RecipeKind::Craft | RecipeKind::Smelt => {
                    let batches = recipe.batches(step.qty().map_or(1, Quantity::get));
                    for (input, n) in recipe.inputs.iter().chain(recipe.fuel.iter()) {
                        if !obtains(input, n.get().saturating_mul(batches)) {
                            return Err(format!("sub-goals do not cover {input}"));
                        }
                    }
                    if let Some(station) = &recipe.station {
                        if !obtains(station, 1) {
                            return Err(format!("no sub-goal obtains {station}"));
                        }
                    }
                    Ok(())
                }
            }
        }
    }
}
