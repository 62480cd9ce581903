//! Backward-reasoning planning for crafting-style task domains.
//!
//! The crate is `no_std` (with `alloc`) and contains every algorithmic piece of
//! the planner: the domain model and its text grammar, the goal decomposer
//! contract with a recipe-oracle backend, the goal-queue/step-stack planner,
//! state-consistency repair, stage memory, a deterministic crafting-world
//! simulator and the textual plan metrics. File formats, HTTP transport and
//! the command line live in the `bar` companion crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod consistency;
pub mod decompose;
pub mod goal;
pub mod item;
pub mod memory;
pub mod metrics;
pub mod planner;
pub mod prompt;
pub mod recipe;
pub mod simulator;
pub mod step;
pub mod task;

pub use consistency::{
    choose_anchors_scoring, choose_anchors_sliding, integrate, maintain_consistency, repair_trace,
    AnchorMethod, AnchorPair, ConsistencyConfig, ConsistencyError, ForwardCompleter,
    SimulationCompleter, SimulationScorer, StepRating, StepScorer,
};
pub use decompose::{
    validate_hint, DecomposeError, Decomposer, DecompositionResult, FaultProfile, RecipeOracle,
};
pub use goal::{Goal, GoalKey};
pub use item::{ItemId, Quantity};
pub use memory::{MatchMode, Retriever, StageMemoryEntry, StageMemoryStore, DEFAULT_THRESHOLD};
pub use metrics::{accuracy, aggregate, edit_distance, evaluate, f1, MetricResult, MetricSummary};
pub use planner::{
    canonicalize, expand_goal, fuse_steps, normalize_plan, order_by_dependencies, plan_backward,
    reconcile_quantities, MemoryHints, PlanError, PlannerConfig, PlanningTrace, TraceEntry,
};
pub use recipe::{Location, Recipe, RecipeDb, RecipeError, RecipeKind, RequiredLocation};
pub use simulator::{
    execute_plan, run_steps, simulate_step, success_rate, ExecutionMode, ExecutionReport,
    FailureReason, StepOutcome, StepStatus, StochasticProfile, WorldState, YieldSampler,
};
pub use step::{ParseError, Plan, Step, StepKey, StepVerb};
pub use task::{Task, TaskGroup};
