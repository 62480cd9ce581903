//! Static and dynamic experiment loops over a task dataset.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use bar_core::consistency::{
    maintain_consistency, repair_trace, AnchorMethod, ConsistencyConfig, ForwardCompleter,
    SimulationCompleter, SimulationScorer, StepScorer,
};
use bar_core::decompose::{Decomposer, FaultProfile, RecipeOracle};
use bar_core::memory::{MatchMode, StageMemoryStore, DEFAULT_THRESHOLD};
use bar_core::metrics::{evaluate, MetricResult};
use bar_core::planner::{plan_backward, MemoryHints, PlannerConfig, PlanningTrace};
use bar_core::simulator::{success_rate, StochasticProfile};
use bar_core::{Goal, ItemId, Plan, RecipeDb, Task, TaskGroup};
use rayon::prelude::*;
use serde::Serialize;

use crate::files::{self, FileError};
use crate::remote::{RemoteClient, RemoteCompleter, RemoteConfig, RemoteDecomposer, RemoteScorer};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Static,
    Dynamic,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub enum Backend {
    #[default]
    Oracle,
    Remote(RemoteConfig),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsistencyMode {
    Off,
    #[default]
    Scoring,
    Window,
}

/// Consistency settings shared by `plan` and `run`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConsistencySettings {
    pub mode: ConsistencyMode,
    pub t: u8,
    pub k: usize,
    pub rounds: u32,
}

impl Default for ConsistencySettings {
    fn default() -> Self {
        let base = ConsistencyConfig::default();
        ConsistencySettings {
            mode: ConsistencyMode::Scoring,
            t: base.t,
            k: base.k,
            rounds: base.rounds,
        }
    }
}

impl ConsistencySettings {
    pub fn config(&self, seed: u64) -> Option<ConsistencyConfig> {
        let method = match self.mode {
            ConsistencyMode::Off => return None,
            ConsistencyMode::Scoring => AnchorMethod::StepScoring,
            ConsistencyMode::Window => AnchorMethod::SlidingWindow,
        };
        Some(ConsistencyConfig {
            method,
            t: self.t,
            k: self.k,
            seed,
            window_pairs: None,
            rounds: self.rounds,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub backend: Backend,
    pub fault: FaultProfile,
    pub consistency: ConsistencySettings,
    /// Planning runs per task; seeds are `seed + run`.
    pub runs: u32,
    pub seed: u64,
    pub memory_threshold: f64,
    pub match_mode: MatchMode,
    /// Record/replan cycles in dynamic mode.
    pub rounds: u32,
    /// Per-item mining success probabilities used when executing plans.
    pub mine_yield: Vec<(ItemId, f64)>,
    /// `None` uses the bundled dataset.
    pub tasks_path: Option<PathBuf>,
    /// `None` uses the bundled recipe database.
    pub recipes_path: Option<PathBuf>,
    pub memory_path: Option<PathBuf>,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mode: Mode::Static,
            backend: Backend::Oracle,
            fault: FaultProfile::None,
            consistency: ConsistencySettings::default(),
            runs: 10,
            seed: 0,
            memory_threshold: DEFAULT_THRESHOLD,
            match_mode: MatchMode::Exact,
            rounds: 1,
            mine_yield: Vec::new(),
            tasks_path: None,
            recipes_path: None,
            memory_path: None,
            out_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    File(#[from] FileError),
    #[error("writing CSV report: {0}")]
    Csv(#[from] csv::Error),
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.runs == 0 {
            return Err(HarnessError::InvalidConfig(
                "runs must be at least 1".into(),
            ));
        }
        if self.mode == Mode::Dynamic && self.memory_path.is_none() {
            return Err(HarnessError::InvalidConfig(
                "dynamic mode needs a memory file".into(),
            ));
        }
        if self.mode == Mode::Dynamic && self.rounds == 0 {
            return Err(HarnessError::InvalidConfig(
                "rounds must be at least 1".into(),
            ));
        }
        if self.consistency.k == 0 {
            return Err(HarnessError::InvalidConfig("k must be at least 1".into()));
        }
        if !(1..=10).contains(&self.consistency.t) {
            return Err(HarnessError::InvalidConfig(
                "t must be between 1 and 10".into(),
            ));
        }
        Ok(())
    }

    pub fn profile(&self) -> StochasticProfile {
        self.mine_yield.iter().fold(
            StochasticProfile::deterministic().with_seed(self.seed),
            |p, (item, y)| p.with_yield(item.clone(), *y),
        )
    }
}

/// Decomposer, scorer and completer for one worker.
pub struct Pipeline<'a> {
    pub decomposer: Box<dyn Decomposer + 'a>,
    pub scorer: Box<dyn StepScorer + 'a>,
    pub completer: Box<dyn ForwardCompleter + 'a>,
}

impl<'a> Pipeline<'a> {
    pub fn new(db: &'a RecipeDb, backend: &Backend, fault: FaultProfile, k: usize) -> Self {
        match backend {
            Backend::Oracle => Pipeline {
                decomposer: Box::new(RecipeOracle::new(db).with_fault(fault)),
                scorer: Box::new(SimulationScorer { db, k }),
                completer: Box::new(SimulationCompleter::new(db, k)),
            },
            Backend::Remote(config) => {
                let client = RemoteClient::new(config.clone());
                Pipeline {
                    decomposer: Box::new(RemoteDecomposer::new(client.clone(), db)),
                    scorer: Box::new(RemoteScorer::new(client.clone())),
                    completer: Box::new(RemoteCompleter::new(client, db)),
                }
            }
        }
    }
}

/// A plan together with the trace whose decompositions produced it.
#[derive(Clone, Debug)]
pub struct PlannedGoal {
    pub plan: Plan,
    pub trace: PlanningTrace,
}

/// Backward planning followed by optional consistency repair. Repair
/// failures keep the unrepaired plan.
pub fn plan_goal(
    goal: &Goal,
    db: &RecipeDb,
    pipeline: &Pipeline<'_>,
    consistency: Option<&ConsistencyConfig>,
    memory: Option<&dyn MemoryHints>,
) -> Result<PlannedGoal, bar_core::PlanError> {
    let (plan, trace) = plan_backward(
        goal,
        pipeline.decomposer.as_ref(),
        db,
        memory,
        &PlannerConfig::default(),
    )?;
    let Some(cfg) = consistency else {
        return Ok(PlannedGoal { plan, trace });
    };
    match maintain_consistency(
        &plan,
        goal,
        cfg,
        pipeline.scorer.as_ref(),
        pipeline.completer.as_ref(),
        db,
    ) {
        Ok(repaired) if repaired != plan => {
            let trace = repair_trace(&trace, &repaired, db);
            Ok(PlannedGoal {
                plan: repaired,
                trace,
            })
        }
        Ok(_) => Ok(PlannedGoal { plan, trace }),
        Err(e) => {
            log::warn!("consistency repair for {goal} failed: {e}");
            Ok(PlannedGoal { plan, trace })
        }
    }
}

/// Per-task results, averaged over runs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TaskResult {
    pub task_id: String,
    #[serde(serialize_with = "display")]
    pub group: TaskGroup,
    /// Ground-truth length.
    pub plan_len: usize,
    pub accuracy: f64,
    pub f1: f64,
    pub edit_distance: f64,
    /// Runs whose planning failed; each is scored worst-case.
    pub failures: u32,
    /// Mean execution success rate of the run plans.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub success_rate: Option<f64>,
    #[serde(skip)]
    pub first_plan: Option<Plan>,
    #[serde(skip)]
    pub elapsed: Duration,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct GroupSummary {
    pub tasks: usize,
    pub accuracy: f64,
    pub f1: f64,
    pub edit_distance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub success_rate: Option<f64>,
}

/// One planning pass over the dataset.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseReport {
    /// 1 is memory-free planning; later phases plan with memory hints.
    pub phase: u32,
    pub memory_entries: usize,
    #[serde(serialize_with = "group_map")]
    pub groups: BTreeMap<TaskGroup, GroupSummary>,
    pub tasks: Vec<TaskResult>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub mode: Mode,
    pub decomposer: String,
    pub fault: String,
    pub consistency: ConsistencyMode,
    pub t: u8,
    pub k: usize,
    pub consistency_rounds: u32,
    pub runs: u32,
    pub memory_threshold: f64,
    pub rounds: u32,
    pub mine_yield: BTreeMap<String, f64>,
    pub tasks: String,
    pub recipes: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub config: ConfigEcho,
    pub seed: u64,
    /// Results of the final phase.
    #[serde(serialize_with = "group_map")]
    pub groups: BTreeMap<TaskGroup, GroupSummary>,
    /// Final-phase means bucketed by ground-truth plan length.
    pub lengths: BTreeMap<usize, GroupSummary>,
    pub tasks: Vec<TaskResult>,
    pub failures: u32,
    /// Every phase in order; static runs have exactly one.
    pub phases: Vec<PhaseReport>,
}

impl ExperimentReport {
    pub fn phase(&self, phase: u32) -> Option<&PhaseReport> {
        self.phases.iter().find(|p| p.phase == phase)
    }

    /// Mean planning time per task and phase, in milliseconds.
    pub fn timing(&self) -> BTreeMap<String, BTreeMap<String, f64>> {
        self.phases
            .iter()
            .map(|p| {
                let per_task = p
                    .tasks
                    .iter()
                    .map(|t| (t.task_id.clone(), t.elapsed.as_secs_f64() * 1000.0))
                    .collect();
                (format!("phase_{}", p.phase), per_task)
            })
            .collect()
    }
}

fn display<S: serde::Serializer>(v: &impl std::fmt::Display, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

fn group_map<S: serde::Serializer>(
    groups: &BTreeMap<TaskGroup, GroupSummary>,
    s: S,
) -> Result<S::Ok, S::Error> {
    s.collect_map(groups.iter().map(|(g, v)| (g.as_str(), v)))
}

struct Experiment {
    config: ExperimentConfig,
    db: RecipeDb,
    tasks: Vec<Task>,
}

impl Experiment {
    fn load(config: &ExperimentConfig) -> Result<Self, HarnessError> {
        config.validate()?;
        let db = files::recipe_db_from(config.recipes_path.as_deref())?;
        let tasks = files::tasks_from(config.tasks_path.as_deref(), &db)?;
        Ok(Experiment {
            config: config.clone(),
            db,
            tasks,
        })
    }

    fn echo(&self) -> ConfigEcho {
        let c = &self.config;
        let path = |p: &Option<PathBuf>| {
            p.as_ref()
                .map_or_else(|| "bundled".to_string(), |p| p.display().to_string())
        };
        ConfigEcho {
            mode: c.mode,
            decomposer: match &c.backend {
                Backend::Oracle => "oracle".into(),
                Backend::Remote(r) => format!("remote {}", r.endpoint),
            },
            fault: match c.fault {
                FaultProfile::None => "none".into(),
                FaultProfile::OmitDigDown => "omit-digdown".into(),
            },
            consistency: c.consistency.mode,
            t: c.consistency.t,
            k: c.consistency.k,
            consistency_rounds: c.consistency.rounds,
            runs: c.runs,
            memory_threshold: c.memory_threshold,
            rounds: if c.mode == Mode::Dynamic { c.rounds } else { 0 },
            mine_yield: c
                .mine_yield
                .iter()
                .map(|(i, p)| (i.to_string(), *p))
                .collect(),
            tasks: path(&c.tasks_path),
            recipes: path(&c.recipes_path),
        }
    }

    /// Plans every task `runs` times. With `execute`, each run plan's success
    /// rate is measured too. Returns results plus the traces of every
    /// successful run, in task then run order.
    fn phase(
        &self,
        memory: Option<&StageMemoryStore>,
        execute: bool,
    ) -> Vec<(TaskResult, Vec<(PlanningTrace, f64)>)> {
        let profile = self.config.profile();
        self.tasks
            .par_iter()
            .map(|task| {
                let started = Instant::now();
                let pipeline = Pipeline::new(
                    &self.db,
                    &self.config.backend,
                    self.config.fault,
                    self.config.consistency.k,
                );
                let hints = memory.map(|m| m.hints(self.config.memory_threshold));
                let hints = hints.as_ref().map(|h| h as &dyn MemoryHints);
                let mut metrics = Vec::new();
                let mut rates = Vec::new();
                let mut traces = Vec::new();
                let mut failures = 0;
                let mut first_plan = None;
                for run in 0..self.config.runs {
                    let seed = self.config.seed.wrapping_add(u64::from(run));
                    let consistency = self.config.consistency.config(seed);
                    match plan_goal(&task.goal, &self.db, &pipeline, consistency.as_ref(), hints) {
                        Ok(planned) => {
                            metrics.push(evaluate(&planned.plan, &task.ground_truth));
                            if execute {
                                let rate = success_rate(
                                    &task.goal,
                                    &planned.plan,
                                    &self.db,
                                    &profile.clone().with_seed(seed),
                                    self.config.runs,
                                );
                                rates.push(rate);
                                traces.push((planned.trace, rate));
                            }
                            first_plan.get_or_insert(planned.plan);
                        }
                        Err(e) => {
                            log::warn!("task {} run {run}: {e}", task.id);
                            failures += 1;
                            metrics.push(MetricResult {
                                accuracy: 0.0,
                                f1: 0.0,
                                edit_distance: task.ground_truth.len(),
                            });
                            if execute {
                                rates.push(0.0);
                            }
                        }
                    }
                }
                let n = metrics.len() as f64;
                let result = TaskResult {
                    task_id: task.id.clone(),
                    group: task.group,
                    plan_len: task.ground_truth.len(),
                    accuracy: metrics.iter().map(|m| m.accuracy).sum::<f64>() / n,
                    f1: metrics.iter().map(|m| m.f1).sum::<f64>() / n,
                    edit_distance: metrics.iter().map(|m| m.edit_distance as f64).sum::<f64>() / n,
                    failures,
                    success_rate: execute.then(|| rates.iter().sum::<f64>() / rates.len() as f64),
                    first_plan,
                    elapsed: started.elapsed(),
                };
                (result, traces)
            })
            .collect()
    }
}

fn summarize<K: Ord>(
    tasks: &[TaskResult],
    key: impl Fn(&TaskResult) -> K,
) -> BTreeMap<K, GroupSummary> {
    let mut groups: BTreeMap<K, GroupSummary> = BTreeMap::new();
    for t in tasks {
        let g = groups.entry(key(t)).or_default();
        g.tasks += 1;
        g.accuracy += t.accuracy;
        g.f1 += t.f1;
        g.edit_distance += t.edit_distance;
        if let Some(rate) = t.success_rate {
            *g.success_rate.get_or_insert(0.0) += rate;
        }
    }
    for g in groups.values_mut() {
        let n = g.tasks as f64;
        g.accuracy /= n;
        g.f1 /= n;
        g.edit_distance /= n;
        if let Some(rate) = &mut g.success_rate {
            *rate /= n;
        }
    }
    groups
}

fn phase_report(phase: u32, memory_entries: usize, tasks: Vec<TaskResult>) -> PhaseReport {
    PhaseReport {
        phase,
        memory_entries,
        groups: summarize(&tasks, |t| t.group),
        tasks,
    }
}

fn finish(experiment: &Experiment, phases: Vec<PhaseReport>) -> ExperimentReport {
    let last = phases.last().expect("at least one phase");
    ExperimentReport {
        config: experiment.echo(),
        seed: experiment.config.seed,
        groups: last.groups.clone(),
        lengths: summarize(&last.tasks, |t| t.plan_len),
        tasks: last.tasks.clone(),
        failures: last.tasks.iter().map(|t| t.failures).sum(),
        phases,
    }
}

/// Plans every task without touching the environment and scores the plans.
pub fn run_static(config: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    let experiment = Experiment::load(config)?;
    let tasks = experiment
        .phase(None, false)
        .into_iter()
        .map(|(r, _)| r)
        .collect();
    Ok(finish(&experiment, vec![phase_report(1, 0, tasks)]))
}

/// Plans and executes every task, records the decompositions into stage
/// memory, then replans with memory hints `rounds` times. The store is read
/// from and saved back to the configured memory file.
pub fn run_dynamic(config: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    let experiment = Experiment::load(config)?;
    let memory_path = config.memory_path.as_deref().expect("validated");
    let mut store =
        files::load_memory(memory_path, &experiment.db)?.with_match_mode(config.match_mode);

    let mut phases = Vec::new();
    let mut results = experiment.phase(None, true);
    for round in 1..=config.rounds {
        phases.push(phase_report(
            round,
            store.len(),
            results.iter().map(|(r, _)| r.clone()).collect(),
        ));
        // single writer between parallel phases
        for (result, traces) in &results {
            for (trace, rate) in traces {
                store.record(trace, *rate, &result.task_id, u64::from(round));
            }
        }
        results = experiment.phase(Some(&store), true);
    }
    phases.push(phase_report(
        config.rounds + 1,
        store.len(),
        results.into_iter().map(|(r, _)| r).collect(),
    ));
    files::save_memory(memory_path, &store)?;
    Ok(finish(&experiment, phases))
}

pub fn run(config: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    match config.mode {
        Mode::Static => run_static(config),
        Mode::Dynamic => run_dynamic(config),
    }
}

fn two(x: f64) -> String {
    format!("{x:.2}")
}

/// Per-task CSV of the final phase.
pub fn report_csv(report: &ExperimentReport) -> Result<String, HarnessError> {
    let dynamic = report.tasks.iter().any(|t| t.success_rate.is_some());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        "task_id",
        "group",
        "plan_len",
        "accuracy",
        "f1",
        "edit_distance",
    ];
    if dynamic {
        header.extend(["success_rate", "phase1_success_rate"]);
    }
    w.write_record(&header)?;
    let phase1: BTreeMap<&str, f64> = report
        .phase(1)
        .map(|p| {
            p.tasks
                .iter()
                .filter_map(|t| Some((t.task_id.as_str(), t.success_rate?)))
                .collect()
        })
        .unwrap_or_default();
    for t in &report.tasks {
        let mut row = vec![
            t.task_id.clone(),
            t.group.to_string(),
            t.plan_len.to_string(),
            two(t.accuracy),
            two(t.f1),
            two(t.edit_distance),
        ];
        if dynamic {
            row.push(two(t.success_rate.unwrap_or(0.0)));
            row.push(two(phase1.get(t.task_id.as_str()).copied().unwrap_or(0.0)));
        }
        w.write_record(&row)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("CSV is UTF-8"))
}

pub fn report_json(report: &ExperimentReport) -> String {
    let mut out = serde_json::to_string_pretty(report).expect("report serializes");
    out.push('\n');
    out
}

/// Writes `report.csv`, `report.json`, `timing.json` and one plan file per
/// task under `plans/`. Everything except `timing.json` is reproducible.
pub fn write_reports(report: &ExperimentReport, out_dir: &Path) -> Result<(), HarnessError> {
    files::write_path(&out_dir.join("report.csv"), &report_csv(report)?)?;
    files::write_path(&out_dir.join("report.json"), &report_json(report))?;
    let mut timing = serde_json::to_string_pretty(&report.timing()).expect("timing serializes");
    timing.push('\n');
    files::write_path(&out_dir.join("timing.json"), &timing)?;
    for t in &report.tasks {
        if let Some(plan) = &t.first_plan {
            files::write_path(
                &out_dir.join("plans").join(format!("{}.txt", t.task_id)),
                &files::plan_text(plan),
            )?;
        }
    }
    Ok(())
}
