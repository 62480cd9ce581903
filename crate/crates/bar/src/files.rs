//! On-disk formats: recipe database, task dataset, plan text, stage memory
//! and execution reports.

use std::collections::BTreeSet;
use std::fs;
use std::io::{self, Read};
use std::path::{Path, PathBuf};

use bar_core::{
    DecompositionResult, ExecutionReport, FailureReason, Goal, ItemId, Location, ParseError, Plan,
    Quantity, Recipe, RecipeDb, RecipeError, RecipeKind, RequiredLocation, StageMemoryEntry,
    StageMemoryStore, Step, StepStatus, Task, TaskGroup,
};
use serde::{Deserialize, Serialize};

pub const MEMORY_SCHEMA_VERSION: u32 = 1;

/// Recipe database shipped with the crate.
pub const BUNDLED_RECIPES: &str = include_str!("../data/recipes.json");
/// 53-task benchmark shipped with the crate.
pub const BUNDLED_TASKS: &str = include_str!("../data/tasks.json");

#[derive(Debug, thiserror::Error)]
pub enum FileError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Recipe(#[from] RecipeError),
    #[error("invalid item name {0:?}")]
    InvalidItem(String),
    #[error("{0} must be a positive integer")]
    ZeroQuantity(String),
    #[error("task {task}: {source}")]
    Task {
        task: String,
        #[source]
        source: TaskError,
    },
    #[error("duplicate task id {0:?}")]
    DuplicateTask(String),
    #[error("line {line}: {source}")]
    PlanLine {
        line: usize,
        #[source]
        source: ParseError,
    },
    #[error("memory file has schema version {found}, expected {expected}")]
    SchemaVersionMismatch { found: u32, expected: u32 },
}

#[derive(Debug, thiserror::Error)]
pub enum TaskError {
    #[error(transparent)]
    Group(#[from] bar_core::task::UnknownGroup),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("ground truth is empty")]
    EmptyGroundTruth,
}

fn read_path(path: &Path) -> Result<String, FileError> {
    fs::read_to_string(path).map_err(|source| FileError::Io {
        path: path.to_owned(),
        source,
    })
}

/// Writes `contents` to `path`, creating parent directories.
pub fn write_path(path: &Path, contents: &str) -> Result<(), FileError> {
    let io_err = |source| FileError::Io {
        path: path.to_owned(),
        source,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err)?;
    }
    fs::write(path, contents).map_err(io_err)
}

fn item(name: &str) -> Result<ItemId, FileError> {
    ItemId::new(name).map_err(|_| FileError::InvalidItem(name.into()))
}

fn quantity(n: u32, what: &str) -> Result<Quantity, FileError> {
    Quantity::new(n).ok_or_else(|| FileError::ZeroQuantity(what.into()))
}

// ---- recipes ----

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecipeFile {
    pub tool_order: Vec<String>,
    pub recipes: Vec<RecipeRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecipeRecord {
    pub output: String,
    #[serde(default = "one")]
    pub count: u32,
    pub kind: KindRecord,
    #[serde(default)]
    pub inputs: Vec<ItemCount>,
    #[serde(default)]
    pub station: Option<String>,
    #[serde(default)]
    pub fuel: Option<ItemCount>,
    #[serde(default)]
    pub min_tool: Option<String>,
    #[serde(default)]
    pub location: LocationRecord,
    /// Tools in `tool_order` and anything used as a station are reusable
    /// regardless of this flag.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub reusable: bool,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItemCount {
    pub item: String,
    pub count: u32,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindRecord {
    Craft,
    Smelt,
    Mine,
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocationRecord {
    AboveGround,
    BelowGround,
    #[default]
    Any,
}

impl RecipeFile {
    pub fn into_db(self) -> Result<RecipeDb, FileError> {
        let mut reusable: BTreeSet<String> = self.tool_order.iter().cloned().collect();
        reusable.extend(self.recipes.iter().filter_map(|r| r.station.clone()));
        let tool_order = self
            .tool_order
            .iter()
            .map(|t| item(t))
            .collect::<Result<Vec<_>, _>>()?;
        let mut recipes = Vec::with_capacity(self.recipes.len());
        for r in self.recipes {
            let pair =
                |c: &ItemCount| Ok::<_, FileError>((item(&c.item)?, quantity(c.count, &c.item)?));
            recipes.push(Recipe {
                output: item(&r.output)?,
                count: quantity(r.count, &r.output)?,
                kind: match r.kind {
                    KindRecord::Craft => RecipeKind::Craft,
                    KindRecord::Smelt => RecipeKind::Smelt,
                    KindRecord::Mine => RecipeKind::Mine,
                },
                inputs: r.inputs.iter().map(pair).collect::<Result<_, _>>()?,
                station: r.station.as_deref().map(item).transpose()?,
                fuel: r.fuel.as_ref().map(pair).transpose()?,
                min_tool: r.min_tool.as_deref().map(item).transpose()?,
                location: match r.location {
                    LocationRecord::AboveGround => RequiredLocation::AboveGround,
                    LocationRecord::BelowGround => RequiredLocation::BelowGround,
                    LocationRecord::Any => RequiredLocation::Any,
                },
                reusable: r.reusable || reusable.contains(&r.output),
            });
        }
        Ok(RecipeDb::new(tool_order, recipes)?)
    }
}

pub fn parse_recipe_db(json: &str) -> Result<RecipeDb, FileError> {
    serde_json::from_str::<RecipeFile>(json)?.into_db()
}

pub fn load_recipe_db(mut source: impl Read) -> Result<RecipeDb, FileError> {
    let mut text = String::new();
    source
        .read_to_string(&mut text)
        .map_err(|source| FileError::Io {
            path: PathBuf::from("<recipes>"),
            source,
        })?;
    parse_recipe_db(&text)
}

/// Loads `path`, or the bundled database when `path` is `None`.
pub fn recipe_db_from(path: Option<&Path>) -> Result<RecipeDb, FileError> {
    match path {
        Some(p) => parse_recipe_db(&read_path(p)?),
        None => parse_recipe_db(BUNDLED_RECIPES),
    }
}

// ---- tasks ----

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskRecord {
    pub id: String,
    pub group: String,
    pub goal: String,
    pub ground_truth: Vec<String>,
}

impl TaskRecord {
    pub fn from_task(task: &Task) -> Self {
        TaskRecord {
            id: task.id.clone(),
            group: task.group.to_string(),
            goal: task.goal.to_string(),
            ground_truth: task.ground_truth.iter().map(Step::to_string).collect(),
        }
    }

    pub fn into_task(self, db: &RecipeDb) -> Result<Task, FileError> {
        let build = || -> Result<Task, TaskError> {
            let ground_truth = self
                .ground_truth
                .iter()
                .map(|s| Step::parse(s, db))
                .collect::<Result<Plan, _>>()?;
            if ground_truth.is_empty() {
                return Err(TaskError::EmptyGroundTruth);
            }
            Ok(Task {
                id: self.id.clone(),
                group: self.group.parse::<TaskGroup>()?,
                goal: Goal::parse(&self.goal, db)?,
                ground_truth,
            })
        };
        build().map_err(|source| FileError::Task {
            task: self.id.clone(),
            source,
        })
    }
}

pub fn parse_tasks(json: &str, db: &RecipeDb) -> Result<Vec<Task>, FileError> {
    let records: Vec<TaskRecord> = serde_json::from_str(json)?;
    let mut seen = BTreeSet::new();
    let mut tasks = Vec::with_capacity(records.len());
    for record in records {
        if !seen.insert(record.id.clone()) {
            return Err(FileError::DuplicateTask(record.id));
        }
        tasks.push(record.into_task(db)?);
    }
    Ok(tasks)
}

/// Loads `path`, or the bundled dataset when `path` is `None`.
pub fn tasks_from(path: Option<&Path>, db: &RecipeDb) -> Result<Vec<Task>, FileError> {
    match path {
        Some(p) => parse_tasks(&read_path(p)?, db),
        None => parse_tasks(BUNDLED_TASKS, db),
    }
}

pub fn tasks_to_json(tasks: &[Task]) -> String {
    let records: Vec<TaskRecord> = tasks.iter().map(TaskRecord::from_task).collect();
    let mut out = serde_json::to_string_pretty(&records).expect("task records serialize");
    out.push('\n');
    out
}

// ---- plans ----

/// Parses numbered plan text, one step per line; blank lines are skipped.
pub fn parse_plan_text(text: &str, db: &RecipeDb) -> Result<Plan, FileError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            Step::parse(l, db).map_err(|source| FileError::PlanLine {
                line: i + 1,
                source,
            })
        })
        .collect()
}

pub fn load_plan(path: &Path, db: &RecipeDb) -> Result<Plan, FileError> {
    parse_plan_text(&read_path(path)?, db)
}

/// Numbered plan text with a trailing newline.
pub fn plan_text(plan: &Plan) -> String {
    if plan.is_empty() {
        String::new()
    } else {
        format!("{plan}\n")
    }
}

// ---- stage memory ----

#[derive(Debug, Serialize, Deserialize)]
struct MemoryFile {
    version: u32,
    entries: Vec<MemoryRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
struct MemoryRecord {
    goal: String,
    step: String,
    sub_goals: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    thought: Option<String>,
    success_rate: f64,
    source_task: String,
    recorded_at: u64,
}

pub fn memory_to_json(store: &StageMemoryStore) -> String {
    let file = MemoryFile {
        version: MEMORY_SCHEMA_VERSION,
        entries: store
            .entries()
            .map(|e| MemoryRecord {
                goal: e.goal.to_string(),
                step: e.decomposition.step.to_string(),
                sub_goals: e
                    .decomposition
                    .sub_goals
                    .iter()
                    .map(Goal::to_string)
                    .collect(),
                thought: e.decomposition.thought.clone(),
                success_rate: e.success_rate,
                source_task: e.source_task.clone(),
                recorded_at: e.recorded_at,
            })
            .collect(),
    };
    let mut out = serde_json::to_string_pretty(&file).expect("memory serializes");
    out.push('\n');
    out
}

/// Parses a memory document. Entries that do not parse or mention items
/// missing from `db` are dropped with a warning; blank input is an empty store.
pub fn memory_from_json(json: &str, db: &RecipeDb) -> Result<StageMemoryStore, FileError> {
    let mut store = StageMemoryStore::new();
    if json.trim().is_empty() {
        return Ok(store);
    }
    let file: MemoryFile = serde_json::from_str(json)?;
    if file.version != MEMORY_SCHEMA_VERSION {
        return Err(FileError::SchemaVersionMismatch {
            found: file.version,
            expected: MEMORY_SCHEMA_VERSION,
        });
    }
    for record in file.entries {
        match memory_entry(&record, db) {
            Ok(entry) if bar_core::memory::entry_is_valid(&entry, db) => store.insert(entry),
            Ok(_) => log::warn!(
                "dropping memory entry for {:?}: success rate out of range",
                record.goal
            ),
            Err(e) => log::warn!("dropping memory entry for {:?}: {e}", record.goal),
        }
    }
    Ok(store)
}

fn memory_entry(record: &MemoryRecord, db: &RecipeDb) -> Result<StageMemoryEntry, ParseError> {
    let mut decomposition = DecompositionResult::new(
        Step::parse(&record.step, db)?,
        record
            .sub_goals
            .iter()
            .map(|g| Goal::parse(g, db))
            .collect::<Result<_, _>>()?,
    );
    decomposition.thought = record.thought.clone();
    Ok(StageMemoryEntry {
        goal: Goal::parse(&record.goal, db)?,
        decomposition,
        success_rate: record.success_rate,
        source_task: record.source_task.clone(),
        recorded_at: record.recorded_at,
    })
}

/// A missing file loads as an empty store.
pub fn load_memory(path: &Path, db: &RecipeDb) -> Result<StageMemoryStore, FileError> {
    match fs::read_to_string(path) {
        Ok(text) => memory_from_json(&text, db),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(StageMemoryStore::new()),
        Err(source) => Err(FileError::Io {
            path: path.to_owned(),
            source,
        }),
    }
}

pub fn save_memory(path: &Path, store: &StageMemoryStore) -> Result<(), FileError> {
    write_path(path, &memory_to_json(store))
}

// ---- execution reports ----

#[derive(Debug, Serialize)]
pub struct ExecutionReportRecord {
    pub outcomes: Vec<OutcomeRecord>,
    pub goal_achieved: bool,
    pub failed_index: Option<usize>,
    pub elapsed_ms: u64,
}

#[derive(Debug, Serialize)]
pub struct OutcomeRecord {
    pub step: String,
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl From<&ExecutionReport> for ExecutionReportRecord {
    fn from(report: &ExecutionReport) -> Self {
        ExecutionReportRecord {
            outcomes: report
                .outcomes
                .iter()
                .map(|o| match &o.status {
                    StepStatus::Completed => OutcomeRecord {
                        step: o.step.to_string(),
                        status: "completed",
                        reason: None,
                    },
                    StepStatus::Failed(reason) => OutcomeRecord {
                        step: o.step.to_string(),
                        status: "failed",
                        reason: Some(describe_failure(reason)),
                    },
                })
                .collect(),
            goal_achieved: report.goal_achieved,
            failed_index: report.failed_index,
            elapsed_ms: u64::try_from(report.elapsed.as_millis()).unwrap_or(u64::MAX),
        }
    }
}

fn location_name(at: Location) -> &'static str {
    match at {
        Location::AboveGround => "above ground",
        Location::BelowGround => "below ground",
    }
}

pub fn describe_failure(reason: &FailureReason) -> String {
    match reason {
        FailureReason::MissingMaterials(missing) => {
            let parts: Vec<String> = missing.iter().map(|(i, n)| format!("{n} {i}")).collect();
            format!("missing materials: {}", parts.join(", "))
        }
        FailureReason::MissingStation(s) => format!("missing station: {s}"),
        FailureReason::MissingTool(t) => format!("missing tool: {t}"),
        FailureReason::WrongLocation { required, actual } => format!(
            "wrong location: needs {}, agent is {}",
            location_name(*required),
            location_name(*actual)
        ),
        FailureReason::UnknownRecipe => "unknown recipe".into(),
        FailureReason::InsufficientYield { wanted, got } => {
            format!("insufficient yield: wanted {wanted}, got {got}")
        }
    }
}

pub fn execution_report_json(report: &ExecutionReport) -> String {
    let mut out = serde_json::to_string_pretty(&ExecutionReportRecord::from(report))
        .expect("execution report serializes");
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_files_load() {
        let db = parse_recipe_db(BUNDLED_RECIPES).unwrap();
        let tasks = parse_tasks(BUNDLED_TASKS, &db).unwrap();
        assert_eq!(tasks.len(), 53);
    }

    #[test]
    fn planks_arithmetic() {
        let db = parse_recipe_db(BUNDLED_RECIPES).unwrap();
        let planks = db
            .recipe(&ItemId::new("planks").unwrap(), RecipeKind::Craft)
            .unwrap();
        assert_eq!(planks.count.get(), 3);
        assert_eq!(planks.inputs[0].1.get(), 1);
    }
}
