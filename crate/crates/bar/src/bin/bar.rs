use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use bar::files;
use bar::harness::{
    self, plan_goal, Backend, ConsistencyMode, ConsistencySettings, ExperimentConfig, Mode,
    Pipeline,
};
use bar::remote::RemoteConfig;
use bar_core::decompose::FaultProfile;
use bar_core::memory::{MatchMode, DEFAULT_THRESHOLD};
use bar_core::metrics::evaluate;
use bar_core::simulator::{execute_plan, success_rate, ExecutionMode};
use bar_core::{Goal, ItemId};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "bar",
    version,
    about = "Backward-reasoning planner for crafting tasks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan one goal and print the numbered plan.
    Plan(PlanArgs),
    /// Run an experiment over a task dataset and write reports.
    Run(RunArgs),
    /// Score a generated plan file against a ground-truth plan file.
    Eval(EvalArgs),
    /// Execute a plan file in the simulator and print the report as JSON.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ConsistencyArg {
    Scoring,
    Window,
    Off,
}

#[derive(Clone, Copy, ValueEnum)]
enum DecomposerArg {
    Oracle,
    Remote,
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    None,
    OmitDigdown,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Static,
    Dynamic,
}

#[derive(Args)]
struct BackendArgs {
    #[arg(long, value_enum, default_value = "oracle")]
    decomposer: DecomposerArg,
    /// Remote model endpoint; required with `--decomposer remote`.
    #[arg(long)]
    endpoint: Option<String>,
    /// Send chat-style `messages` instead of a flat prompt.
    #[arg(long)]
    chat: bool,
    #[arg(long, value_enum, default_value = "none")]
    fault: FaultArg,
    #[arg(long, value_enum, default_value = "scoring")]
    consistency: ConsistencyArg,
    /// Score threshold below which a step starts an anchor pair.
    #[arg(short = 't', default_value_t = 5)]
    t: u8,
    /// Window length for anchor pairs.
    #[arg(short = 'k', default_value_t = 3)]
    k: usize,
    /// Score/repair passes per plan.
    #[arg(long, default_value_t = 1)]
    consistency_rounds: u32,
}

impl BackendArgs {
    fn backend(&self) -> Result<Backend> {
        Ok(match self.decomposer {
            DecomposerArg::Oracle => Backend::Oracle,
            DecomposerArg::Remote => {
                let Some(endpoint) = &self.endpoint else {
                    bail!("--decomposer remote needs --endpoint");
                };
                let mut config = RemoteConfig::new(endpoint.clone()).with_env_key();
                config.chat = self.chat;
                Backend::Remote(config)
            }
        })
    }

    fn fault(&self) -> FaultProfile {
        match self.fault {
            FaultArg::None => FaultProfile::None,
            FaultArg::OmitDigdown => FaultProfile::OmitDigDown,
        }
    }

    fn consistency(&self) -> ConsistencySettings {
        ConsistencySettings {
            mode: match self.consistency {
                ConsistencyArg::Scoring => ConsistencyMode::Scoring,
                ConsistencyArg::Window => ConsistencyMode::Window,
                ConsistencyArg::Off => ConsistencyMode::Off,
            },
            t: self.t,
            k: self.k,
            rounds: self.consistency_rounds,
        }
    }
}

#[derive(Args)]
struct PlanArgs {
    /// e.g. "collect 3 stone"
    #[arg(long)]
    goal: String,
    /// Recipe database JSON; defaults to the bundled one.
    #[arg(long)]
    recipes: Option<PathBuf>,
    /// Stage memory file to draw hints from.
    #[arg(long)]
    memory: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    backend: BackendArgs,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum, default_value = "static")]
    mode: ModeArg,
    /// Task dataset JSON; defaults to the bundled one.
    #[arg(long)]
    tasks: Option<PathBuf>,
    #[arg(long)]
    recipes: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    runs: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Stage memory file; required in dynamic mode.
    #[arg(long)]
    memory: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    /// Match memory by item only, rescaling stored quantities.
    #[arg(long)]
    item_only: bool,
    /// Record/replan cycles in dynamic mode.
    #[arg(long, default_value_t = 1)]
    rounds: u32,
    /// Mining success probability, as item=p; repeatable.
    #[arg(long = "mine-yield", value_parser = parse_yield)]
    mine_yield: Vec<(ItemId, f64)>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    backend: BackendArgs,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    gen: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    recipes: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    goal: String,
    #[arg(long)]
    plan: PathBuf,
    #[arg(long)]
    recipes: Option<PathBuf>,
    /// Keep executing after a failed step.
    #[arg(long)]
    skip_failures: bool,
    #[arg(long = "mine-yield", value_parser = parse_yield)]
    mine_yield: Vec<(ItemId, f64)>,
    /// Executions for the success-rate estimate printed to stderr.
    #[arg(long, default_value_t = 1)]
    runs: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_yield(s: &str) -> Result<(ItemId, f64), String> {
    let (item, p) = s.split_once('=').ok_or("expected item=probability")?;
    let item = ItemId::new(item.trim()).map_err(|e| e.to_string())?;
    let p: f64 = p
        .trim()
        .parse()
        .map_err(|_| format!("bad probability {p:?}"))?;
    if !(0.0..=1.0).contains(&p) {
        return Err(format!("probability {p} is outside [0, 1]"));
    }
    Ok((item, p))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Plan(args) => plan(args),
        Command::Run(args) => run(args),
        Command::Eval(args) => eval(args),
        Command::Simulate(args) => simulate(args),
    }
}

fn plan(args: PlanArgs) -> Result<()> {
    let db = files::recipe_db_from(args.recipes.as_deref()).context("loading recipes")?;
    let goal = Goal::parse(&args.goal, &db).context("parsing goal")?;
    let backend = args.backend.backend()?;
    let settings = args.backend.consistency();
    let memory = args
        .memory
        .as_deref()
        .map(|p| files::load_memory(p, &db))
        .transpose()
        .context("loading memory")?;
    let hints = memory.as_ref().map(|m| m.hints(args.threshold));
    let pipeline = Pipeline::new(&db, &backend, args.backend.fault(), settings.k);
    let planned = plan_goal(
        &goal,
        &db,
        &pipeline,
        settings.config(args.seed).as_ref(),
        hints.as_ref().map(|h| h as _),
    )?;
    print!("{}", files::plan_text(&planned.plan));
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let config = ExperimentConfig {
        mode: match args.mode {
            ModeArg::Static => Mode::Static,
            ModeArg::Dynamic => Mode::Dynamic,
        },
        backend: args.backend.backend()?,
        fault: args.backend.fault(),
        consistency: args.backend.consistency(),
        runs: args.runs,
        seed: args.seed,
        memory_threshold: args.threshold,
        match_mode: if args.item_only {
            MatchMode::ItemOnly
        } else {
            MatchMode::Exact
        },
        rounds: args.rounds,
        mine_yield: args.mine_yield,
        tasks_path: args.tasks,
        recipes_path: args.recipes,
        memory_path: args.memory,
        out_dir: args.out,
    };
    let started = Instant::now();
    let report = harness::run(&config)?;
    harness::write_reports(&report, &config.out_dir)?;
    for (group, s) in &report.groups {
        let rate = s
            .success_rate
            .map(|r| format!("  success {:.2}", r))
            .unwrap_or_default();
        eprintln!(
            "{:<9} n={:<3} acc {:>6.2}  f1 {:>6.2}  ed {:>5.2}{rate}",
            group.as_str(),
            s.tasks,
            s.accuracy,
            s.f1,
            s.edit_distance
        );
    }
    eprintln!(
        "wrote {} in {:.2}s",
        config.out_dir.display(),
        started.elapsed().as_secs_f64()
    );
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let db = files::recipe_db_from(args.recipes.as_deref()).context("loading recipes")?;
    let generated = files::load_plan(&args.gen, &db).context("loading generated plan")?;
    let truth = files::load_plan(&args.gt, &db).context("loading ground truth")?;
    let m = evaluate(&generated, &truth);
    println!(
        "accuracy {:.2}\nf1 {:.2}\nedit_distance {}",
        m.accuracy, m.f1, m.edit_distance
    );
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let db = files::recipe_db_from(args.recipes.as_deref()).context("loading recipes")?;
    let goal = Goal::parse(&args.goal, &db).context("parsing goal")?;
    let plan = files::load_plan(&args.plan, &db).context("loading plan")?;
    let profile = args.mine_yield.iter().fold(
        bar_core::StochasticProfile::deterministic().with_seed(args.seed),
        |p, (item, y)| p.with_yield(item.clone(), *y),
    );
    let mode = if args.skip_failures {
        ExecutionMode::SkipFailures
    } else {
        ExecutionMode::Strict
    };
    let started = Instant::now();
    let mut report = execute_plan(&goal, &plan, &db, &profile, mode);
    report.elapsed = started.elapsed();
    print!("{}", files::execution_report_json(&report));
    if args.runs > 1 {
        eprintln!(
            "success rate over {} runs: {:.4}",
            args.runs,
            success_rate(&goal, &plan, &db, &profile, args.runs)
        );
    }
    Ok(())
}
