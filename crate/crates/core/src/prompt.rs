//! Prompt templates for a language-model backend and parsers for its replies.
//!
//! Every prompt has the same shape: a system instruction, then a user turn
//! made of fenced few-shot exemplars followed by the fenced query. The flat
//! rendering is
//!
//! ```text
//! System:
//! <system>
//!
//! User:
//! ========
//! <exemplar>
//! ========
//!
//! ========
//! <query>
//! Assistant:
//! ```

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write as _;

use crate::consistency::StepRating;
use crate::decompose::DecompositionResult;
use crate::goal::Goal;
use crate::recipe::RecipeDb;
use crate::step::{strip_list_marker, Plan, Step};

/// Version tag of the bundled template set.
pub const TEMPLATE_VERSION: &str = "v1";

const FENCE: &str = "========";

pub const DECOMPOSE_SYSTEM: &str = include_str!("../assets/prompts/v1/decompose_system.txt");
pub const DECOMPOSE_EXEMPLAR: &str = include_str!("../assets/prompts/v1/decompose_exemplar.txt");
pub const RATING_SYSTEM: &str = include_str!("../assets/prompts/v1/rating_system.txt");
pub const RATING_EXEMPLAR: &str = include_str!("../assets/prompts/v1/rating_exemplar.txt");
pub const COMPLETION_SYSTEM: &str = include_str!("../assets/prompts/v1/completion_system.txt");
pub const COMPLETION_EXEMPLAR: &str = include_str!("../assets/prompts/v1/completion_exemplar.txt");
pub const INTEGRATION_SYSTEM: &str = include_str!("../assets/prompts/v1/integration_system.txt");
pub const INTEGRATION_EXEMPLAR: &str =
    include_str!("../assets/prompts/v1/integration_exemplar.txt");

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    System,
    User,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::System => "system",
            Role::User => "user",
        }
    }
}

/// A prompt ready to send, either flattened or as chat messages.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Prompt {
    pub system: String,
    pub user: String,
}

impl Prompt {
    fn assemble(system: &str, exemplars: &[&str], query: &str) -> Prompt {
        let mut user = String::new();
        for exemplar in exemplars {
            user.push_str(FENCE);
            user.push('\n');
            user.push_str(exemplar);
            if !exemplar.ends_with('\n') {
                user.push('\n');
            }
            user.push_str(FENCE);
            user.push_str("\n\n");
        }
        user.push_str(FENCE);
        user.push('\n');
        user.push_str(query);
        Prompt {
            system: system.to_string(),
            user,
        }
    }

    /// Single-string form for completion-style endpoints.
    pub fn flat(&self) -> String {
        alloc::format!(
            "System:\n{}\n\nUser:\n{}\nAssistant:\n",
            self.system,
            self.user
        )
    }

    /// Chat form: one system and one user message.
    pub fn messages(&self) -> [(Role, &str); 2] {
        [(Role::System, &self.system), (Role::User, &self.user)]
    }
}

fn numbered(plan: &Plan, first: usize) -> String {
    let mut out = String::new();
    for (i, step) in plan.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = write!(out, "{}. {}", first + i, step);
    }
    out
}

/// Goal decomposition prompt. Pass `&[DECOMPOSE_EXEMPLAR]` for the bundled
/// few-shot history.
pub fn format_decompose_prompt(goal: &Goal, exemplars: &[&str]) -> Prompt {
    let query = alloc::format!("Goal: {goal}\nThought:\n");
    Prompt::assemble(DECOMPOSE_SYSTEM, exemplars, &query)
}

pub fn format_rating_prompt(goal: &Goal, plan: &Plan, exemplars: &[&str]) -> Prompt {
    let query = alloc::format!(
        "Goal: {goal}\nInitial Plan:\n{}\nThought:\n",
        numbered(plan, 1)
    );
    Prompt::assemble(RATING_SYSTEM, exemplars, &query)
}

pub fn format_completion_prompt(
    goal: &Goal,
    start: &Step,
    end: &Step,
    exemplars: &[&str],
) -> Prompt {
    let query = alloc::format!(
        "Goal: {goal}\nStart Anchor Step: {start}\nEnd Anchor Step: {end}\n\nThought:\n"
    );
    Prompt::assemble(COMPLETION_SYSTEM, exemplars, &query)
}

/// Integration prompt; the partial plan is numbered from its start anchor's
/// 1-based position in the initial plan.
pub fn format_integration_prompt(
    goal: &Goal,
    initial: &Plan,
    partial: &Plan,
    partial_start: usize,
    exemplars: &[&str],
) -> Prompt {
    let query = alloc::format!(
        "Goal: {goal}\n\nInitial Plan:\n{}\n\nComplementary Partial Plan:\n{}\n\nThought:\n",
        numbered(initial, 1),
        numbered(partial, partial_start.max(1)),
    );
    Prompt::assemble(INTEGRATION_SYSTEM, exemplars, &query)
}

/// A model reply that does not have the expected shape.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{reason}")]
pub struct ResponseParseError {
    pub reason: String,
    pub raw: String,
}

impl ResponseParseError {
    fn new(raw: &str, reason: impl Into<String>) -> Self {
        ResponseParseError {
            reason: reason.into(),
            raw: raw.to_string(),
        }
    }
}

/// Lines following the first line equal to `header`, or `None` without one.
fn section<'a>(text: &'a str, header: &str) -> Option<(usize, Vec<&'a str>)> {
    let lines: Vec<&str> = text.lines().collect();
    let at = lines
        .iter()
        .position(|l| l.trim().eq_ignore_ascii_case(header))?;
    Some((at, lines[at + 1..].to_vec()))
}

/// Leading run of lines accepted by `parse`, skipping blanks; stops at a fence
/// or the first line that does not parse.
fn leading<T, E>(lines: &[&str], mut parse: impl FnMut(&str) -> Result<T, E>) -> Vec<T> {
    let mut out = Vec::new();
    for line in lines {
        let line = line.trim();
        if line.is_empty() {
            if out.is_empty() {
                continue;
            }
            break;
        }
        if line.starts_with(FENCE) {
            break;
        }
        match parse(line) {
            Ok(v) => out.push(v),
            Err(_) => break,
        }
    }
    out
}

pub fn parse_decompose_response(
    text: &str,
    db: &RecipeDb,
) -> Result<DecompositionResult, ResponseParseError> {
    let (step_at, after_step) = section(text, "Decomposed Step:")
        .ok_or_else(|| ResponseParseError::new(text, "missing \"Decomposed Step:\""))?;
    let step_line = after_step
        .iter()
        .map(|l| l.trim())
        .find(|l| !l.is_empty())
        .ok_or_else(|| ResponseParseError::new(text, "no step after \"Decomposed Step:\""))?;
    let step =
        Step::parse(step_line, db).map_err(|e| ResponseParseError::new(text, e.to_string()))?;
    let (_, after_goals) = section(text, "Decomposed Sub Goals:")
        .ok_or_else(|| ResponseParseError::new(text, "missing \"Decomposed Sub Goals:\""))?;
    let sub_goals = leading(&after_goals, |l| Goal::parse(l, db));

    let before: Vec<&str> = text.lines().take(step_at).collect();
    let thought = before.join("\n");
    let thought = thought.trim();
    let thought = thought.strip_prefix("Thought:").unwrap_or(thought).trim();
    Ok(DecompositionResult {
        step,
        sub_goals,
        thought: (!thought.is_empty()).then(|| thought.to_string()),
    })
}

/// Parses `N. <step> - <score>` lines after `Rating:`.
pub fn parse_rating_response(text: &str) -> Result<Vec<StepRating>, ResponseParseError> {
    let (_, lines) = section(text, "Rating:")
        .ok_or_else(|| ResponseParseError::new(text, "missing \"Rating:\""))?;
    let ratings = leading(&lines, |line| {
        let (head, score) = line.rsplit_once(" - ").ok_or(())?;
        let score: u8 = score.trim().parse().map_err(|_| ())?;
        let digits = head.bytes().take_while(u8::is_ascii_digit).count();
        let index: usize = head[..digits].parse().map_err(|_| ())?;
        if strip_list_marker(head) == head {
            return Err(());
        }
        StepRating::new(index, score).ok_or(())
    });
    if ratings.is_empty() {
        return Err(ResponseParseError::new(text, "no rating lines"));
    }
    Ok(ratings)
}

/// Parses the step lines after `Partial Plan:`; numbering is optional.
pub fn parse_partial_plan(text: &str, db: &RecipeDb) -> Result<Plan, ResponseParseError> {
    plan_section(text, "Partial Plan:", db)
}

/// Parses the step lines after `Corrected Plan:`.
pub fn parse_corrected_plan(text: &str, db: &RecipeDb) -> Result<Plan, ResponseParseError> {
    plan_section(text, "Corrected Plan:", db)
}

fn plan_section(text: &str, header: &str, db: &RecipeDb) -> Result<Plan, ResponseParseError> {
    let (_, lines) = section(text, header)
        .ok_or_else(|| ResponseParseError::new(text, alloc::format!("missing {header:?}")))?;
    let steps = leading(&lines, |l| Step::parse(l, db));
    if steps.is_empty() {
        return Err(ResponseParseError::new(
            text,
            alloc::format!("no steps after {header:?}"),
        ));
    }
    Ok(Plan::new(steps))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recipe::fixtures::{id, q, tech_tree};

    fn reply(exemplar: &str) -> &str {
        // the model's answer is everything after the query's "Thought:" line
        let at = exemplar.find("Thought:\n").unwrap();
        &exemplar[at + "Thought:\n".len()..]
    }

    #[test]
    fn decompose_prompt_layout() {
        let goal = Goal::obtain(id("iron_ingot"), q(2));
        let prompt = format_decompose_prompt(&goal, &[DECOMPOSE_EXEMPLAR]);
        let flat = prompt.flat();
        assert!(flat.starts_with("System:\nYou are a helpful assistant in Minecraft."));
        assert!(flat.contains("User:\n========\nGoal: collect 3 stone.\n"));
        assert!(flat.contains("2. Dig down with wooden_pickaxe\n========\n\n========\n"));
        assert!(flat.ends_with("========\nGoal: Obtain 2 iron_ingot\nThought:\n\nAssistant:\n"));
    }

    #[test]
    fn empty_history() {
        let goal = Goal::obtain(id("log"), q(1));
        let prompt = format_decompose_prompt(&goal, &[]);
        assert_eq!(prompt.user, "========\nGoal: Obtain 1 log\nThought:\n");
        assert_eq!(prompt.messages()[0].1, DECOMPOSE_SYSTEM);
    }

    #[test]
    fn parses_decompose_exemplar_reply() {
        let db = tech_tree();
        let out = parse_decompose_response(reply(DECOMPOSE_EXEMPLAR), &db).unwrap();
        assert_eq!(out.step.to_string(), "Mine 3 stone with wooden_pickaxe");
        assert_eq!(
            out.sub_goals,
            alloc::vec![
                Goal::obtain(id("wooden_pickaxe"), q(1)),
                Goal::ReachBelowGround {
                    tool: id("wooden_pickaxe")
                }
            ]
        );
        assert!(out.thought.unwrap().starts_with("To collect 3 stone"));
        // the full exemplar, goal line included, parses the same way
        let again = parse_decompose_response(DECOMPOSE_EXEMPLAR, &db).unwrap();
        assert_eq!(again.step.to_string(), "Mine 3 stone with wooden_pickaxe");
    }

    #[test]
    fn decompose_reply_shapes() {
        let db = tech_tree();
        let no_subs = "Decomposed Step:\nMine 2 log with barehand\nDecomposed Sub Goals:\n";
        let out = parse_decompose_response(no_subs, &db).unwrap();
        assert!(out.sub_goals.is_empty());
        assert_eq!(out.thought, None);
        assert!(parse_decompose_response("Decomposed Sub Goals:\n1. Obtain 1 log", &db).is_err());
        assert!(
            parse_decompose_response("Decomposed Step:\nJump\nDecomposed Sub Goals:\n", &db)
                .is_err()
        );
    }

    #[test]
    fn parses_rating_exemplar_reply() {
        let ratings = parse_rating_response(reply(RATING_EXEMPLAR)).unwrap();
        let scores: Vec<u8> = ratings.iter().map(|r| r.score).collect();
        assert_eq!(scores, [10, 8, 5, 3, 3, 5]);
        let indices: Vec<usize> = ratings.iter().map(|r| r.index).collect();
        assert_eq!(indices, [1, 2, 3, 4, 5, 6]);
        assert!(parse_rating_response("Rating:\n1. Craft 9 planks - 11").is_err());
    }

    #[test]
    fn parses_completion_and_integration_replies() {
        let db = tech_tree();
        let partial = parse_partial_plan(reply(COMPLETION_EXEMPLAR), &db).unwrap();
        assert_eq!(partial.len(), 4);
        assert_eq!(partial[2].to_string(), "Dig down with wooden_pickaxe");
        let corrected = parse_corrected_plan(reply(INTEGRATION_EXEMPLAR), &db).unwrap();
        assert_eq!(corrected.len(), 7);
        assert_eq!(corrected[6].to_string(), "Mine 3 stone with wooden_pickaxe");
        assert!(parse_partial_plan("Corrected Plan:\nCraft 9 planks", &db).is_err());
    }

    #[test]
    fn integration_prompt_numbers_partial_from_its_anchor() {
        let db = tech_tree();
        let initial = Plan::parse("Mine 3 log with barehand\nCraft 9 planks", &db).unwrap();
        let partial = Plan::parse("Craft 9 planks", &db).unwrap();
        let goal = Goal::obtain(id("planks"), q(9));
        let prompt = format_integration_prompt(&goal, &initial, &partial, 2, &[]);
        assert_eq!(
            prompt.user,
            "========\nGoal: Obtain 9 planks\n\nInitial Plan:\n1. Mine 3 log with barehand\n\
             2. Craft 9 planks\n\nComplementary Partial Plan:\n2. Craft 9 planks\n\nThought:\n"
        );
    }
}
