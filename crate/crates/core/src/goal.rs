//! Planning goals and their canonical keys.

use alloc::string::ToString;
use alloc::vec::Vec;
use core::fmt;

use crate::item::{ItemId, Quantity};
use crate::recipe::RecipeDb;
use crate::step::{strip_list_marker, ParseError};

/// Something the planner must bring about.
///
/// Text forms: `obtain <n> <item>` or `collect <n> <item>` (same meaning), and
/// `dig down with <tool>`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Goal {
    ObtainItem { item: ItemId, qty: Quantity },
    ReachBelowGround { tool: ItemId },
}

/// Verb-insensitive identity of a goal, used to index stage memory.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GoalKey {
    Item { item: ItemId, qty: Quantity },
    // The tool is kept so "dig down with stone_pickaxe" never answers for the
    // wooden one.
    BelowGround { tool: ItemId },
}

impl Goal {
    pub fn obtain(item: ItemId, qty: Quantity) -> Goal {
        Goal::ObtainItem { item, qty }
    }

    pub fn key(&self) -> GoalKey {
        match self {
            Goal::ObtainItem { item, qty } => GoalKey::Item {
                item: item.clone(),
                qty: *qty,
            },
            Goal::ReachBelowGround { tool } => GoalKey::BelowGround { tool: tool.clone() },
        }
    }

    /// The item an ObtainItem goal asks for.
    pub fn item(&self) -> Option<&ItemId> {
        match self {
            Goal::ObtainItem { item, .. } => Some(item),
            Goal::ReachBelowGround { .. } => None,
        }
    }

    /// Parses a goal and checks its items against `db`.
    pub fn parse(text: &str, db: &RecipeDb) -> Result<Goal, ParseError> {
        let goal = Goal::parse_unchecked(text)?;
        let item = match &goal {
            Goal::ObtainItem { item, .. } => item,
            Goal::ReachBelowGround { tool } => tool,
        };
        if !db.contains(item) {
            return Err(ParseError::goal(
                text,
                alloc::format!("unregistered item {item}"),
            ));
        }
        Ok(goal)
    }

    pub fn parse_unchecked(text: &str) -> Result<Goal, ParseError> {
        let body = strip_list_marker(text.trim());
        let body = body.strip_suffix('.').unwrap_or(body).trim_end();
        let tokens: Vec<&str> = body.split_whitespace().collect();
        let err = |reason: &str| ParseError::goal(text, reason.to_string());
        let item =
            |token: &str| ItemId::new(token).map_err(|e| ParseError::goal(text, e.to_string()));
        match tokens.as_slice() {
            [verb, count, name]
                if verb.eq_ignore_ascii_case("obtain") || verb.eq_ignore_ascii_case("collect") =>
            {
                let qty = count
                    .parse::<u32>()
                    .ok()
                    .and_then(Quantity::new)
                    .ok_or_else(|| err("quantity must be a positive integer"))?;
                Ok(Goal::ObtainItem {
                    item: item(name)?,
                    qty,
                })
            }
            [dig, down, with, tool]
                if dig.eq_ignore_ascii_case("dig")
                    && down.eq_ignore_ascii_case("down")
                    && with.eq_ignore_ascii_case("with") =>
            {
                Ok(Goal::ReachBelowGround { tool: item(tool)? })
            }
            _ => Err(err(
                "expected \"obtain|collect <n> <item>\" or \"dig down with <tool>\"",
            )),
        }
    }
}

impl fmt::Display for Goal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Goal::ObtainItem { item, qty } => write!(f, "Obtain {qty} {item}"),
            Goal::ReachBelowGround { tool } => write!(f, "Dig down with {tool}"),
        }
    }
}

impl fmt::Display for GoalKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GoalKey::Item { item, qty } => write!(f, "Obtain {qty} {item}"),
            GoalKey::BelowGround { tool } => write!(f, "Dig down with {tool}"),
        }
    }
}

impl From<GoalKey> for Goal {
    fn from(key: GoalKey) -> Goal {
        match key {
            GoalKey::Item { item, qty } => Goal::ObtainItem { item, qty },
            GoalKey::BelowGround { tool } => Goal::ReachBelowGround { tool },
        }
    }
}
