//! Executable steps, plans, and their canonical text grammar.
//!
//! ```text
//! ("Mine"|"Craft"|"Smelt"|"Equip") <int> <item> [" with " <tool>]
//! "Dig down with " <tool>
//! ```
//!
//! Only Mine accepts a `with` clause among the counted verbs; `with barehand`
//! is the absent tool. Plans render as numbered lines `i. <step>`.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Deref, DerefMut};

use crate::item::{ItemId, Quantity};
use crate::recipe::RecipeDb;

pub(crate) const BAREHAND: &str = "barehand";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StepVerb {
    Mine,
    Craft,
    Smelt,
    Equip,
    DigDown,
}

impl fmt::Display for StepVerb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StepVerb::Mine => "Mine",
            StepVerb::Craft => "Craft",
            StepVerb::Smelt => "Smelt",
            StepVerb::Equip => "Equip",
            StepVerb::DigDown => "Dig down",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Step {
    /// `tool: None` is bare hands.
    Mine {
        item: ItemId,
        qty: Quantity,
        tool: Option<ItemId>,
    },
    Craft {
        item: ItemId,
        qty: Quantity,
    },
    Smelt {
        item: ItemId,
        qty: Quantity,
    },
    Equip {
        item: ItemId,
        qty: Quantity,
    },
    DigDown {
        tool: ItemId,
    },
}

/// Identity of a step up to its quantity; fusion merges steps with equal keys.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StepKey {
    pub verb: StepVerb,
    pub item: Option<ItemId>,
    pub tool: Option<ItemId>,
}

impl Step {
    pub fn verb(&self) -> StepVerb {
        match self {
            Step::Mine { .. } => StepVerb::Mine,
            Step::Craft { .. } => StepVerb::Craft,
            Step::Smelt { .. } => StepVerb::Smelt,
            Step::Equip { .. } => StepVerb::Equip,
            Step::DigDown { .. } => StepVerb::DigDown,
        }
    }

    pub fn item(&self) -> Option<&ItemId> {
        match self {
            Step::Mine { item, .. }
            | Step::Craft { item, .. }
            | Step::Smelt { item, .. }
            | Step::Equip { item, .. } => Some(item),
            Step::DigDown { .. } => None,
        }
    }

    pub fn qty(&self) -> Option<Quantity> {
        match self {
            Step::Mine { qty, .. }
            | Step::Craft { qty, .. }
            | Step::Smelt { qty, .. }
            | Step::Equip { qty, .. } => Some(*qty),
            Step::DigDown { .. } => None,
        }
    }

    pub fn tool(&self) -> Option<&ItemId> {
        match self {
            Step::Mine { tool, .. } => tool.as_ref(),
            Step::DigDown { tool } => Some(tool),
            _ => None,
        }
    }

    pub fn key(&self) -> StepKey {
        StepKey {
            verb: self.verb(),
            item: self.item().cloned(),
            tool: self.tool().cloned(),
        }
    }

    /// Same step with a different count; DigDown is returned unchanged.
    pub fn with_qty(&self, qty: Quantity) -> Step {
        let mut step = self.clone();
        match &mut step {
            Step::Mine { qty: q, .. }
            | Step::Craft { qty: q, .. }
            | Step::Smelt { qty: q, .. }
            | Step::Equip { qty: q, .. } => *q = qty,
            Step::DigDown { .. } => {}
        }
        step
    }

    /// Parses one step line, checking every item against `db`.
    pub fn parse(text: &str, db: &RecipeDb) -> Result<Step, ParseError> {
        let step = Step::parse_unchecked(text)?;
        let known = |item: &ItemId| db.contains(item);
        if let Some(item) = step.item() {
            if !known(item) {
                return Err(ParseError::step(
                    text,
                    alloc::format!("unregistered item {item}"),
                ));
            }
        }
        if let Some(tool) = step.tool() {
            if !known(tool) {
                return Err(ParseError::step(
                    text,
                    alloc::format!("unregistered tool {tool}"),
                ));
            }
        }
        Ok(step)
    }

    /// Grammar-only parse; item names are not looked up.
    pub fn parse_unchecked(text: &str) -> Result<Step, ParseError> {
        let body = strip_list_marker(text.trim());
        let body = body.strip_suffix('.').unwrap_or(body).trim_end();
        let tokens: Vec<&str> = body.split_whitespace().collect();
        let err = |reason: &str| ParseError::step(text, reason.to_string());
        let Some(first) = tokens.first() else {
            return Err(err("empty step"));
        };

        if first.eq_ignore_ascii_case("dig") {
            return match tokens.as_slice() {
                [_, down, with, tool]
                    if down.eq_ignore_ascii_case("down") && with.eq_ignore_ascii_case("with") =>
                {
                    if tool.eq_ignore_ascii_case(BAREHAND) {
                        return Err(err("dig down needs a tool"));
                    }
                    Ok(Step::DigDown {
                        tool: parse_item(text, tool)?,
                    })
                }
                _ => Err(err("expected \"Dig down with <tool>\"")),
            };
        }

        let verb = match first.to_ascii_lowercase().as_str() {
            "mine" => StepVerb::Mine,
            "craft" => StepVerb::Craft,
            "smelt" => StepVerb::Smelt,
            "equip" => StepVerb::Equip,
            _ => return Err(err("unknown verb")),
        };
        let (count, item, tool) = match tokens.as_slice() {
            [_, count, item] => (*count, *item, None),
            [_, count, item, with, tool] if with.eq_ignore_ascii_case("with") => {
                (*count, *item, Some(*tool))
            }
            _ => return Err(err("expected \"<verb> <count> <item> [with <tool>]\"")),
        };
        let qty = count
            .parse::<u32>()
            .ok()
            .and_then(Quantity::new)
            .ok_or_else(|| err("quantity must be a positive integer"))?;
        let item = parse_item(text, item)?;
        let tool = match tool {
            None => None,
            Some(t) if t.eq_ignore_ascii_case(BAREHAND) => None,
            Some(t) => Some(parse_item(text, t)?),
        };
        match verb {
            StepVerb::Mine => Ok(Step::Mine { item, qty, tool }),
            _ if tool.is_some() => Err(err("only Mine and Dig down take a tool")),
            StepVerb::Craft => Ok(Step::Craft { item, qty }),
            StepVerb::Smelt => Ok(Step::Smelt { item, qty }),
            StepVerb::Equip => Ok(Step::Equip { item, qty }),
            StepVerb::DigDown => unreachable!(),
        }
    }
}

fn parse_item(text: &str, token: &str) -> Result<ItemId, ParseError> {
    ItemId::new(token).map_err(|e| ParseError::step(text, e.to_string()))
}

/// Removes a leading `N.` or `N)` list marker.
pub(crate) fn strip_list_marker(line: &str) -> &str {
    let digits = line.bytes().take_while(u8::is_ascii_digit).count();
    if digits > 0 {
        let rest = &line[digits..];
        if let Some(rest) = rest.strip_prefix('.').or_else(|| rest.strip_prefix(')')) {
            if rest.is_empty() || rest.starts_with(char::is_whitespace) {
                return rest.trim_start();
            }
        }
    }
    line
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Step::Mine { item, qty, tool } => {
                let tool = tool.as_ref().map_or(BAREHAND, ItemId::as_str);
                write!(f, "Mine {qty} {item} with {tool}")
            }
            Step::Craft { item, qty } => write!(f, "Craft {qty} {item}"),
            Step::Smelt { item, qty } => write!(f, "Smelt {qty} {item}"),
            Step::Equip { item, qty } => write!(f, "Equip {qty} {item}"),
            Step::DigDown { tool } => write!(f, "Dig down with {tool}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("malformed step {text:?}: {reason}")]
    MalformedStep { text: String, reason: String },
    #[error("malformed goal {text:?}: {reason}")]
    MalformedGoal { text: String, reason: String },
}

impl ParseError {
    pub(crate) fn step(text: &str, reason: String) -> Self {
        ParseError::MalformedStep {
            text: text.to_string(),
            reason,
        }
    }

    pub(crate) fn goal(text: &str, reason: String) -> Self {
        ParseError::MalformedGoal {
            text: text.to_string(),
            reason,
        }
    }
}

/// Ordered list of steps. Rendered indices are 1-based.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Plan(pub Vec<Step>);

impl Plan {
    pub fn new(steps: Vec<Step>) -> Self {
        Plan(steps)
    }

    pub fn steps(&self) -> &[Step] {
        &self.0
    }

    pub fn into_steps(self) -> Vec<Step> {
        self.0
    }

    /// Parses newline-separated steps; numbering and blank lines are optional.
    pub fn parse(text: &str, db: &RecipeDb) -> Result<Plan, ParseError> {
        text.lines()
            .filter(|line| !line.trim().is_empty())
            .map(|line| Step::parse(line, db))
            .collect()
    }
}

impl Deref for Plan {
    type Target = Vec<Step>;

    fn deref(&self) -> &Vec<Step> {
        &self.0
    }
}

impl DerefMut for Plan {
    fn deref_mut(&mut self) -> &mut Vec<Step> {
        &mut self.0
    }
}

impl From<Vec<Step>> for Plan {
    fn from(steps: Vec<Step>) -> Self {
        Plan(steps)
    }
}

impl FromIterator<Step> for Plan {
    fn from_iter<I: IntoIterator<Item = Step>>(iter: I) -> Self {
        Plan(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a Plan {
    type Item = &'a Step;
    type IntoIter = core::slice::Iter<'a, Step>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

impl fmt::Display for Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, step) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            write!(f, "{}. {}", i + 1, step)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recipe::fixtures::{id, q, tech_tree};
    use alloc::format;
    use proptest::prelude::*;

    #[test]
    fn parses_mine_with_tool() {
        let db = tech_tree();
        let step = Step::parse("Mine 3 stone with wooden_pickaxe", &db).unwrap();
        assert_eq!(
            step,
            Step::Mine {
                item: id("stone"),
                qty: q(3),
                tool: Some(id("wooden_pickaxe"))
            }
        );
    }

    #[test]
    fn parses_dig_down() {
        let db = tech_tree();
        assert_eq!(
            Step::parse("Dig down with wooden_pickaxe", &db).unwrap(),
            Step::DigDown {
                tool: id("wooden_pickaxe")
            }
        );
    }

    #[test]
    fn barehand_is_absent_tool() {
        let db = tech_tree();
        assert_eq!(
            Step::parse("Mine 3 log with barehand", &db).unwrap(),
            Step::Mine {
                item: id("log"),
                qty: q(3),
                tool: None
            }
        );
    }

    #[test]
    fn numbered_lines_parse() {
        let db = tech_tree();
        assert_eq!(
            Step::parse("2. Craft 9 planks", &db).unwrap(),
            Step::Craft {
                item: id("planks"),
                qty: q(9)
            }
        );
    }

    #[test]
    fn malformed_steps() {
        let db = tech_tree();
        for bad in [
            "Fly 3 up",
            "Craft 0 planks",
            "Craft -1 planks",
            "Craft 3 unobtainium",
            "Craft 1 wooden_pickaxe with crafting_table",
            "Dig down with barehand",
            "Dig down",
            "",
        ] {
            assert!(
                matches!(Step::parse(bad, &db), Err(ParseError::MalformedStep { .. })),
                "{bad:?} should not parse"
            );
        }
    }

    #[test]
    fn renders_canonical_text() {
        assert_eq!(
            Step::Craft {
                item: id("planks"),
                qty: q(9)
            }
            .to_string(),
            "Craft 9 planks"
        );
        assert_eq!(
            Step::DigDown {
                tool: id("wooden_pickaxe")
            }
            .to_string(),
            "Dig down with wooden_pickaxe"
        );
        assert_eq!(
            Step::Mine {
                item: id("log"),
                qty: q(3),
                tool: None
            }
            .to_string(),
            "Mine 3 log with barehand"
        );
    }

    #[test]
    fn plan_renders_numbered() {
        let plan = Plan::new(alloc::vec![
            Step::Mine {
                item: id("log"),
                qty: q(3),
                tool: None
            },
            Step::Craft {
                item: id("planks"),
                qty: q(9)
            },
        ]);
        assert_eq!(
            plan.to_string(),
            "1. Mine 3 log with barehand\n2. Craft 9 planks"
        );
        assert_eq!(Plan::parse(&plan.to_string(), &tech_tree()).unwrap(), plan);
    }

    fn arb_step() -> impl Strategy<Value = Step> {
        let items: &'static [&str] = &["log", "planks", "stick", "stone", "iron_ingot", "furnace"];
        let tools: &'static [&str] = &["wooden_pickaxe", "stone_pickaxe", "iron_pickaxe"];
        let item = proptest::sample::select(items).prop_map(id);
        let tool = proptest::sample::select(tools).prop_map(id);
        let qty = (1u32..1000).prop_map(q);
        prop_oneof![
            (
                item.clone(),
                qty.clone(),
                proptest::option::of(tool.clone())
            )
                .prop_map(|(item, qty, tool)| Step::Mine { item, qty, tool }),
            (item.clone(), qty.clone()).prop_map(|(item, qty)| Step::Craft { item, qty }),
            (item.clone(), qty.clone()).prop_map(|(item, qty)| Step::Smelt { item, qty }),
            (item, qty).prop_map(|(item, qty)| Step::Equip { item, qty }),
            tool.prop_map(|tool| Step::DigDown { tool }),
        ]
    }

    proptest! {
        #[test]
        fn render_parse_round_trip(step in arb_step(), n in 1usize..40) {
            let db = tech_tree();
            prop_assert_eq!(Step::parse(&step.to_string(), &db).unwrap(), step.clone());
            let numbered = format!("{n}. {step}");
            prop_assert_eq!(Step::parse(&numbered, &db).unwrap(), step);
        }
    }
}
