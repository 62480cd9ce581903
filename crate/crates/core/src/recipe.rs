//! Crafting knowledge: recipes, the item registry and the tool tier order.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::item::{ItemId, Quantity};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RecipeKind {
    Craft,
    Smelt,
    Mine,
}

impl fmt::Display for RecipeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RecipeKind::Craft => "craft",
            RecipeKind::Smelt => "smelt",
            RecipeKind::Mine => "mine",
        })
    }
}

/// Vertical position of the agent.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Location {
    #[default]
    AboveGround,
    BelowGround,
}

/// Where a Mine recipe can be carried out.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RequiredLocation {
    AboveGround,
    BelowGround,
    #[default]
    Any,
}

impl RequiredLocation {
    pub fn admits(self, at: Location) -> bool {
        match self {
            RequiredLocation::Any => true,
            RequiredLocation::AboveGround => at == Location::AboveGround,
            RequiredLocation::BelowGround => at == Location::BelowGround,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Recipe {
    pub output: ItemId,
    /// Items produced per batch.
    pub count: Quantity,
    pub kind: RecipeKind,
    pub inputs: Vec<(ItemId, Quantity)>,
    pub station: Option<ItemId>,
    /// Consumed once per Smelt batch.
    pub fuel: Option<(ItemId, Quantity)>,
    pub min_tool: Option<ItemId>,
    pub location: RequiredLocation,
    /// Tools and stations are never consumed; plans need at most one.
    pub reusable: bool,
}

impl Recipe {
    /// Number of batches needed to end up with at least `qty` outputs.
    pub fn batches(&self, qty: u32) -> u32 {
        qty.div_ceil(self.count.get())
    }

    /// Every item this recipe needs before it can run, in declaration order.
    pub fn dependencies(&self) -> impl Iterator<Item = &ItemId> {
        self.inputs
            .iter()
            .map(|(item, _)| item)
            .chain(self.station.iter())
            .chain(self.fuel.iter().map(|(item, _)| item))
            .chain(self.min_tool.iter())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum RecipeError {
    #[error("recipe cycle: {}", render_path(.0))]
    RecipeCycle(Vec<ItemId>),
    #[error("unknown item {0}")]
    UnknownItem(ItemId),
    #[error("duplicate {1} recipe for {0}")]
    DuplicateRecipe(ItemId, RecipeKind),
    #[error("invalid {kind} recipe for {item}: {reason}")]
    InvalidRecipe {
        item: ItemId,
        kind: RecipeKind,
        reason: String,
    },
}

fn render_path(path: &[ItemId]) -> String {
    let mut out = String::new();
    for (i, item) in path.iter().enumerate() {
        if i > 0 {
            out.push_str(" -> ");
        }
        out.push_str(item.as_str());
    }
    out
}

/// Validated, immutable recipe database.
#[derive(Clone, Debug)]
pub struct RecipeDb {
    items: BTreeSet<ItemId>,
    recipes: BTreeMap<(ItemId, RecipeKind), Recipe>,
    tool_order: Vec<ItemId>,
    reusable: BTreeSet<ItemId>,
    // dependencies before dependents
    topo: Vec<ItemId>,
}

impl RecipeDb {
    pub fn new(tool_order: Vec<ItemId>, recipes: Vec<Recipe>) -> Result<Self, RecipeError> {
        let mut map = BTreeMap::new();
        let mut items = BTreeSet::new();
        let mut reusable = BTreeSet::new();
        for recipe in recipes {
            check_shape(&recipe)?;
            let key = (recipe.output.clone(), recipe.kind);
            if map.contains_key(&key) {
                return Err(RecipeError::DuplicateRecipe(key.0, key.1));
            }
            items.insert(recipe.output.clone());
            if recipe.reusable {
                reusable.insert(recipe.output.clone());
            }
            map.insert(key, recipe);
        }

        for tool in &tool_order {
            if !items.contains(tool) {
                return Err(RecipeError::UnknownItem(tool.clone()));
            }
        }
        for recipe in map.values() {
            for dep in recipe.dependencies() {
                if !items.contains(dep) {
                    return Err(RecipeError::UnknownItem(dep.clone()));
                }
            }
            if let Some(tool) = &recipe.min_tool {
                if !tool_order.contains(tool) {
                    return Err(RecipeError::InvalidRecipe {
                        item: recipe.output.clone(),
                        kind: recipe.kind,
                        reason: alloc::format!("min_tool {tool} is not in tool_order"),
                    });
                }
            }
        }

        let mut db = RecipeDb {
            items,
            recipes: map,
            tool_order,
            reusable,
            topo: Vec::new(),
        };
        db.topo = db.topological_sort()?;
        Ok(db)
    }

    fn topological_sort(&self) -> Result<Vec<ItemId>, RecipeError> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Open,
            Done,
        }
        let mut marks: BTreeMap<&ItemId, Mark> = BTreeMap::new();
        let mut order = Vec::with_capacity(self.items.len());
        for root in &self.items {
            if marks.contains_key(root) {
                continue;
            }
            // explicit DFS stack of (item, next dependency index)
            let mut stack: Vec<(&ItemId, usize)> = alloc::vec![(root, 0)];
            marks.insert(root, Mark::Open);
            while let Some(&mut (item, ref mut next)) = stack.last_mut() {
                let deps = self.direct_dependencies(item);
                if let Some(dep) = deps.get(*next).copied() {
                    *next += 1;
                    match marks.get(dep) {
                        Some(Mark::Done) => {}
                        Some(Mark::Open) => {
                            let from = stack.iter().position(|(i, _)| *i == dep).unwrap_or(0);
                            let mut path: Vec<ItemId> =
                                stack[from..].iter().map(|(i, _)| (*i).clone()).collect();
                            path.push(dep.clone());
                            return Err(RecipeError::RecipeCycle(path));
                        }
                        None => {
                            marks.insert(dep, Mark::Open);
                            stack.push((dep, 0));
                        }
                    }
                } else {
                    marks.insert(item, Mark::Done);
                    order.push(item.clone());
                    stack.pop();
                }
            }
        }
        Ok(order)
    }

    fn direct_dependencies(&self, item: &ItemId) -> Vec<&ItemId> {
        let mut deps = Vec::new();
        for recipe in self.recipes_for(item) {
            deps.extend(recipe.dependencies());
            if recipe.location == RequiredLocation::BelowGround {
                deps.extend(self.dig_tool());
            }
        }
        deps
    }

    pub fn contains(&self, item: &ItemId) -> bool {
        self.items.contains(item)
    }

    pub fn items(&self) -> impl Iterator<Item = &ItemId> {
        self.items.iter()
    }

    pub fn recipe(&self, item: &ItemId, kind: RecipeKind) -> Option<&Recipe> {
        self.recipes.get(&(item.clone(), kind))
    }

    pub fn recipes(&self) -> impl Iterator<Item = &Recipe> {
        self.recipes.values()
    }

    pub fn recipes_for<'a>(&'a self, item: &ItemId) -> impl Iterator<Item = &'a Recipe> + 'a {
        let item = item.clone();
        [RecipeKind::Mine, RecipeKind::Craft, RecipeKind::Smelt]
            .into_iter()
            .filter_map(move |kind| self.recipes.get(&(item.clone(), kind)))
    }

    /// The recipe the oracle uses to obtain `item`: Mine, then Craft, then Smelt.
    pub fn producer(&self, item: &ItemId) -> Option<&Recipe> {
        self.recipes_for(item).next()
    }

    pub fn tool_order(&self) -> &[ItemId] {
        &self.tool_order
    }

    pub fn tool_tier(&self, tool: &ItemId) -> Option<usize> {
        self.tool_order.iter().position(|t| t == tool)
    }

    /// Lowest tool tier; the minimum tool for digging down.
    pub fn dig_tool(&self) -> Option<&ItemId> {
        self.tool_order.first()
    }

    pub fn is_reusable(&self, item: &ItemId) -> bool {
        self.reusable.contains(item)
    }

    /// All items, dependencies before the items that need them.
    pub fn topological_order(&self) -> &[ItemId] {
        &self.topo
    }
}

fn check_shape(recipe: &Recipe) -> Result<(), RecipeError> {
    let invalid = |reason: &str| RecipeError::InvalidRecipe {
        item: recipe.output.clone(),
        kind: recipe.kind,
        reason: reason.into(),
    };
    match recipe.kind {
        RecipeKind::Mine => {
            if !recipe.inputs.is_empty() || recipe.station.is_some() || recipe.fuel.is_some() {
                return Err(invalid("mine recipes take no inputs, station or fuel"));
            }
        }
        RecipeKind::Craft | RecipeKind::Smelt => {
            if recipe.inputs.is_empty() {
                return Err(invalid("needs at least one input"));
            }
            if recipe.min_tool.is_some() {
                return Err(invalid("min_tool only applies to mine recipes"));
            }
            if recipe.location != RequiredLocation::Any {
                return Err(invalid("location only applies to mine recipes"));
            }
            if recipe.kind == RecipeKind::Craft && recipe.fuel.is_some() {
                return Err(invalid("fuel only applies to smelt recipes"));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn id(name: &str) -> ItemId {
        ItemId::new(name).unwrap()
    }

    pub fn q(n: u32) -> Quantity {
        Quantity::new(n).unwrap()
    }

    pub fn mine(item: &str, tool: Option<&str>, location: RequiredLocation) -> Recipe {
        Recipe {
            output: id(item),
            count: Quantity::ONE,
            kind: RecipeKind::Mine,
            inputs: Vec::new(),
            station: None,
            fuel: None,
            min_tool: tool.map(id),
            location,
            reusable: false,
        }
    }

    pub fn craft(item: &str, count: u32, inputs: &[(&str, u32)], station: Option<&str>) -> Recipe {
        Recipe {
            output: id(item),
            count: q(count),
            kind: RecipeKind::Craft,
            inputs: inputs.iter().map(|(i, n)| (id(i), q(*n))).collect(),
            station: station.map(id),
            fuel: None,
            min_tool: None,
            location: RequiredLocation::Any,
            reusable: false,
        }
    }

    pub fn reusable(mut recipe: Recipe) -> Recipe {
        recipe.reusable = true;
        recipe
    }

    pub fn smelt(item: &str, input: (&str, u32), fuel: (&str, u32)) -> Recipe {
        Recipe {
            output: id(item),
            count: Quantity::ONE,
            kind: RecipeKind::Smelt,
            inputs: alloc::vec![(id(input.0), q(input.1))],
            station: Some(id("furnace")),
            fuel: Some((id(fuel.0), q(fuel.1))),
            min_tool: None,
            location: RequiredLocation::Any,
            reusable: false,
        }
    }

    /// Small stone-to-iron tech tree with the same arithmetic as the bundled one.
    pub fn tech_tree() -> RecipeDb {
        use RequiredLocation::*;
        let recipes = alloc::vec![
            mine("log", None, AboveGround),
            mine("stone", Some("wooden_pickaxe"), BelowGround),
            mine("coal", Some("wooden_pickaxe"), BelowGround),
            mine("iron_ore", Some("stone_pickaxe"), BelowGround),
            mine("diamond", Some("iron_pickaxe"), BelowGround),
            craft("planks", 3, &[("log", 1)], None),
            craft("stick", 2, &[("planks", 2)], None),
            reusable(craft("crafting_table", 1, &[("planks", 4)], None)),
            reusable(craft(
                "wooden_pickaxe",
                1,
                &[("planks", 3), ("stick", 2)],
                Some("crafting_table")
            )),
            reusable(craft(
                "stone_pickaxe",
                1,
                &[("stone", 3), ("stick", 2)],
                Some("crafting_table")
            )),
            reusable(craft("furnace", 1, &[("stone", 8)], Some("crafting_table"))),
            smelt("iron_ingot", ("iron_ore", 1), ("coal", 1)),
            reusable(craft(
                "iron_pickaxe",
                1,
                &[("iron_ingot", 3), ("stick", 2)],
                Some("crafting_table")
            )),
            reusable(craft(
                "diamond_pickaxe",
                1,
                &[("diamond", 3), ("stick", 2)],
                Some("crafting_table")
            )),
            craft("torch", 4, &[("coal", 1), ("stick", 1)], None),
        ];
        let tools = [
            "wooden_pickaxe",
            "stone_pickaxe",
            "iron_pickaxe",
            "diamond_pickaxe",
        ]
        .iter()
        .map(|t| id(t))
        .collect();
        RecipeDb::new(tools, recipes).unwrap()
    }
}
