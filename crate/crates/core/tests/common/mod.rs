use bar_core::{ItemId, Quantity, Recipe, RecipeDb, RecipeKind, RequiredLocation};

pub fn id(name: &str) -> ItemId {
    ItemId::new(name).unwrap()
}

pub fn q(n: u32) -> Quantity {
    Quantity::new(n).unwrap()
}

fn recipe(item: &str, kind: RecipeKind, count: u32, inputs: &[(&str, u32)]) -> Recipe {
    Recipe {
        output: id(item),
        count: q(count),
        kind,
        inputs: inputs.iter().map(|(i, n)| (id(i), q(*n))).collect(),
        station: None,
        fuel: None,
        min_tool: None,
        location: RequiredLocation::Any,
        reusable: false,
    }
}

fn mine(item: &str, tool: Option<&str>, location: RequiredLocation) -> Recipe {
    Recipe {
        min_tool: tool.map(id),
        location,
        ..recipe(item, RecipeKind::Mine, 1, &[])
    }
}

fn tool(item: &str, inputs: &[(&str, u32)]) -> Recipe {
    Recipe {
        station: Some(id("crafting_table")),
        reusable: true,
        ..recipe(item, RecipeKind::Craft, 1, inputs)
    }
}

/// Stone-to-diamond tree with smelting, shaped like the bundled database.
pub fn tech_tree() -> RecipeDb {
    use RequiredLocation::*;
    let recipes = vec![
        mine("log", None, AboveGround),
        mine("stone", Some("wooden_pickaxe"), BelowGround),
        mine("coal", Some("wooden_pickaxe"), BelowGround),
        mine("iron_ore", Some("stone_pickaxe"), BelowGround),
        mine("diamond", Some("iron_pickaxe"), BelowGround),
        recipe("planks", RecipeKind::Craft, 3, &[("log", 1)]),
        recipe("stick", RecipeKind::Craft, 2, &[("planks", 2)]),
        Recipe {
            reusable: true,
            ..recipe("crafting_table", RecipeKind::Craft, 1, &[("planks", 4)])
        },
        tool("wooden_pickaxe", &[("planks", 3), ("stick", 2)]),
        tool("stone_pickaxe", &[("stone", 3), ("stick", 2)]),
        tool("furnace", &[("stone", 8)]),
        Recipe {
            station: Some(id("furnace")),
            fuel: Some((id("coal"), q(1))),
            ..recipe("iron_ingot", RecipeKind::Smelt, 1, &[("iron_ore", 1)])
        },
        tool("iron_pickaxe", &[("iron_ingot", 3), ("stick", 2)]),
        tool("diamond_pickaxe", &[("diamond", 3), ("stick", 2)]),
        Recipe {
            station: Some(id("crafting_table")),
            ..recipe("bucket", RecipeKind::Craft, 1, &[("iron_ingot", 3)])
        },
        recipe("torch", RecipeKind::Craft, 4, &[("coal", 1), ("stick", 1)]),
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
