//! Benchmark tasks.

use alloc::string::String;
use core::fmt;
use core::str::FromStr;

use crate::goal::Goal;
use crate::step::Plan;

/// Tech-tree depth bucket a task belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TaskGroup {
    Stone,
    Iron,
    Diamond,
    Redstone,
    Gold,
}

impl TaskGroup {
    /// Reporting order.
    pub const ALL: [TaskGroup; 5] = [
        TaskGroup::Stone,
        TaskGroup::Iron,
        TaskGroup::Diamond,
        TaskGroup::Redstone,
        TaskGroup::Gold,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskGroup::Stone => "stone",
            TaskGroup::Iron => "iron",
            TaskGroup::Diamond => "diamond",
            TaskGroup::Redstone => "redstone",
            TaskGroup::Gold => "gold",
        }
    }
}

impl fmt::Display for TaskGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("unknown task group {0:?}")]
pub struct UnknownGroup(pub String);

impl FromStr for TaskGroup {
    type Err = UnknownGroup;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskGroup::ALL
            .into_iter()
            .find(|g| g.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownGroup(s.into()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Task {
    pub id: String,
    pub group: TaskGroup,
    pub goal: Goal,
    pub ground_truth: Plan,
}
