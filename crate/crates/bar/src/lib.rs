//! File formats, the remote model client, the experiment harness and the
//! `bar` command line for the backward-reasoning crafting planner in
//! [`bar_core`].

pub mod files;
pub mod harness;
pub mod remote;
