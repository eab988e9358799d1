//! Library surface of the CLI so integration tests can reuse the state-file
//! format and pipeline helpers.

pub mod args;
pub mod bench;
pub mod commands;
pub mod pipeline;
pub mod state;
