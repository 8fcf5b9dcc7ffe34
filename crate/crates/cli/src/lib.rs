//! Driver for the `schroreg` command: scenario loading, mode dispatch and artifact writing.

pub mod plot;
pub mod run;
