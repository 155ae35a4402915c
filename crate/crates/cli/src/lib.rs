//! Reports and reproduction checks for the `multicorr` command-line tool.

pub mod app;
pub mod checks;
pub mod commands;
pub mod properties;
pub mod report;
