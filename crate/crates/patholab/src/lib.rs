//! Command-line front end for `patholab-core`: runs the verification checks,
//! and writes `report.json` plus CSV tables.

pub mod cli;
pub mod config;
pub mod output;
pub mod report;
pub mod suite;
