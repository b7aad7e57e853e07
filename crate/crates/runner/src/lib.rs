//! Threads, files and experiments around `crn-smc`.

pub mod bench;
pub mod config;
pub mod data;
pub mod experiment;
pub mod threads;
