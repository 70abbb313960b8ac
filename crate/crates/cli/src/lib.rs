//! Command line and HTTP front ends for `gammon-core`.

pub mod cli;
pub mod service;
