//! Files, configuration and the command line around `hybridcast-core`.

pub mod cli;
pub mod config;
pub mod dataio;
pub mod output;
