//! Configuration, orchestration and artifact output for the `twonvw` command.

pub mod config;
pub mod init;
pub mod output;
pub mod run;
