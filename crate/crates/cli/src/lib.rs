//! Command line and HTTP front ends over [`mapbench_core::service`].

pub mod commands;
pub mod http;

pub use commands::{execute, load_config, Cli, Command};
pub use http::{router, serve};
