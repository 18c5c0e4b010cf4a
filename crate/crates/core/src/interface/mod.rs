//! Command line and HTTP service.

mod cli;
pub mod server;

pub use cli::{cli_dispatch, run, Cli, Command, CHECKPOINT_ENV};
pub use server::{router, serve, LoadedModel, ServiceState};
