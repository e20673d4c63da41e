//! Configuration files, the motor plant, report formats and the subcommand
//! bodies behind the `netcbc` binary.

pub mod config;
pub mod error;
pub mod motor;
pub mod pipeline;
pub mod report;

pub use config::RunConfig;
pub use error::CliError;
