//! Batch front end for `kpz-core`: a rayon executor, the JSON instance
//! schemas, subcommand dispatch and the acceptance suite behind `kpz validate`.

pub mod checks;
pub mod config;
pub mod error;
pub mod exec;
pub mod output;
pub mod run;

pub use error::CliError;
pub use exec::Rayon;
