//! Headless driver for the modeler: replay design scripts, export and
//! validate documents, submit prints, and serve the kernel over HTTP.

pub mod commands;
pub mod fabclient;
pub mod kernel;

use std::sync::Arc;

use axum::Router;
use deskcad_fab::FabService;
use thiserror::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_COMMAND: u8 = 1;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_NETWORK: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments, unreadable files, or a design command that failed.
    #[error("{0}")]
    Command(String),
    /// The model or document is not fit for export or printing.
    #[error("{0}")]
    Validation(String),
    /// The fabrication server or printer failed.
    #[error("{0}")]
    Network(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Command(_) => EXIT_COMMAND,
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Network(_) => EXIT_NETWORK,
        }
    }
}

/// Fabrication endpoints at the root and the kernel API under `/api`.
pub fn app(kernel: Arc<kernel::Kernel>, fab: Arc<FabService>) -> Router {
    deskcad_fab::router(fab).nest("/api", kernel::router(kernel))
}
