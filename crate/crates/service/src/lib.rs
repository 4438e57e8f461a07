//! Command line and HTTP service for the matching pipeline.
//!
//! [`cli`] implements the `rematch` binary, [`api`] the `/api/v1` HTTP
//! surface, [`store`] the on-disk project layout and [`jobs`] background
//! runs with checkpoint-based resume.

pub mod api;
pub mod cli;
pub mod jobs;
pub mod store;
