//! Core engine for tone-aware email composition: the factor catalog, the
//! agent pipeline, the reuse store and the session service.

pub mod agents;
pub mod catalog;
pub mod clock;
pub mod config;
pub mod domain;
mod error;
pub mod service;
pub mod store;
pub mod testkit;
pub mod text;

pub use error::{Error, GatewayError, Result};
