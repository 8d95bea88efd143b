//! Batch CLI and HTTP service around `comicforge-core`.
//!
//! `POST /ensembles` uploads an ensemble, `POST /comics` composes a comic
//! from one, and `PATCH /comics/{id}` applies a single edit guarded by an
//! `If-Match` revision.

pub mod api;
pub mod cli;
pub mod config;
pub mod store;
pub mod terms;

pub use api::{router, AppState};
pub use store::{FsStore, Session, Store};
