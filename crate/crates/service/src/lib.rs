//! HTTP service for the interactive search loop.
//!
//! A request is answered entirely from one immutable [`Snapshot`] (corpus,
//! index, expertise, priors and ranking model). [`AppState`] swaps snapshots
//! atomically, so a reload never mixes versions inside a response.
//!
//! The `handle_*` functions in [`api`] are plain functions over a snapshot;
//! [`http`] only maps them onto routes.

pub mod api;
pub mod error;
pub mod http;
pub mod snapshot;

pub use api::{
    handle_health, handle_member, handle_member_search, handle_refresh, handle_search, handle_suggest, Page, RefreshRequest,
    ResultRow, SearchRequest, SearchResponse,
};
pub use error::ServiceError;
pub use http::{router, serve};
pub use snapshot::{AppState, Snapshot, SnapshotSource};
