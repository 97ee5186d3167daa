//! Query files in, report files out, plus message-count reports.

pub mod hops;
pub mod query;
pub mod render;

use serde::{Deserialize, Serialize};

use crate::protocol::QueryOutcome;
pub use query::{parse_query, Diagnostic, Format, Operation, OutputConfig, Query, QueryType};

/// A finished query together with how it should be rendered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub outcome: QueryOutcome,
    pub output: OutputConfig,
}
