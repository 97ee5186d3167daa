//! Holonic runtime for organizing learners, datasets and trained models as
//! message-passing agents arranged in a capability tree.

pub mod algebra;
pub mod catalog;
pub mod frontend;
pub mod holarchy;
pub mod ml;
pub mod protocol;
pub mod runtime;
pub mod scenario;
pub mod session;
pub mod system;
