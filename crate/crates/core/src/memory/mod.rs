//! Working memory and long-term gallery memory.
//!
//! Producers ([`memory_sync`]) are the only code that writes the gallery
//! file; consumers ([`memory_query`], [`stage`], [`inject_context`]) only
//! read it.

mod context;
mod file;
mod query;
mod redact;
mod sync;
mod working;

use thiserror::Error;

pub use context::{inject_context, ContextBlock, ContextSection, SectionKind, DEFAULT_CONTEXT_K};
pub use file::{MemoryEntry, MemoryFile, SummaryKind, HEADER};
pub use query::{memory_query, stage, StagingResult};
pub use redact::{redact, PolicyError, RedactionPolicy, DEFAULT_PATTERNS, REDACTED};
pub use sync::{memory_sync, MemoryControls, SyncOutcome, UserProfile};
pub use working::{update_working, WorkingEvent, WorkingMemory, WorkingMemoryStore};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MemoryError {
    #[error("memory file could not be written: {0}")]
    StorageWriteFailure(String),
    #[error("memory file could not be read: {0}")]
    StorageRead(String),
    #[error("memory file is corrupt: {0}")]
    Corrupt(String),
    #[error("no requested file survived reconciliation with the media store")]
    EmptyAfterReconcile,
    #[error("task id must be non-empty")]
    EmptyTaskId,
    #[error("unknown session {0}")]
    UnknownSession(String),
}
