//! Review service for pseudo-labeled cohorts.
//!
//! Annotators work through the top-ranked videos of each anomaly class and
//! accept, reassign or reject the automatic label. Every verdict is appended
//! to a JSON-lines journal (fsynced before the reply), and the review state
//! is always the fold of that journal, so restarting from the file
//! reproduces the exact state.

mod api;
mod error;
mod journal;
mod session;
mod state;
mod thumb;

pub use api::{router, serve, ReviewService, ServiceConfig};
pub use error::ReviewError;
pub use journal::{read_journal, Journal, ReviewEvent, Verdict};
pub use session::{ClassProgress, Progress, QueueItem, Session};
pub use state::{Effective, ReviewState};
pub use thumb::{thumbnail, Thumbnail, THUMB_SIZE};
