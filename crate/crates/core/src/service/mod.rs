//! Composition sessions: the state machine tying the pipeline, the catalog
//! and the reuse store together, with an append-only event log per session.
//!
//! ```text
//! created -> factors_curated -> factors_submitted -> drafted -> analyzed -> finalized
//! ```
//!
//! `drafted` is only observable when analysis of a fresh draft fails;
//! calling `generate` again retries the analysis.

mod compose;
mod events;
mod script;
mod session;
mod summary;

pub use compose::{ComposeService, ManualEditOutcome, QueryStatus, QuickFixApplied, QuickFixQuery};
pub use events::{EventKind, SessionEvent};
pub use script::{run_script, RunReport, Script, SessionRun, StepFailure};
pub use session::{AppliedQuickFix, EditStatus, Session, SessionState, SessionView, TrackedEdit, UnitView};
pub use summary::{summarize, SessionSummary};
