//! Fault taxonomy, persisted human labels, and report aggregation.

mod cases;
mod labels;
mod report;
mod taxonomy;

pub use cases::{CaseCatalog, CaseRef, CaseSource};
pub use labels::{now_utc_seconds, CaseLabel, LabelStore};
pub use report::{aggregate_report, resolve_supersession, AuditReport, SourceCounts};
pub use taxonomy::{find_fault, slugify, taxonomy, Fault, FAULTS};
