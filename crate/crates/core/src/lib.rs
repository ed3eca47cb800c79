//! Auditing harness for image-embedding models.
//!
//! Two miners feed a human triage loop:
//!
//! * [`daf`] compares top-k image neighbors under two embedding models and
//!   flags queries whose neighbor sets diverge;
//! * [`tcac`] ranks a per-image caption pool before and after seeded image
//!   transformations ([`transform`]) and keeps the cases whose top captions
//!   churn the most.
//!
//! Embeddings and logits come through a [`scorer`] binding (precomputed
//! files, a remote HTTP service, or a deterministic toy model). Flagged
//! cases are labeled against a fixed fault taxonomy in [`audit`].

pub mod audit;
pub mod daf;
pub mod datastore;
pub mod error;
pub mod jsonl;
pub mod rng;
pub mod scorer;
pub mod simindex;
pub mod synthetic;
pub mod tcac;
pub mod transform;

pub use error::{Error, ErrorClass, Result};
