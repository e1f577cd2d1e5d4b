//! Core algorithms for building pseudonymized corpora and measuring how much
//! personal information leaks from source documents into generated summaries.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, HTTP backends, the
//! annotation server and the command line live in the `sumleak` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod anno;
pub mod category;
pub mod corpus;
pub mod date;
pub mod detect;
pub mod gateway;
pub mod metrics;
pub mod pipeline;
pub mod profile;
pub mod pseudo;
pub mod report;
pub mod span;
pub mod text;

pub use category::{map_category, PiiCategory};
pub use corpus::{CorpusSplit, Document, SourceTask, SplitName};
pub use span::PiiSpan;
