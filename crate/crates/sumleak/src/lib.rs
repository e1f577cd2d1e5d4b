//! File formats, HTTP backends, corpus runners, the annotation service and
//! the command line around `sumleak-core`.

pub mod backend;
pub mod cli;
pub mod config;
pub mod forge;
pub mod io;
pub mod run;
pub mod server;
pub mod store;

pub use sumleak_core as core;
