//! Pipeline orchestration behind the `tinyblock` binary: configuration,
//! end-to-end runs, the scalability benchmark, and view exports.

pub mod bench;
pub mod config;
pub mod export;
pub mod pipeline;
