//! Command-line harness for dual-task comprehension experiments: model
//! runs through the full pipeline, and a small server that hands out
//! presentation lists to the browser runner and collects its records.

pub mod pipeline;
pub mod serve;
