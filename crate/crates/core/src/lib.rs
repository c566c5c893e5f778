//! Multi-document summarization pipelines and their evaluation harness.
//!
//! Datasets load through [`corpus`], are fitted to a context window by
//! [`budget`], summarized by one of the [`strategies`] through a
//! [`backend`], scored by [`eval`] and aggregated by [`report`]. The [`cli`]
//! module drives all of it from a TOML run config.

pub mod backend;
pub mod budget;
pub mod cli;
pub mod corpus;
pub mod eval;
pub mod net;
pub mod report;
pub mod retrieval;
pub mod strategies;
pub mod tokenizer;
