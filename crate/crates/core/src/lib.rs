//! Builds masked-language-model pretraining corpora from the ATOMIC-2020
//! and GLUCOSE commonsense knowledge graphs, converts COPA-style and TCR
//! benchmarks into model-ready instances, and measures embedding overlap
//! between a corpus and a benchmark.

pub mod bench;
pub mod config;
pub mod error;
pub mod grammar;
pub mod io;
pub mod kg_ingest;
pub mod mlm;
pub mod overlap;
pub mod pipeline;
pub mod relations;
pub mod split;
pub mod stats;
pub mod tokenizer;
pub mod verbalizer;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
