//! Build context-aware Javadoc corpora from Java repositories and evaluate
//! documentation generators against them.
//!
//! The pipeline runs ingest → extract → filter → build, with a human review
//! stage ([`annotation`]) between filtering and release. Evaluation pieces
//! ([`metrics`], [`prompting`], [`harness`]) and LoRA parameter accounting
//! ([`lora`]) operate on the built dataset.

pub mod annotation;
pub mod dataset;
pub mod decl;
pub mod error;
pub mod extract;
pub mod filter;
pub mod harness;
pub mod ingest;
pub mod javadoc;
pub mod jsonl;
pub mod lexer;
pub mod lora;
pub mod metrics;
pub mod pipeline;
pub mod prompting;

pub use error::{Error, Result};

/// Version string written into dataset manifests.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
