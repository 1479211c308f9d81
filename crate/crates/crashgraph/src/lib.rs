//! Temporal news-impact graphs for portfolio crash detection.
//!
//! The pipeline turns each day's news into a directed impact graph via
//! iterative brainstorming against a chat backend, augments it with past
//! chains from a per-entity memory bank, ranks vertices with
//! retention-weighted scoring to keep only the most important chains, and
//! asks the backend for a next-day crash verdict (or a crisis probability in
//! the macroeconomic mode). A labeling and AUROC harness closes the loop.

pub mod attention;
pub mod brainstorm;
pub mod cli;
pub mod config;
pub mod data;
pub mod domain;
pub mod error;
pub mod eval;
pub mod export;
pub mod graph;
pub mod llm;
pub mod memory;
pub(crate) mod par;
pub mod reason;

pub use error::{Error, Result};
