//! Offensive-language detection pipeline for low-resource Indic languages:
//! corpus ingestion, deterministic tweet normalization, transformer
//! fine-tuning with partial layer freezing, Macro-F1 evaluation and
//! submission-format prediction export.

pub mod checkpoint;
pub mod commands;
pub mod config;
pub mod corpus;
pub mod encoder;
pub mod eval;
pub mod nn;
pub mod normalize;
pub mod registry;
pub mod submission;
pub mod train;
