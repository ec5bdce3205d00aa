//! Continual anomaly detection with a pool of memory-bank experts.
//!
//! Classes of patch embeddings arrive one at a time. Each class is reduced to a
//! coreset, routed to an expert by centroid cosine similarity, and merged into
//! that expert's memory bank together with replay samples of the classes the
//! expert already holds. Test images are scored by the distance of their most
//! anomalous patch to its nearest neighbour in the bank.
//!
//! The crate is `no_std` (it needs `alloc`). Enable `std` for `std::error::Error`
//! impls, `parallel` for rayon-backed scoring and coreset kernels, and `serde`
//! for serializable configuration and report types.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod coreset;
pub mod distance;
pub mod embedding;
mod error;
pub mod eval;
pub mod memory;
pub mod rng;
pub mod router;
pub mod scoring;
pub mod synthetic;

pub use coreset::{coreset_select, coreset_select_from, random_subsample, CoresetSelection};
pub use embedding::{ClassData, ClassStream, EmbeddingRecord, Embeddings, Label};
pub use error::{Error, Result};
pub use eval::{
    auroc, expert_sweep, forgetting, run_protocol, run_sequence, EngineConfig, EvaluationLedger,
    ForgettingReport, ProtocolRun, SweepRow,
};
pub use memory::{
    build_replay_buffer, memory_utilization, update_expert, Expert, ExpertPool, MemoryPolicy,
    RetentionMode,
};
pub use router::{
    assign_expert, centroid, cosine_similarity, AssignmentDecision, AssignmentReason, Centroid,
    ExpertSlot, RouterConfig,
};
pub use scoring::{image_score, patch_score, score_class, AnomalyScore};
