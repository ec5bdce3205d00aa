use alloc::string::String;
use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors raised by the engine and its validators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("budget must be positive")]
    ZeroBudget,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("requested {requested} samples from a set of {available}")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("zero-norm vector has no direction")]
    ZeroNorm,
    #[error("every expert holds {max_classes} classes; no expert can accept class '{class}' (raise num_experts or max_classes_per_expert)")]
    PoolExhausted { class: String, max_classes: usize },
    #[error("class '{class}' is already assigned to expert {expert_id}")]
    DuplicateClass { class: String, expert_id: usize },
    #[error("class '{0}' has no expert assignment")]
    UnassignedClass(String),
    #[error("memory bank of {size} embeddings exceeds the per-expert budget of {budget}")]
    BudgetExceeded { size: usize, budget: usize },
    #[error("AUROC is undefined: need at least one normal and one anomalous score")]
    SingleClassLabels,
    #[error("length mismatch: {scores} scores but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid dataset: {0}")]
    InvalidData(String),
}
