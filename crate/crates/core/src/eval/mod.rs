//! Sequential protocol, metrics and the expert-count sweep.

mod auroc;
mod forgetting;
mod protocol;

pub use auroc::auroc;
pub use forgetting::{forgetting, forgetting_through, ClassForgetting, ExpertForgetting, ForgettingReport};
pub use protocol::{
    expert_sweep, run_protocol, run_sequence, EngineConfig, EvaluationLedger, ExpertSnapshot, LedgerEntry,
    ProtocolRun, SweepRow,
};
