use alloc::string::String;
use alloc::vec::Vec;

use super::protocol::EvaluationLedger;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClassForgetting {
    pub class_name: String,
    pub expert_id: usize,
    pub introduced_at: usize,
    pub initial_auroc: f64,
    pub current_auroc: f64,
    /// `current - initial`; negative means the class got worse.
    pub forgetting: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExpertForgetting {
    pub expert_id: usize,
    /// Mean over the expert's classes that have a forgetting value.
    pub mean: Option<f64>,
    pub classes: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ForgettingReport {
    pub step: Option<usize>,
    pub per_class: Vec<ClassForgetting>,
    pub per_expert: Vec<ExpertForgetting>,
    pub global: Option<f64>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Forgetting at the final step of the ledger.
pub fn forgetting(ledger: &EvaluationLedger) -> ForgettingReport {
    match ledger.final_step() {
        Some(last) => forgetting_through(ledger, last),
        None => ForgettingReport { step: None, per_class: Vec::new(), per_expert: Vec::new(), global: None },
    }
}

/// Forgetting measured at `step` against each class's AUROC at its own
/// introduction step. Classes introduced at `step` or later, or with an
/// undefined AUROC at either end, are left out.
pub fn forgetting_through(ledger: &EvaluationLedger, step: usize) -> ForgettingReport {
    let mut per_class = Vec::new();
    for (intro, class) in ledger.class_order.iter().enumerate().take(step) {
        let (Some(initial), Some(current)) = (ledger.auroc_at(intro, class), ledger.auroc_at(step, class)) else {
            continue;
        };
        per_class.push(ClassForgetting {
            class_name: class.clone(),
            expert_id: ledger.expert_of(class).expect("introduced classes are assigned"),
            introduced_at: intro,
            initial_auroc: initial,
            current_auroc: current,
            forgetting: current - initial,
        });
    }
    let num_experts = ledger
        .snapshots
        .iter()
        .filter(|s| s.step == step)
        .map(|s| s.expert_id + 1)
        .max()
        .unwrap_or(0);
    let per_expert = (0..num_experts)
        .map(|id| {
            let mine = per_class.iter().filter(|c| c.expert_id == id);
            ExpertForgetting {
                expert_id: id,
                mean: mean(mine.clone().map(|c| c.forgetting)),
                classes: mine.count(),
            }
        })
        .collect();
    let global = mean(per_class.iter().map(|c| c.forgetting));
    ForgettingReport { step: Some(step), per_class, per_expert, global }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::LedgerEntry;
    use crate::router::{AssignmentDecision, AssignmentReason};
    use alloc::vec;

    fn ledger(rows: &[(usize, &str, usize, Option<f64>)], order: &[&str]) -> EvaluationLedger {
        let mut l = EvaluationLedger {
            class_order: order.iter().map(|s| String::from(*s)).collect(),
            ..Default::default()
        };
        for &(step, c, e, a) in rows {
            l.entries.push(LedgerEntry { step, class_name: c.into(), expert_id: e, auroc: a });
            if l.assignments.iter().all(|d| d.class_name != c) {
                l.assignments.push(AssignmentDecision {
                    class_name: c.into(),
                    expert_id: e,
                    reason: AssignmentReason::Similarity,
                    similarity_scores: vec![],
                });
            }
        }
        l
    }

    #[test]
    fn subtraction_and_exclusion() {
        let l = ledger(
            &[(0, "a", 0, Some(0.95)), (1, "a", 0, Some(0.60)), (1, "b", 0, Some(0.9))],
            &["a", "b"],
        );
        let r = forgetting(&l);
        assert_eq!(r.per_class.len(), 1);
        assert!((r.per_class[0].forgetting - (-0.35)).abs() < 1e-12);
        assert_eq!(r.global, r.per_class.first().map(|c| c.forgetting));
    }

    #[test]
    fn constant_auroc_is_zero() {
        let l = ledger(&[(0, "a", 0, Some(0.8)), (1, "a", 0, Some(0.8)), (1, "b", 1, Some(0.7))], &["a", "b"]);
        assert_eq!(forgetting(&l).global, Some(0.0));
    }

    #[test]
    fn missing_values_are_skipped() {
        let l = ledger(&[(0, "a", 0, None), (1, "a", 0, Some(0.8)), (1, "b", 1, Some(0.7))], &["a", "b"]);
        let r = forgetting(&l);
        assert!(r.per_class.is_empty());
        assert_eq!(r.global, None);
        assert_eq!(forgetting(&EvaluationLedger::default()).global, None);
    }
}
