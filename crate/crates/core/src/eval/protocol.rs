use alloc::string::String;
use alloc::vec::Vec;

use super::auroc::auroc;
use super::forgetting::forgetting;
use crate::coreset::coreset_select;
use crate::memory::{memory_utilization, ExpertPool, MemoryPolicy};
use crate::rng::derive_seed;
use crate::router::{centroid, AssignmentDecision, RouterConfig};
use crate::scoring::{score_class, AnomalyScore};
use crate::{ClassStream, Error, Result};

const CORESET_STREAM: u64 = 1;
const REPLAY_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct EngineConfig {
    pub router: RouterConfig,
    pub memory: MemoryPolicy,
    pub seed: u64,
    /// Introduction order; `None` keeps dataset order.
    pub class_order: Option<Vec<String>>,
    /// Reuse a class's previous scores when its expert's bank has not changed
    /// since they were computed. The bank is immutable between updates, so the
    /// reused values are identical to a fresh evaluation.
    pub reuse_unchanged_scores: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            router: RouterConfig::default(),
            memory: MemoryPolicy::default(),
            seed: 0,
            class_order: None,
            reuse_unchanged_scores: true,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        self.router.validate()?;
        self.memory.validate()
    }

    fn resolve_order(&self, stream: &ClassStream) -> Result<Vec<usize>> {
        match &self.class_order {
            None => Ok((0..stream.classes.len()).collect()),
            Some(names) => {
                let mut order = Vec::with_capacity(names.len());
                for n in names {
                    let i = stream
                        .classes
                        .iter()
                        .position(|c| &c.name == n)
                        .ok_or_else(|| Error::InvalidConfig(alloc::format!("class_order names unknown class '{n}'")))?;
                    if order.contains(&i) {
                        return Err(Error::InvalidConfig(alloc::format!("class_order repeats '{n}'")));
                    }
                    order.push(i);
                }
                Ok(order)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LedgerEntry {
    pub step: usize,
    pub class_name: String,
    pub expert_id: usize,
    /// `None` when the class's test split lacks one of the two labels.
    pub auroc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExpertSnapshot {
    pub step: usize,
    pub expert_id: usize,
    pub classes: Vec<String>,
    pub bank_size: usize,
    pub utilization: f64,
}

/// Per-step AUROC history of a sequential run.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvaluationLedger {
    /// Classes in the order they were introduced; step `t` introduced `class_order[t]`.
    pub class_order: Vec<String>,
    /// Sorted by step, then introduction order.
    pub entries: Vec<LedgerEntry>,
    pub assignments: Vec<AssignmentDecision>,
    pub snapshots: Vec<ExpertSnapshot>,
}

impl EvaluationLedger {
    pub fn steps(&self) -> usize {
        self.class_order.len()
    }

    pub fn final_step(&self) -> Option<usize> {
        self.steps().checked_sub(1)
    }

    pub fn introduction_step(&self, class_name: &str) -> Option<usize> {
        self.class_order.iter().position(|c| c == class_name)
    }

    pub fn entry(&self, step: usize, class_name: &str) -> Option<&LedgerEntry> {
        self.entries.iter().find(|e| e.step == step && e.class_name == class_name)
    }

    pub fn auroc_at(&self, step: usize, class_name: &str) -> Option<f64> {
        self.entry(step, class_name).and_then(|e| e.auroc)
    }

    pub fn expert_of(&self, class_name: &str) -> Option<usize> {
        self.assignments.iter().find(|a| a.class_name == class_name).map(|a| a.expert_id)
    }

    /// Final-step AUROC per class, in introduction order.
    pub fn final_aurocs(&self) -> Vec<(String, Option<f64>)> {
        let Some(last) = self.final_step() else { return Vec::new() };
        self.class_order.iter().map(|c| (c.clone(), self.auroc_at(last, c))).collect()
    }

    /// Mean final AUROC over classes where it is defined.
    pub fn mean_final_auroc(&self) -> Option<f64> {
        let vals: Vec<f64> = self.final_aurocs().into_iter().filter_map(|(_, a)| a).collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    }
}

/// Everything a sequential run produces.
#[derive(Debug, Clone)]
pub struct ProtocolRun {
    pub ledger: EvaluationLedger,
    pub pool: ExpertPool,
    /// Image scores of every class at the final step, in introduction order.
    pub final_scores: Vec<Vec<AnomalyScore>>,
}

struct CachedEval {
    bank_revision: usize,
    auroc: Option<f64>,
    scores: Vec<AnomalyScore>,
}

/// Runs the sequential protocol and returns the ledger.
pub fn run_sequence(stream: &ClassStream, config: &EngineConfig) -> Result<EvaluationLedger> {
    run_protocol(stream, config).map(|r| r.ledger)
}

/// Introduces classes one at a time: coreset, route, update the chosen expert,
/// then re-evaluate every class seen so far on its expert's current bank.
pub fn run_protocol(stream: &ClassStream, config: &EngineConfig) -> Result<ProtocolRun> {
    config.validate()?;
    let order = config.resolve_order(stream)?;
    let mut pool = ExpertPool::new(config.router.num_experts, stream.dim, &config.memory)?;
    let mut ledger = EvaluationLedger::default();
    let mut cache: Vec<Option<CachedEval>> = (0..order.len()).map(|_| None).collect();

    for (step, &ci) in order.iter().enumerate() {
        let class = &stream.classes[ci];
        let train = class.train_embeddings(stream.dim)?;
        if train.is_empty() {
            return Err(Error::EmptyInput("training split"));
        }
        let class_centroid = centroid(&train)?;
        let selection = coreset_select(
            &train,
            config.memory.per_class_budget,
            derive_seed(config.seed, CORESET_STREAM, step as u64),
        )?;
        let coreset = train.select(&selection.selected_indices);
        let decision = pool.route(&class.name, &class_centroid, &config.router)?;
        pool.learn(&class.name, decision.expert_id, &coreset, derive_seed(config.seed, REPLAY_STREAM, step as u64))?;
        ledger.class_order.push(class.name.clone());
        ledger.assignments.push(decision);

        for (k, &cj) in order[..=step].iter().enumerate() {
            let seen = &stream.classes[cj];
            let expert_id = pool.expert_of(&seen.name).expect("learned classes are routed");
            let expert = pool.expert(expert_id).expect("routed expert exists");
            let revision = expert.class_count();
            let reusable = config.reuse_unchanged_scores
                && cache[k].as_ref().is_some_and(|c| c.bank_revision == revision);
            if !reusable {
                let scores = score_class(&seen.name, &seen.test, expert)?;
                let values: Vec<f64> = scores.iter().map(|s| s.score).collect();
                let result = auroc(&values, &seen.test_labels());
                let value = match result {
                    Ok(v) => Some(v),
                    Err(Error::SingleClassLabels) => None,
                    Err(e) => return Err(e),
                };
                cache[k] = Some(CachedEval { bank_revision: revision, auroc: value, scores });
            }
            let cached = cache[k].as_ref().expect("filled above");
            ledger.entries.push(LedgerEntry {
                step,
                class_name: seen.name.clone(),
                expert_id,
                auroc: cached.auroc,
            });
        }

        for e in pool.experts() {
            ledger.snapshots.push(ExpertSnapshot {
                step,
                expert_id: e.expert_id(),
                classes: e.assigned_classes().map(String::from).collect(),
                bank_size: e.memory_bank().len(),
                utilization: memory_utilization(e),
            });
        }
    }

    let final_scores = cache.into_iter().map(|c| c.map(|c| c.scores).unwrap_or_default()).collect();
    Ok(ProtocolRun { ledger, pool, final_scores })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepRow {
    pub num_experts: usize,
    pub mean_final_auroc: Option<f64>,
    pub mean_forgetting: Option<f64>,
    /// Final AUROC per class in introduction order.
    pub final_aurocs: Vec<(String, Option<f64>)>,
    pub experts_used: usize,
}

impl SweepRow {
    pub fn from_ledger(num_experts: usize, ledger: &EvaluationLedger) -> Self {
        let mut used: Vec<usize> = ledger.assignments.iter().map(|a| a.expert_id).collect();
        used.sort_unstable();
        used.dedup();
        SweepRow {
            num_experts,
            mean_final_auroc: ledger.mean_final_auroc(),
            mean_forgetting: forgetting(ledger).global,
            final_aurocs: ledger.final_aurocs(),
            experts_used: used.len(),
        }
    }
}

/// Independent runs for each expert count with identical seed and order.
pub fn expert_sweep(stream: &ClassStream, base: &EngineConfig, expert_counts: &[usize]) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(expert_counts.len());
    for &n in expert_counts {
        if n == 0 {
            return Err(Error::InvalidConfig("expert counts must be at least 1".into()));
        }
        let mut cfg = base.clone();
        cfg.router.num_experts = n;
        rows.push(SweepRow::from_ledger(n, &run_sequence(stream, &cfg)?));
    }
    Ok(rows)
}
