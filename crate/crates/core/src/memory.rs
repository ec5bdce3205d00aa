//! Expert memory banks, replay buffers and the expert pool.
//!
//! When class `c` lands on an expert, the expert's bank becomes the coreset of
//! `c` together with the replay buffers of every class it already holds
//! (`RetentionMode::ReplayShrink`). `RetentionMode::Accumulate` instead keeps
//! every class's full coreset, trimmed to the per-expert budget.

use alloc::string::String;
use alloc::vec::Vec;

use crate::coreset::random_subsample;
use crate::router::{assign_expert, centroid, AssignmentDecision, Centroid, ExpertSlot, RouterConfig};
use crate::{Embeddings, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum RetentionMode {
    #[default]
    ReplayShrink,
    Accumulate,
}

impl RetentionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RetentionMode::ReplayShrink => "replay_shrink",
            RetentionMode::Accumulate => "accumulate",
        }
    }
}

impl core::str::FromStr for RetentionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "replay_shrink" => Ok(RetentionMode::ReplayShrink),
            "accumulate" => Ok(RetentionMode::Accumulate),
            other => Err(Error::InvalidConfig(alloc::format!(
                "unknown retention mode '{other}' (expected replay_shrink or accumulate)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct MemoryPolicy {
    /// Coreset size per class, counted in patch embeddings.
    pub per_class_budget: usize,
    pub per_expert_budget: usize,
    pub replay_ratio: f64,
    pub retention_mode: RetentionMode,
}

impl Default for MemoryPolicy {
    fn default() -> Self {
        Self {
            per_class_budget: 400,
            per_expert_budget: 2400,
            replay_ratio: 0.2,
            retention_mode: RetentionMode::ReplayShrink,
        }
    }
}

impl MemoryPolicy {
    pub fn validate(&self) -> Result<()> {
        if self.per_class_budget == 0 || self.per_expert_budget == 0 {
            return Err(Error::InvalidConfig("memory budgets must be positive".into()));
        }
        if self.per_class_budget > self.per_expert_budget {
            return Err(Error::InvalidConfig(alloc::format!(
                "per_class_budget {} exceeds per_expert_budget {}",
                self.per_class_budget,
                self.per_expert_budget
            )));
        }
        if !(self.replay_ratio > 0.0 && self.replay_ratio <= 1.0) {
            return Err(Error::InvalidConfig("replay_ratio must lie in (0, 1]".into()));
        }
        Ok(())
    }

    /// Replay buffer size for a coreset of `n` rows: `floor(ratio * n)`, at
    /// least one. The small slack absorbs products such as `0.29 * 100` that
    /// land just under an integer.
    pub fn replay_size(&self, n: usize) -> usize {
        let raw = libm::floor(self.replay_ratio * n as f64 + 1e-9) as usize;
        raw.clamp(1, n.max(1)).min(n)
    }
}

fn replay_indices(n: usize, policy: &MemoryPolicy, seed: u64) -> Result<Vec<usize>> {
    if n == 0 {
        return Err(Error::EmptyInput("class coreset"));
    }
    random_subsample(n, policy.replay_size(n), seed)
}

/// Uniform random replay subset of a class coreset.
pub fn build_replay_buffer(class_coreset: &Embeddings, policy: &MemoryPolicy, seed: u64) -> Result<Embeddings> {
    let idx = replay_indices(class_coreset.len(), policy, seed)?;
    Ok(class_coreset.select(&idx))
}

/// Everything an expert remembers about one of its classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMemory {
    pub name: String,
    /// Replay buffer, fixed once the class is learned.
    pub replay: Embeddings,
    /// Coreset rows still held beyond the replay buffer's role, in coreset
    /// order. `None` once the class has shrunk to its replay buffer.
    pub retained: Option<RetainedCoreset>,
}

impl ClassMemory {
    fn bank_rows(&self) -> &Embeddings {
        match &self.retained {
            Some(r) => &r.rows,
            None => &self.replay,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetainedCoreset {
    pub rows: Embeddings,
    /// Parallel to `rows`: whether the row is also in the replay buffer.
    pub is_replay: Vec<bool>,
}

impl RetainedCoreset {
    fn droppable(&self) -> usize {
        self.is_replay.iter().filter(|r| !**r).count()
    }

    /// Removes up to `count` non-replay rows, latest in coreset order first.
    fn drop_non_replay(&mut self, count: usize) -> usize {
        let mut keep = alloc::vec![true; self.is_replay.len()];
        let mut dropped = 0;
        for i in (0..self.is_replay.len()).rev() {
            if dropped == count {
                break;
            }
            if !self.is_replay[i] {
                keep[i] = false;
                dropped += 1;
            }
        }
        let idx: Vec<usize> = (0..keep.len()).filter(|&i| keep[i]).collect();
        self.rows = self.rows.select(&idx);
        self.is_replay = idx.iter().map(|&i| self.is_replay[i]).collect();
        dropped
    }
}

/// One memory-bank expert.
#[derive(Debug, Clone)]
pub struct Expert {
    expert_id: usize,
    dim: usize,
    policy: MemoryPolicy,
    classes: Vec<ClassMemory>,
    memory_bank: Embeddings,
    centroid_cache: Option<Centroid>,
}

impl PartialEq for Expert {
    fn eq(&self, other: &Self) -> bool {
        self.expert_id == other.expert_id
            && self.dim == other.dim
            && self.policy == other.policy
            && self.classes == other.classes
            && self.memory_bank == other.memory_bank
    }
}

impl Expert {
    pub fn new(expert_id: usize, dim: usize, policy: MemoryPolicy) -> Result<Self> {
        policy.validate()?;
        Ok(Self {
            expert_id,
            dim,
            policy,
            classes: Vec::new(),
            memory_bank: Embeddings::new(dim)?,
            centroid_cache: None,
        })
    }

    /// Rebuilds an expert from persisted class memories.
    pub fn from_parts(expert_id: usize, dim: usize, policy: MemoryPolicy, classes: Vec<ClassMemory>) -> Result<Self> {
        let mut e = Self::new(expert_id, dim, policy)?;
        for (i, c) in classes.iter().enumerate() {
            if classes[..i].iter().any(|o| o.name == c.name) {
                return Err(Error::DuplicateClass { class: c.name.clone(), expert_id });
            }
            if c.replay.dim() != dim || c.retained.as_ref().is_some_and(|r| r.rows.dim() != dim) {
                return Err(Error::DimensionMismatch { expected: dim, found: c.replay.dim() });
            }
            if let Some(r) = &c.retained {
                if r.rows.len() != r.is_replay.len() {
                    return Err(Error::InvalidData("retained rows and replay mask differ in length".into()));
                }
            }
        }
        e.classes = classes;
        e.memory_bank = assemble_bank(dim, &e.classes)?;
        if e.memory_bank.len() > e.policy.per_expert_budget {
            return Err(Error::BudgetExceeded { size: e.memory_bank.len(), budget: e.policy.per_expert_budget });
        }
        Ok(e)
    }

    pub fn expert_id(&self) -> usize {
        self.expert_id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn policy(&self) -> &MemoryPolicy {
        &self.policy
    }

    pub fn memory_bank(&self) -> &Embeddings {
        &self.memory_bank
    }

    pub fn class_memories(&self) -> &[ClassMemory] {
        &self.classes
    }

    pub fn assigned_classes(&self) -> impl ExactSizeIterator<Item = &str> + '_ {
        self.classes.iter().map(|c| c.name.as_str())
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn holds(&self, class_name: &str) -> bool {
        self.classes.iter().any(|c| c.name == class_name)
    }

    pub fn replay_buffer(&self, class_name: &str) -> Option<&Embeddings> {
        self.classes.iter().find(|c| c.name == class_name).map(|c| &c.replay)
    }

    pub fn is_empty(&self) -> bool {
        self.memory_bank.is_empty()
    }

    /// Centroid of the current bank, computed on first use after an update.
    pub fn centroid(&mut self) -> Option<&Centroid> {
        if self.centroid_cache.is_none() && !self.memory_bank.is_empty() {
            self.centroid_cache = centroid(&self.memory_bank).ok();
        }
        self.centroid_cache.as_ref()
    }

    pub fn cached_centroid(&self) -> Option<&Centroid> {
        self.centroid_cache.as_ref()
    }

    /// Learns a new class from its coreset. On error the expert is unchanged.
    pub fn learn_class(&mut self, class_name: &str, class_coreset: &Embeddings, seed: u64) -> Result<()> {
        if self.holds(class_name) {
            return Err(Error::DuplicateClass { class: class_name.into(), expert_id: self.expert_id });
        }
        if class_coreset.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: class_coreset.dim() });
        }
        if class_coreset.len() > self.policy.per_class_budget {
            return Err(Error::BudgetExceeded { size: class_coreset.len(), budget: self.policy.per_class_budget });
        }
        let idx = replay_indices(class_coreset.len(), &self.policy, seed)?;
        let replay = class_coreset.select(&idx);
        let mut is_replay = alloc::vec![false; class_coreset.len()];
        for &i in &idx {
            is_replay[i] = true;
        }

        let mut classes = self.classes.clone();
        if self.policy.retention_mode == RetentionMode::ReplayShrink {
            for c in &mut classes {
                c.retained = None;
            }
        }
        classes.push(ClassMemory {
            name: class_name.into(),
            replay,
            retained: Some(RetainedCoreset { rows: class_coreset.clone(), is_replay }),
        });

        let budget = self.policy.per_expert_budget;
        let mut size: usize = classes.iter().map(|c| c.bank_rows().len()).sum();
        if self.policy.retention_mode == RetentionMode::Accumulate {
            for c in &mut classes {
                if size <= budget {
                    break;
                }
                if let Some(r) = &mut c.retained {
                    let want = (size - budget).min(r.droppable());
                    size -= r.drop_non_replay(want);
                }
            }
        }
        if size > budget {
            return Err(Error::BudgetExceeded { size, budget });
        }

        self.memory_bank = assemble_bank(self.dim, &classes)?;
        self.classes = classes;
        self.centroid_cache = None;
        Ok(())
    }
}

fn assemble_bank(dim: usize, classes: &[ClassMemory]) -> Result<Embeddings> {
    let rows = classes.iter().map(|c| c.bank_rows().len()).sum();
    let mut bank = Embeddings::with_capacity(dim, rows)?;
    for c in classes {
        bank.extend_from(c.bank_rows())?;
    }
    Ok(bank)
}

/// Functional form of [`Expert::learn_class`].
pub fn update_expert(
    mut expert: Expert,
    class_name: &str,
    class_coreset: &Embeddings,
    seed: u64,
) -> Result<Expert> {
    expert.learn_class(class_name, class_coreset, seed)?;
    Ok(expert)
}

/// Assigned-class budget over per-expert budget, independent of retention mode.
pub fn memory_utilization(expert: &Expert) -> f64 {
    let p = expert.policy();
    (expert.class_count() * p.per_class_budget) as f64 / p.per_expert_budget as f64
}

/// The fixed set of experts plus the class -> expert routing table.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertPool {
    experts: Vec<Expert>,
    routing: Vec<(String, usize)>,
}

impl ExpertPool {
    pub fn new(num_experts: usize, dim: usize, policy: &MemoryPolicy) -> Result<Self> {
        if num_experts == 0 {
            return Err(Error::InvalidConfig("num_experts must be at least 1".into()));
        }
        let experts = (0..num_experts)
            .map(|i| Expert::new(i, dim, policy.clone()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { experts, routing: Vec::new() })
    }

    pub fn from_experts(experts: Vec<Expert>) -> Result<Self> {
        let mut routing = Vec::new();
        for (i, e) in experts.iter().enumerate() {
            if e.expert_id() != i {
                return Err(Error::InvalidData(alloc::format!(
                    "expert at position {i} carries id {}",
                    e.expert_id()
                )));
            }
            for c in e.assigned_classes() {
                if routing.iter().any(|(n, _): &(String, usize)| n == c) {
                    return Err(Error::DuplicateClass { class: c.into(), expert_id: i });
                }
                routing.push((String::from(c), i));
            }
        }
        Ok(Self { experts, routing })
    }

    /// Replaces the routing table's order (e.g. learning order from a
    /// manifest); the set of routes must be unchanged.
    pub fn with_routing_order(mut self, routes: &[(String, usize)]) -> Result<Self> {
        let mut have = self.routing.clone();
        let mut want = routes.to_vec();
        have.sort();
        want.sort();
        if have != want {
            return Err(Error::InvalidData("routing order does not match the experts' classes".into()));
        }
        self.routing = routes.to_vec();
        Ok(self)
    }

    pub fn experts(&self) -> &[Expert] {
        &self.experts
    }

    pub fn expert(&self, id: usize) -> Option<&Expert> {
        self.experts.get(id)
    }

    pub fn len(&self) -> usize {
        self.experts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.experts.is_empty()
    }

    /// Routing table in learning order.
    pub fn routing(&self) -> &[(String, usize)] {
        &self.routing
    }

    pub fn expert_of(&self, class_name: &str) -> Option<usize> {
        self.routing.iter().find(|(c, _)| c == class_name).map(|(_, e)| *e)
    }

    /// Decides which expert should learn a new class.
    pub fn route(&mut self, class_name: &str, class_centroid: &Centroid, config: &RouterConfig) -> Result<AssignmentDecision> {
        if let Some(e) = self.expert_of(class_name) {
            return Err(Error::DuplicateClass { class: class_name.into(), expert_id: e });
        }
        for e in &mut self.experts {
            e.centroid();
        }
        let slots: Vec<ExpertSlot<'_>> = self
            .experts
            .iter()
            .map(|e| ExpertSlot { class_count: e.class_count(), centroid: e.cached_centroid() })
            .collect();
        assign_expert(class_name, class_centroid, &slots, config)
    }

    /// Trains only the chosen expert on the new class.
    pub fn learn(&mut self, class_name: &str, expert_id: usize, class_coreset: &Embeddings, seed: u64) -> Result<()> {
        if let Some(e) = self.expert_of(class_name) {
            return Err(Error::DuplicateClass { class: class_name.into(), expert_id: e });
        }
        let expert = self
            .experts
            .get_mut(expert_id)
            .ok_or_else(|| Error::InvalidConfig(alloc::format!("no expert {expert_id}")))?;
        expert.learn_class(class_name, class_coreset, seed)?;
        self.routing.push((class_name.into(), expert_id));
        Ok(())
    }
}
