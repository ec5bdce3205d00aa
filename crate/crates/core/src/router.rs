//! Similarity routing of new classes onto experts.
//!
//! A class goes to the most similar eligible expert when that similarity
//! reaches the threshold, otherwise to the lowest-index unused expert. When no
//! unused expert remains the most similar non-full expert takes it
//! (`CapacityFallback`). Experts at `max_classes_per_expert` are never eligible
//! but their similarity is still reported.

use alloc::string::String;
use alloc::vec::Vec;

use crate::{Embeddings, Error, Result};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct RouterConfig {
    pub num_experts: usize,
    pub similarity_threshold: f64,
    pub max_classes_per_expert: usize,
}

impl Default for RouterConfig {
    fn default() -> Self {
        Self { num_experts: 5, similarity_threshold: 0.9, max_classes_per_expert: 6 }
    }
}

impl RouterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_experts == 0 {
            return Err(Error::InvalidConfig("num_experts must be at least 1".into()));
        }
        if !(-1.0..=1.0).contains(&self.similarity_threshold) {
            return Err(Error::InvalidConfig("similarity_threshold must lie in [-1, 1]".into()));
        }
        if self.max_classes_per_expert == 0 {
            return Err(Error::InvalidConfig("max_classes_per_expert must be at least 1".into()));
        }
        Ok(())
    }
}

/// Componentwise mean of a set of embeddings, kept in `f64`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Centroid {
    pub values: Vec<f64>,
    pub count: usize,
}

impl Centroid {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.values.iter().map(|v| v * v).sum())
    }

    pub fn scaled(&self, factor: f64) -> Centroid {
        Centroid { values: self.values.iter().map(|v| v * factor).collect(), count: self.count }
    }
}

pub fn centroid(embeddings: &Embeddings) -> Result<Centroid> {
    if embeddings.is_empty() {
        return Err(Error::EmptyInput("centroid input"));
    }
    let mut sum = alloc::vec![0.0f64; embeddings.dim()];
    for row in embeddings.rows() {
        for (s, &v) in sum.iter_mut().zip(row) {
            *s += v as f64;
        }
    }
    let n = embeddings.len();
    for s in &mut sum {
        *s /= n as f64;
    }
    Ok(Centroid { values: sum, count: n })
}

/// Cosine of the angle between two centroids, clamped to `[-1, 1]`.
pub fn cosine_similarity(a: &Centroid, b: &Centroid) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), found: b.dim() });
    }
    let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
    let (na2, nb2) = (sq(&a.values), sq(&b.values));
    if na2 == 0.0 || nb2 == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let dot: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    // One square root of the product keeps identical inputs at exactly 1.
    Ok((dot / libm::sqrt(na2 * nb2)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum AssignmentReason {
    FirstClass,
    Similarity,
    FreshExpert,
    CapacityFallback,
}

impl AssignmentReason {
    pub fn as_str(self) -> &'static str {
        match self {
            AssignmentReason::FirstClass => "first_class",
            AssignmentReason::Similarity => "similarity",
            AssignmentReason::FreshExpert => "fresh_expert",
            AssignmentReason::CapacityFallback => "capacity_fallback",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AssignmentDecision {
    pub class_name: String,
    pub expert_id: usize,
    pub reason: AssignmentReason,
    /// Similarity to each expert; `None` for experts with no memory yet.
    pub similarity_scores: Vec<Option<f64>>,
}

/// What the router needs to know about one expert.
#[derive(Debug, Clone, Copy)]
pub struct ExpertSlot<'a> {
    pub class_count: usize,
    /// Centroid of the expert's memory bank, `None` while the bank is empty.
    pub centroid: Option<&'a Centroid>,
}

pub fn assign_expert(
    class_name: &str,
    class_centroid: &Centroid,
    experts: &[ExpertSlot<'_>],
    config: &RouterConfig,
) -> Result<AssignmentDecision> {
    config.validate()?;
    if experts.len() != config.num_experts {
        return Err(Error::InvalidConfig(alloc::format!(
            "router configured for {} experts but pool has {}",
            config.num_experts,
            experts.len()
        )));
    }
    let decision = |expert_id, reason, similarity_scores| AssignmentDecision {
        class_name: class_name.into(),
        expert_id,
        reason,
        similarity_scores,
    };

    if experts.iter().all(|e| e.centroid.is_none()) {
        return Ok(decision(0, AssignmentReason::FirstClass, alloc::vec![None; experts.len()]));
    }

    let scores = experts
        .iter()
        .map(|e| e.centroid.map(|c| cosine_similarity(class_centroid, c)).transpose())
        .collect::<Result<Vec<_>>>()?;

    let mut best: Option<(usize, f64)> = None;
    for (i, (e, s)) in experts.iter().zip(&scores).enumerate() {
        let Some(s) = *s else { continue };
        if e.class_count >= config.max_classes_per_expert {
            continue;
        }
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }

    match best {
        Some((i, s)) if s >= config.similarity_threshold => {
            Ok(decision(i, AssignmentReason::Similarity, scores))
        }
        _ => {
            if let Some(empty) = experts.iter().position(|e| e.centroid.is_none()) {
                Ok(decision(empty, AssignmentReason::FreshExpert, scores))
            } else if let Some((i, _)) = best {
                Ok(decision(i, AssignmentReason::CapacityFallback, scores))
            } else {
                Err(Error::PoolExhausted {
                    class: class_name.into(),
                    max_classes: config.max_classes_per_expert,
                })
            }
        }
    }
}
