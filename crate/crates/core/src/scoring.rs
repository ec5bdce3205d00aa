//! Nearest-neighbour anomaly scoring against an expert's memory bank.

use alloc::string::String;
use alloc::vec::Vec;

use crate::distance::nearest;
use crate::memory::Expert;
use crate::{EmbeddingRecord, Embeddings, Error, Result};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AnomalyScore {
    pub image_id: String,
    pub class_name: String,
    pub expert_id: usize,
    /// Euclidean distance of the worst patch to its nearest bank member.
    pub score: f64,
    pub argmax_patch_index: usize,
}

/// Image-level maximum over patch scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageScore {
    pub score: f64,
    pub argmax_patch_index: usize,
}

fn check_bank(dim: usize, bank: &Embeddings) -> Result<()> {
    if bank.is_empty() {
        return Err(Error::EmptyInput("memory bank"));
    }
    if bank.dim() != dim {
        return Err(Error::DimensionMismatch { expected: bank.dim(), found: dim });
    }
    Ok(())
}

/// Exact distance from `patch` to its nearest neighbour in `bank`.
pub fn patch_score(patch: &[f32], bank: &Embeddings) -> Result<f64> {
    check_bank(patch.len(), bank)?;
    let (_, d2) = nearest(patch, bank).expect("bank checked non-empty");
    Ok(libm::sqrtf(d2) as f64)
}

/// Maximum patch score of an image; ties keep the lowest patch index.
pub fn image_score(patches: &Embeddings, bank: &Embeddings) -> Result<ImageScore> {
    if patches.is_empty() {
        return Err(Error::EmptyInput("patch list"));
    }
    check_bank(patches.dim(), bank)?;
    let mut best = ImageScore { score: f64::NEG_INFINITY, argmax_patch_index: 0 };
    for (i, p) in patches.rows().enumerate() {
        let (_, d2) = nearest(p, bank).expect("bank checked non-empty");
        let s = libm::sqrtf(d2) as f64;
        if s > best.score {
            best = ImageScore { score: s, argmax_patch_index: i };
        }
    }
    Ok(best)
}

/// Scores every record of `class_name` on the expert that learned it.
pub fn score_class(class_name: &str, records: &[EmbeddingRecord], expert: &Expert) -> Result<Vec<AnomalyScore>> {
    if !expert.holds(class_name) {
        return Err(Error::UnassignedClass(class_name.into()));
    }
    let bank = expert.memory_bank();
    let one = |r: &EmbeddingRecord| -> Result<AnomalyScore> {
        let s = image_score(&r.patches, bank)?;
        Ok(AnomalyScore {
            image_id: r.image_id.clone(),
            class_name: class_name.into(),
            expert_id: expert.expert_id(),
            score: s.score,
            argmax_patch_index: s.argmax_patch_index,
        })
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        records.par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        records.iter().map(one).collect()
    }
}
