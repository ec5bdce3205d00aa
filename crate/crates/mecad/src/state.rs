//! Persisted expert pools.
//!
//! A state directory holds `manifest.json` plus one `expert_<id>.mexp` blob per
//! expert. Blobs reuse the MECD primitives:
//!
//! ```text
//! header   "MEXP" | version = 1 | dim | expert_id | class_count
//! class    name | replay_rows | replay floats
//!          | retained: u8 (0 none, 1 present)
//!          [ | retained_rows | retained floats | retained_rows replay-mask bytes ]
//! ```
//!
//! The memory bank itself is not stored; it is reassembled from the class
//! memories exactly as the engine builds it.

use std::fs;
use std::path::Path;

use mecad_core::memory::{ClassMemory, RetainedCoreset};
use mecad_core::{Embeddings, Expert, ExpertPool, MemoryPolicy};
use serde::{Deserialize, Serialize};

use crate::error::{Error, FormatError, Result};
use crate::mecd::{ByteReader, ByteWriter};

pub const MAGIC: [u8; 4] = *b"MEXP";
pub const VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertEntry {
    pub expert_id: usize,
    pub file: String,
    pub assigned_classes: Vec<String>,
    pub bank_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateManifest {
    pub format_version: u32,
    pub dim: usize,
    pub policy: MemoryPolicy,
    pub experts: Vec<ExpertEntry>,
    /// Class -> expert in learning order.
    pub routing: Vec<(String, usize)>,
}

pub fn encode_expert(expert: &Expert) -> Result<Vec<u8>> {
    let mut w = ByteWriter::new();
    w.buf.extend_from_slice(&MAGIC);
    w.u32(VERSION as usize)?;
    w.u32(expert.dim())?;
    w.u32(expert.expert_id())?;
    w.u32(expert.class_memories().len())?;
    for c in expert.class_memories() {
        w.string(&c.name)?;
        w.u32(c.replay.len())?;
        w.floats(c.replay.as_flat());
        match &c.retained {
            None => w.u8(0),
            Some(r) => {
                w.u8(1);
                w.u32(r.rows.len())?;
                w.floats(r.rows.as_flat());
                w.buf.extend(r.is_replay.iter().map(|&b| b as u8));
            }
        }
    }
    Ok(w.buf)
}

pub fn decode_expert(bytes: &[u8], policy: MemoryPolicy) -> Result<Expert> {
    let mut r = ByteReader::new(bytes);
    r.magic(MAGIC)?;
    let version = r.u32("version")? as u32;
    if version != VERSION {
        return Err(FormatError::UnsupportedVersion(version).into());
    }
    let dim = r.u32("dimension")?;
    let expert_id = r.u32("expert id")?;
    let count = r.u32("class count")?;
    let invalid = |e: mecad_core::Error| FormatError::Invalid(e.to_string());
    let mut classes = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let name = r.string("class name")?;
        let rows = r.u32("replay rows")?;
        let replay = Embeddings::from_flat(dim, r.floats(rows, dim, "replay values")?).map_err(invalid)?;
        let retained = match r.u8("retained flag")? {
            0 => None,
            1 => {
                let rows = r.u32("retained rows")?;
                let data = Embeddings::from_flat(dim, r.floats(rows, dim, "retained values")?).map_err(invalid)?;
                let mask = r.take(rows, "replay mask")?.iter().map(|&b| b != 0).collect();
                Some(RetainedCoreset { rows: data, is_replay: mask })
            }
            other => return Err(FormatError::Invalid(format!("retained flag must be 0 or 1, found {other}")).into()),
        };
        classes.push(ClassMemory { name, replay, retained });
    }
    r.finish()?;
    Ok(Expert::from_parts(expert_id, dim, policy, classes)?)
}

fn expert_file(id: usize) -> String {
    format!("expert_{id}.mexp")
}

pub fn save_pool(dir: &Path, pool: &ExpertPool) -> Result<StateManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let first = pool.experts().first().ok_or_else(|| Error::Config("cannot persist an empty pool".into()))?;
    let mut experts = Vec::new();
    for e in pool.experts() {
        let file = expert_file(e.expert_id());
        let path = dir.join(&file);
        fs::write(&path, encode_expert(e)?).map_err(|err| Error::io(&path, err))?;
        experts.push(ExpertEntry {
            expert_id: e.expert_id(),
            file,
            assigned_classes: e.assigned_classes().map(String::from).collect(),
            bank_size: e.memory_bank().len(),
        });
    }
    let manifest = StateManifest {
        format_version: VERSION,
        dim: first.dim(),
        policy: first.policy().clone(),
        experts,
        routing: pool.routing().to_vec(),
    };
    let path = dir.join(MANIFEST);
    fs::write(&path, serde_json::to_vec_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

pub fn load_pool(dir: &Path) -> Result<(ExpertPool, StateManifest)> {
    let path = dir.join(MANIFEST);
    let raw = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: StateManifest = serde_json::from_slice(&raw)?;
    if manifest.format_version != VERSION {
        return Err(FormatError::UnsupportedVersion(manifest.format_version).into());
    }
    let mut experts = Vec::with_capacity(manifest.experts.len());
    for entry in &manifest.experts {
        let path = dir.join(&entry.file);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let expert = decode_expert(&bytes, manifest.policy.clone())?;
        if expert.expert_id() != entry.expert_id || expert.dim() != manifest.dim {
            return Err(FormatError::Invalid(format!("{} does not match its manifest entry", entry.file)).into());
        }
        experts.push(expert);
    }
    // The manifest's routing keeps learning order across experts.
    let pool = ExpertPool::from_experts(experts)?
        .with_routing_order(&manifest.routing)
        .map_err(|e| FormatError::Invalid(e.to_string()))?;
    Ok((pool, manifest))
}
