//! Engine configuration files.
//!
//! TOML with the same field names as [`EngineConfig`]; every key is optional
//! and falls back to its default:
//!
//! ```toml
//! seed = 0
//! reuse_unchanged_scores = true
//! # class_order = ["bottle", "cable"]
//!
//! [router]
//! num_experts = 5
//! similarity_threshold = 0.9
//! max_classes_per_expert = 6
//!
//! [memory]
//! per_class_budget = 400
//! per_expert_budget = 2400
//! replay_ratio = 0.2
//! retention_mode = "replay_shrink"   # or "accumulate"
//! ```

use std::path::Path;

use mecad_core::EngineConfig;

use crate::error::{Error, Result};

pub fn parse_config(text: &str) -> Result<EngineConfig> {
    let cfg: EngineConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<EngineConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

pub fn render_config(cfg: &EngineConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| Error::Config(e.to_string()))
}
