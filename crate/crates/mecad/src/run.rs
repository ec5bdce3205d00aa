//! The `run` command: protocol execution and artifact layout.
//!
//! ```text
//! <out>/run_manifest.json     written first
//! <out>/config.toml           resolved config, usable with --config to rerun
//! <out>/ledger.csv  scores.csv  report.json  experts/  plots/
//! ```
//!
//! A sweep writes one such set per expert count under `<out>/n<N>/`, plus
//! `sweep.csv`, `sweep.json` and combined `plots/` at the top level.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use mecad_core::{run_protocol, ClassStream, EngineConfig, ProtocolRun, SweepRow};
use serde::{Deserialize, Serialize};

use crate::config::render_config;
use crate::error::{Error, Result};
use crate::report::{write_json, write_ledger_csv, write_plot_data, write_scores_csv, RunReport, ScoreRow};
use crate::state::save_pool;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_path: Option<PathBuf>,
    pub dataset_path: PathBuf,
    pub output_dir: PathBuf,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub engine_version: String,
    pub expert_counts: Vec<usize>,
    pub config: EngineConfig,
}

pub struct RunRequest<'a> {
    pub dataset_path: &'a Path,
    pub config_path: Option<&'a Path>,
    pub config: EngineConfig,
    pub output_dir: &'a Path,
    /// Expert counts for a sweep; `None` runs `config.router.num_experts` once.
    pub sweep: Option<Vec<usize>>,
}

pub struct RunOutcome {
    pub runs: Vec<(usize, ProtocolRun)>,
    pub sweep: Option<Vec<SweepRow>>,
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn execute_run(req: RunRequest<'_>, stream: &ClassStream) -> Result<RunOutcome> {
    req.config.validate()?;
    create_dir(req.output_dir)?;
    let counts = req.sweep.clone().unwrap_or_else(|| vec![req.config.router.num_experts]);
    let manifest = RunManifest {
        config_path: req.config_path.map(Path::to_path_buf),
        dataset_path: req.dataset_path.to_path_buf(),
        output_dir: req.output_dir.to_path_buf(),
        timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        engine_version: env!("CARGO_PKG_VERSION").into(),
        expert_counts: counts.clone(),
        config: req.config.clone(),
    };
    write_json(&manifest, &req.output_dir.join("run_manifest.json"))?;
    write_file(&req.output_dir.join("config.toml"), render_config(&req.config)?.as_bytes())?;

    let mut runs = Vec::with_capacity(counts.len());
    for &n in &counts {
        let mut cfg = req.config.clone();
        cfg.router.num_experts = n;
        let run = run_protocol(stream, &cfg)?;
        let dir = if req.sweep.is_some() { req.output_dir.join(format!("n{n}")) } else { req.output_dir.to_path_buf() };
        write_run_artifacts(&dir, &cfg, stream, &run)?;
        runs.push((n, run));
    }

    let sweep = req.sweep.as_ref().map(|_| {
        runs.iter().map(|(n, r)| SweepRow::from_ledger(*n, &r.ledger)).collect::<Vec<_>>()
    });
    if let Some(rows) = &sweep {
        write_json(rows, &req.output_dir.join("sweep.json"))?;
        let path = req.output_dir.join("sweep.csv");
        let f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = csv::Writer::from_writer(f);
        w.write_record(["num_experts", "mean_final_auroc", "mean_forgetting", "experts_used"])?;
        for r in rows {
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            w.write_record([
                r.num_experts.to_string(),
                opt(r.mean_final_auroc),
                opt(r.mean_forgetting),
                r.experts_used.to_string(),
            ])?;
        }
        w.flush()?;
        let pairs: Vec<(usize, &_)> = runs.iter().map(|(n, r)| (*n, &r.ledger)).collect();
        write_plot_data(&req.output_dir.join("plots"), &pairs)?;
    }
    Ok(RunOutcome { runs, sweep })
}

pub fn final_score_rows(stream: &ClassStream, run: &ProtocolRun) -> Vec<ScoreRow> {
    let mut rows = Vec::new();
    for (class, scores) in run.ledger.class_order.iter().zip(&run.final_scores) {
        let data = stream.class(class).expect("ledger classes come from the stream");
        for (s, rec) in scores.iter().zip(&data.test) {
            rows.push(ScoreRow::new(s, rec.label));
        }
    }
    rows
}

fn write_run_artifacts(dir: &Path, cfg: &EngineConfig, stream: &ClassStream, run: &ProtocolRun) -> Result<()> {
    create_dir(dir)?;
    let mut ledger = Vec::new();
    write_ledger_csv(&run.ledger, &mut ledger)?;
    write_file(&dir.join("ledger.csv"), &ledger)?;
    let mut scores = Vec::new();
    write_scores_csv(&final_score_rows(stream, run), &mut scores)?;
    write_file(&dir.join("scores.csv"), &scores)?;
    write_json(&RunReport::new(cfg, &run.ledger, None), &dir.join("report.json"))?;
    save_pool(&dir.join("experts"), &run.pool)?;
    write_plot_data(&dir.join("plots"), &[(cfg.router.num_experts, &run.ledger)])?;
    Ok(())
}
