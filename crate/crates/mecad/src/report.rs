//! CSV and JSON artifacts written by a run.
//!
//! | file | columns |
//! |------|---------|
//! | `ledger.csv` | `step,class,expert,auroc` (empty auroc = undefined) |
//! | `scores.csv` | `image_id,class,expert,label,score,argmax_patch` |
//! | `plots/heatmap.csv` | `num_experts,class,final_auroc` |
//! | `plots/auroc_vs_experts.csv` | `num_experts,mean_final_auroc` |
//! | `plots/forgetting_vs_experts.csv` | `num_experts,mean_forgetting` |
//! | `plots/expert_evolution.csv` | `num_experts,step,expert,classes,bank_size,utilization,mean_auroc,mean_forgetting` |
//! | `plots/class_final.csv` | `num_experts,class,expert,final_auroc,forgetting` |
//!
//! Floats are written with Rust's shortest round-trip formatting, so reading
//! a file back yields the exact values.

use std::io::{Read, Write};
use std::path::Path;

use mecad_core::eval::{forgetting_through, ExpertSnapshot, LedgerEntry};
use mecad_core::{
    forgetting, AnomalyScore, AssignmentDecision, EngineConfig, EvaluationLedger, ForgettingReport, Label,
    SweepRow,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn parse_opt(s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| Error::Config(format!("bad float '{s}'")))
}

#[derive(Debug, Serialize, Deserialize)]
struct LedgerRow {
    step: usize,
    class: String,
    expert: usize,
    auroc: String,
}

pub fn write_ledger_csv(ledger: &EvaluationLedger, sink: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    for e in &ledger.entries {
        w.serialize(LedgerRow { step: e.step, class: e.class_name.clone(), expert: e.expert_id, auroc: opt(e.auroc) })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_ledger_csv(source: impl Read) -> Result<Vec<LedgerEntry>> {
    let mut r = csv::Reader::from_reader(source);
    r.deserialize::<LedgerRow>()
        .map(|row| {
            let row = row?;
            Ok(LedgerEntry { step: row.step, class_name: row.class, expert_id: row.expert, auroc: parse_opt(&row.auroc)? })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub image_id: String,
    pub class: String,
    pub expert: usize,
    pub label: Label,
    pub score: f64,
    pub argmax_patch: usize,
}

impl ScoreRow {
    pub fn new(score: &AnomalyScore, label: Label) -> Self {
        Self {
            image_id: score.image_id.clone(),
            class: score.class_name.clone(),
            expert: score.expert_id,
            label,
            score: score.score,
            argmax_patch: score.argmax_patch_index,
        }
    }
}

pub fn write_scores_csv(rows: &[ScoreRow], sink: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_scores_csv(source: impl Read) -> Result<Vec<ScoreRow>> {
    let mut r = csv::Reader::from_reader(source);
    Ok(r.deserialize().collect::<Result<Vec<ScoreRow>, _>>()?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertUsage {
    pub expert_id: usize,
    pub classes: Vec<String>,
    pub bank_size: usize,
    pub utilization: f64,
}

/// Structured summary of one run (`report.json`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub engine_version: String,
    pub config: EngineConfig,
    pub assignments: Vec<AssignmentDecision>,
    pub utilization: Vec<ExpertUsage>,
    pub mean_final_auroc: Option<f64>,
    pub final_aurocs: Vec<(String, Option<f64>)>,
    pub forgetting: ForgettingReport,
    pub ledger: EvaluationLedger,
    /// One row per expert count when the run was a sweep.
    pub sweep: Option<Vec<SweepRow>>,
}

impl RunReport {
    pub fn new(config: &EngineConfig, ledger: &EvaluationLedger, sweep: Option<Vec<SweepRow>>) -> Self {
        let utilization = final_snapshots(ledger)
            .map(|s| ExpertUsage {
                expert_id: s.expert_id,
                classes: s.classes.clone(),
                bank_size: s.bank_size,
                utilization: s.utilization,
            })
            .collect();
        Self {
            engine_version: env!("CARGO_PKG_VERSION").into(),
            config: config.clone(),
            assignments: ledger.assignments.clone(),
            utilization,
            mean_final_auroc: ledger.mean_final_auroc(),
            final_aurocs: ledger.final_aurocs(),
            forgetting: forgetting(ledger),
            ledger: ledger.clone(),
            sweep,
        }
    }
}

fn final_snapshots(ledger: &EvaluationLedger) -> impl Iterator<Item = &ExpertSnapshot> {
    let last = ledger.final_step();
    ledger.snapshots.iter().filter(move |s| Some(s.step) == last)
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let bytes = serde_json::to_vec_pretty(value)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_report(path: &Path) -> Result<RunReport> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}

fn csv_file(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(f))
}

/// Tidy CSVs for the heatmap, the expert-count curves and per-expert evolution.
///
/// `runs` pairs each expert count with its ledger; a single run passes one pair.
pub fn write_plot_data(dir: &Path, runs: &[(usize, &EvaluationLedger)]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut heat = csv_file(&dir.join("heatmap.csv"))?;
    heat.write_record(["num_experts", "class", "final_auroc"])?;
    let mut auroc_n = csv_file(&dir.join("auroc_vs_experts.csv"))?;
    auroc_n.write_record(["num_experts", "mean_final_auroc"])?;
    let mut forget_n = csv_file(&dir.join("forgetting_vs_experts.csv"))?;
    forget_n.write_record(["num_experts", "mean_forgetting"])?;
    let mut evo = csv_file(&dir.join("expert_evolution.csv"))?;
    evo.write_record([
        "num_experts", "step", "expert", "classes", "bank_size", "utilization", "mean_auroc", "mean_forgetting",
    ])?;
    let mut class_final = csv_file(&dir.join("class_final.csv"))?;
    class_final.write_record(["num_experts", "class", "expert", "final_auroc", "forgetting"])?;

    for &(n, ledger) in runs {
        let ns = n.to_string();
        for (class, a) in ledger.final_aurocs() {
            heat.write_record([ns.as_str(), &class, &opt(a)])?;
        }
        let report = forgetting(ledger);
        auroc_n.write_record([ns.as_str(), &opt(ledger.mean_final_auroc())])?;
        forget_n.write_record([ns.as_str(), &opt(report.global)])?;
        for (class, a) in ledger.final_aurocs() {
            let f = report.per_class.iter().find(|c| c.class_name == class).map(|c| c.forgetting);
            let expert = ledger.expert_of(&class).map(|e| e.to_string()).unwrap_or_default();
            class_final.write_record([ns.as_str(), &class, &expert, &opt(a), &opt(f)])?;
        }
        for step in 0..ledger.steps() {
            let step_forgetting = forgetting_through(ledger, step);
            for snap in ledger.snapshots.iter().filter(|s| s.step == step) {
                let aurocs: Vec<f64> = ledger
                    .entries
                    .iter()
                    .filter(|e| e.step == step && e.expert_id == snap.expert_id)
                    .filter_map(|e| e.auroc)
                    .collect();
                let mean_auroc = (!aurocs.is_empty()).then(|| aurocs.iter().sum::<f64>() / aurocs.len() as f64);
                let mean_forgetting = step_forgetting
                    .per_expert
                    .iter()
                    .find(|e| e.expert_id == snap.expert_id)
                    .and_then(|e| e.mean);
                evo.write_record([
                    ns.as_str(),
                    &step.to_string(),
                    &snap.expert_id.to_string(),
                    &snap.classes.join(";"),
                    &snap.bank_size.to_string(),
                    &snap.utilization.to_string(),
                    &opt(mean_auroc),
                    &opt(mean_forgetting),
                ])?;
            }
        }
    }
    for w in [&mut heat, &mut auroc_n, &mut forget_n, &mut evo, &mut class_final] {
        w.flush()?;
    }
    Ok(())
}
