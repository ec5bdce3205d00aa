use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mecad::report::{read_ledger_csv, read_scores_csv};
use mecad::write_dataset;
use mecad_core::synthetic::{clustered_means, generate_stream, SyntheticConfig};
use mecad_core::{ClassStream, Label};
use tempfile::TempDir;

fn mecad(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mecad")).args(args).current_dir(cwd).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_stream() -> ClassStream {
    let cfg = SyntheticConfig { dim: 8, grid_h: 3, grid_w: 3, train_images: 10, test_normal: 6, test_anomalous: 6, seed: 4, ..Default::default() };
    generate_stream(&cfg, &clustered_means(8, 2, 2, 10.0, 0.2, false, 4)).unwrap()
}

fn dataset(dir: &Path, stream: &ClassStream) -> PathBuf {
    let path = dir.join("data.mecd");
    write_dataset(stream, std::fs::File::create(&path).unwrap()).unwrap();
    path
}

fn config(dir: &Path) -> PathBuf {
    let path = dir.join("engine.toml");
    std::fs::write(&path, "seed = 11\n[memory]\nper_class_budget = 20\nper_expert_budget = 80\n").unwrap();
    path
}

#[test]
fn validate_accepts_a_good_file() {
    let tmp = TempDir::new().unwrap();
    let data = dataset(tmp.path(), &small_stream());
    let out = mecad(&["validate", data.to_str().unwrap()], tmp.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("4 classes, dim 8"));
}

#[test]
fn validate_reports_truncation_offset() {
    let tmp = TempDir::new().unwrap();
    let data = dataset(tmp.path(), &small_stream());
    let bytes = std::fs::read(&data).unwrap();
    std::fs::write(&data, &bytes[..bytes.len() - 7]).unwrap();
    let out = mecad(&["validate", data.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(65));
    assert!(stderr(&out).contains("truncated payload at byte"), "{}", stderr(&out));
}

#[test]
fn validate_rejects_anomalous_train_records() {
    let tmp = TempDir::new().unwrap();
    let data = dataset(tmp.path(), &small_stream());
    let mut bytes = std::fs::read(&data).unwrap();
    // Header, class name and split counts, then the first train record's image id and label.
    let stream = small_stream();
    let rec = &stream.classes[0].train[0];
    let at = 16 + 4 + stream.classes[0].name.len() + 8 + 4 + rec.image_id.len();
    assert_eq!(bytes[at], 0);
    bytes[at] = 1;
    std::fs::write(&data, &bytes).unwrap();
    let out = mecad(&["validate", data.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(65));
    assert!(stderr(&out).contains("anomalous label in the train split"), "{}", stderr(&out));
}

#[test]
fn missing_dataset_is_an_io_error() {
    let tmp = TempDir::new().unwrap();
    let out = mecad(&["validate", "absent.mecd"], tmp.path());
    assert_eq!(out.status.code(), Some(74));
}

#[test]
fn run_writes_artifacts_and_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let data = dataset(tmp.path(), &small_stream());
    let cfg = config(tmp.path());
    for dir in ["a", "b"] {
        let out = mecad(
            &["run", "--dataset", data.to_str().unwrap(), "--config", cfg.to_str().unwrap(), "--out", dir, "--experts", "2"],
            tmp.path(),
        );
        assert!(out.status.success(), "{}", stderr(&out));
    }
    for f in ["run_manifest.json", "config.toml", "ledger.csv", "scores.csv", "report.json", "experts/manifest.json", "plots/heatmap.csv"] {
        assert!(tmp.path().join("a").join(f).is_file(), "missing {f}");
    }
    for f in ["ledger.csv", "scores.csv", "experts/expert_0.mexp", "experts/expert_1.mexp"] {
        let a = std::fs::read(tmp.path().join("a").join(f)).unwrap();
        let b = std::fs::read(tmp.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs between identical runs");
    }

    // The resolved config reproduces the run on its own.
    let resolved = tmp.path().join("a/config.toml");
    let out = mecad(&["run", "--dataset", data.to_str().unwrap(), "--config", resolved.to_str().unwrap(), "--out", "c"], tmp.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(std::fs::read(tmp.path().join("a/ledger.csv")).unwrap(), std::fs::read(tmp.path().join("c/ledger.csv")).unwrap());

    let out = mecad(&["report", "a"], tmp.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("mean final auroc"));
}

#[test]
fn sweep_produces_one_row_per_count() {
    let tmp = TempDir::new().unwrap();
    let data = dataset(tmp.path(), &small_stream());
    let cfg = config(tmp.path());
    let out = mecad(&["run", "--dataset", data.to_str().unwrap(), "--config", cfg.to_str().unwrap(), "--out", "s", "--sweep", "1..8"], tmp.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let sweep = std::fs::read_to_string(tmp.path().join("s/sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 9);
    for n in 1..=8 {
        assert!(tmp.path().join(format!("s/n{n}/ledger.csv")).is_file());
    }
    let curve = std::fs::read_to_string(tmp.path().join("s/plots/auroc_vs_experts.csv")).unwrap();
    assert_eq!(curve.lines().count(), 9);
}

#[test]
fn bad_config_and_arguments_exit_with_validation_code() {
    let tmp = TempDir::new().unwrap();
    let data = dataset(tmp.path(), &small_stream());
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "[router]\nsimilarity_threshold = 3.0\n").unwrap();
    let out = mecad(&["run", "--dataset", data.to_str().unwrap(), "--config", cfg.to_str().unwrap(), "--out", "x"], tmp.path());
    assert_eq!(out.status.code(), Some(65), "{}", stderr(&out));
    assert!(!tmp.path().join("x").exists());
}

#[test]
fn score_matches_final_run_scores() {
    let tmp = TempDir::new().unwrap();
    let stream = small_stream();
    let data = dataset(tmp.path(), &stream);
    let cfg = config(tmp.path());
    let out = mecad(&["run", "--dataset", data.to_str().unwrap(), "--config", cfg.to_str().unwrap(), "--out", "r", "--experts", "2"], tmp.path());
    assert!(out.status.success(), "{}", stderr(&out));

    let class = &stream.classes[1].name;
    let out = mecad(
        &["score", "--state", "r/experts", "--dataset", data.to_str().unwrap(), "--class", class, "--out", "one.csv"],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("auroc"));

    let single = read_scores_csv(std::fs::File::open(tmp.path().join("one.csv")).unwrap()).unwrap();
    let all = read_scores_csv(std::fs::File::open(tmp.path().join("r/scores.csv")).unwrap()).unwrap();
    let from_run: Vec<_> = all.into_iter().filter(|r| &r.class == class).collect();
    assert_eq!(single, from_run);
    assert!(single.iter().any(|r| r.label == Label::Anomalous));

    let ledger = read_ledger_csv(std::fs::File::open(tmp.path().join("r/ledger.csv")).unwrap()).unwrap();
    let last = ledger.iter().map(|e| e.step).max().unwrap();
    assert!(ledger.iter().any(|e| e.step == last && &e.class_name == class && e.auroc.is_some()));
}

#[test]
fn score_unknown_class_lists_known_ones() {
    let tmp = TempDir::new().unwrap();
    let stream = small_stream();
    let data = dataset(tmp.path(), &stream);
    let cfg = config(tmp.path());
    let out = mecad(&["run", "--dataset", data.to_str().unwrap(), "--config", cfg.to_str().unwrap(), "--out", "r"], tmp.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let out = mecad(&["score", "--state", "r/experts", "--dataset", data.to_str().unwrap(), "--class", "widget"], tmp.path());
    assert_eq!(out.status.code(), Some(65));
    let err = stderr(&out);
    for c in &stream.classes {
        assert!(err.contains(&c.name), "{err}");
    }
}

#[test]
fn retention_flag_and_train_split_scoring() {
    let tmp = TempDir::new().unwrap();
    let stream = small_stream();
    let data = dataset(tmp.path(), &stream);
    let cfg = config(tmp.path());
    for mode in ["replay_shrink", "accumulate"] {
        let out = mecad(
            &["run", "--dataset", data.to_str().unwrap(), "--config", cfg.to_str().unwrap(), "--out", mode, "--retention", mode],
            tmp.path(),
        );
        assert!(out.status.success(), "{}", stderr(&out));
        let resolved = std::fs::read_to_string(tmp.path().join(mode).join("config.toml")).unwrap();
        assert!(resolved.contains(&format!("retention_mode = \"{mode}\"")), "{resolved}");
    }
    let out = mecad(
        &["score", "--state", "accumulate/experts", "--dataset", data.to_str().unwrap(), "--class", &stream.classes[0].name, "--split", "train"],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("auroc undefined"), "{}", stdout(&out));
}
