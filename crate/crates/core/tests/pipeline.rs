//! Whole experiments on generated data.

use std::fs;
use std::path::{Path, PathBuf};

use namecf::experiment::{evaluate_run_file, read_split_file, run_experiment, ExperimentConfig};
use namecf::synth::{generate_synthetic, SynthParams};
use namecf::Error;

fn setup(dir: &Path, users: usize, extra: &str) -> ExperimentConfig {
    let data = generate_synthetic(&SynthParams {
        clusters: 2,
        users,
        names: 60,
        noise: 0.1,
        seed: 5,
    })
    .unwrap();
    data.write_to_dir(&dir.join("data")).unwrap();
    let text =
        format!("seed = 42\nout = \"out\"\n{extra}\n[data]\nlog = \"data/log.tsv\"\nknown = \"data/known.txt\"\n");
    ExperimentConfig::from_toml(&text, dir).unwrap()
}

fn tree_files(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push((path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn small_corpus_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let config = setup(dir.path(), 50, "");
    let report = run_experiment(&config, Some(1)).unwrap();
    assert_eq!(report.evaluated_users, 50);
    let ids: Vec<&str> = report.rows.iter().map(|r| r.id.as_str()).collect();
    assert_eq!(
        &ids[..10],
        ["m0", "m1", "m2", "m3", "m4", "m5", "m6", "m7", "m8", "pop"]
    );
    assert_eq!(*ids.last().unwrap(), "final");
    assert_eq!(report.row("final").unwrap().description, "Final ensemble");
    for row in &report.rows {
        assert!(row.map > 0.0 && row.map <= 1.0, "{row:?}");
    }

    let out = dir.path().join("out");
    for file in [
        "config.toml",
        "corpus.tsv",
        "stats.txt",
        "split.tsv",
        "train.tsv",
        "submission.tsv",
        "report.tsv",
    ] {
        assert!(out.join(file).is_file(), "{file} missing");
    }
    let table = fs::read_to_string(out.join("report.tsv")).unwrap();
    assert!(table.starts_with("model\tdescription\tMAP@1000\n"));
    assert!(table.contains("\nfinal\tFinal ensemble\t"));

    // The reported ensemble score is the evaluator applied to the run file.
    let targets = read_split_file(&out.join("split.tsv")).unwrap();
    let direct = evaluate_run_file(&out.join("ensemble/final.run"), &targets, 1000).unwrap();
    assert_eq!(direct.map_at_k, report.ensemble_map());

    // The copied config reproduces the experiment.
    let copied = ExperimentConfig::load(&out.join("config.toml")).unwrap();
    assert_eq!(copied, config);
}

fn assert_same_tree(a: &[(PathBuf, Vec<u8>)], b: &[(PathBuf, Vec<u8>)]) {
    let names = |t: &[(PathBuf, Vec<u8>)]| t.iter().map(|(p, _)| p.clone()).collect::<Vec<_>>();
    assert_eq!(names(a), names(b));
    for ((path, x), (_, y)) in a.iter().zip(b) {
        assert!(x == y, "{} differs", path.display());
    }
}

#[test]
fn reruns_are_byte_identical_and_reuse_the_cache() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let config = setup(dir.path(), 80, "");
    run_experiment(&config, Some(1)).unwrap();
    let first = tree_files(&out);
    fs::remove_dir_all(&out).unwrap();
    run_experiment(&config, Some(3)).unwrap();
    assert_same_tree(&first, &tree_files(&out));

    // A rerun finds every key unchanged and leaves the run alone; a stale
    // key makes that run be recomputed to the same bytes.
    let run_path = out.join("runs/m2.run");
    let modified = || fs::metadata(&run_path).unwrap().modified().unwrap();
    let before = modified();
    std::thread::sleep(std::time::Duration::from_millis(20));
    run_experiment(&config, Some(2)).unwrap();
    assert_eq!(modified(), before);
    fs::write(out.join("runs/m2.run.key"), "stale").unwrap();
    run_experiment(&config, Some(2)).unwrap();
    assert!(modified() > before);
    assert_same_tree(&first, &tree_files(&out));
}

#[test]
fn undefined_leaf_is_rejected_before_any_work() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("tree.ensemble"),
        "a = leaf(m0)\nb = leaf(m42)\nroot = combine(a:0.5, b:0.5)\n",
    )
    .unwrap();
    let config = setup(dir.path(), 20, "ensemble = \"tree.ensemble\"");
    let err = run_experiment(&config, Some(1)).unwrap_err();
    assert!(err.to_string().contains("unknown leaf `m42`"), "{err}");
    match err {
        Error::Stage { stage, source } => {
            assert_eq!(stage, "config");
            assert!(matches!(*source, Error::UnknownLeaf(ref m) if m == "m42"));
        }
        other => panic!("unexpected {other:?}"),
    }
    assert!(!dir.path().join("out/runs/m0.run").exists());
}

#[test]
fn failures_name_their_stage() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = setup(dir.path(), 20, "");
    config.data.log = Some(dir.path().join("missing.tsv"));
    match run_experiment(&config, Some(1)).unwrap_err() {
        Error::Stage { stage, source } => {
            assert_eq!(stage, "ingest");
            assert!(matches!(*source, Error::Io { .. }));
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn custom_models_and_tree() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("tree.ensemble"),
        "a = leaf(fast)\nb = leaf(pop)\nmix = combine(a:0.7, b:0.3)\n",
    )
    .unwrap();
    let extra = r#"ensemble = "tree.ensemble"
n = 20

[[models]]
id = "fast"
description = "N2N on searches only"
kind = "n2n"
bias = "recency"
decay = 0.7
activities = "ES"

[[models]]
id = "pop"
kind = "popular"
"#;
    // The [data] table must follow the top-level keys, so put the models
    // after it by building the text by hand.
    let data = generate_synthetic(&SynthParams {
        clusters: 2,
        users: 40,
        names: 40,
        noise: 0.0,
        seed: 2,
    })
    .unwrap();
    data.write_to_dir(&dir.path().join("data")).unwrap();
    let (head, models) = extra.split_once("\n\n").unwrap();
    let text = format!("out = \"out\"\n{head}\n[data]\nlog = \"data/log.tsv\"\nknown = \"data/known.txt\"\n\n{models}");
    let config = ExperimentConfig::from_toml(&text, dir.path()).unwrap();
    let report = run_experiment(&config, None).unwrap();
    let ids: Vec<&str> = report.rows.iter().map(|r| r.id.as_str()).collect();
    assert_eq!(ids, ["fast", "pop", "mix"]);
    let submission = fs::read_to_string(dir.path().join("out/submission.tsv")).unwrap();
    for line in submission.lines() {
        let (_, names) = line.split_once('\t').unwrap();
        assert!(names.split(',').filter(|s| !s.is_empty()).count() <= 20);
    }
}
