use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tpca::analysis::variance_score;
use tpca::backend::load_embeddings;
use tpca::PhraseSet;

fn tpca(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tpca"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn fixture_dir() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let out = tpca(&["toy-fixture", "--out", "fixtures"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let root = dir.path().to_path_buf();
    (dir, root)
}

const GENERATE: [&str; 8] = [
    "--backend",
    "toy:fixtures/toy.json",
    "--embeddings",
    "fixtures/cars.emb",
    "--graph",
    "fixtures/lex.tsv",
    "--out",
    "out",
];

#[test]
fn principal_writes_phrases_and_manifest() {
    let (_dir, root) = fixture_dir();
    let mut args = vec!["principal"];
    args.extend(GENERATE);
    let out = tpca(&args, &root);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let set = PhraseSet::from_json(&fs::read_to_string(root.join("out/phrases.json")).unwrap()).unwrap();
    assert_eq!(set.principals.len(), 7);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(root.join("out/run.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"]["command"], "principal");
    assert!(manifest["backend"].as_str().unwrap().starts_with("toy:"));
    assert_eq!(manifest["inputs"].as_object().unwrap().len(), 4);
    assert!(manifest["outputs"]["out/phrases.json"].is_string());
}

#[test]
fn score_matches_library() {
    let (_dir, root) = fixture_dir();
    let mut args = vec!["principal"];
    args.extend(GENERATE);
    assert!(tpca(&args, &root).status.success());
    let out = tpca(&["score", "--phrases", "out/phrases.json", "--embeddings", "fixtures/cars.emb"], &root);
    assert!(out.status.success());
    let printed: f64 = String::from_utf8(out.stdout).unwrap().trim().parse().unwrap();

    let set = PhraseSet::from_json(&fs::read_to_string(root.join("out/phrases.json")).unwrap()).unwrap();
    let (_, images) = load_embeddings(root.join("fixtures/cars.emb")).unwrap();
    let lib = variance_score(&set.principal_embeddings(), &images).unwrap().overall;
    assert!((printed - lib).abs() < 1e-9);
}

#[test]
fn flags_override_config_file() {
    let (_dir, root) = fixture_dir();
    fs::write(root.join("cfg.json"), r#"{"lambda_o": 0.0, "num_phrases": 3, "seed": 4}"#).unwrap();
    let mut args = vec!["principal", "--config", "cfg.json", "--phrases", "2"];
    args.extend(GENERATE);
    assert!(tpca(&args, &root).status.success());
    let set = PhraseSet::from_json(&fs::read_to_string(root.join("out/phrases.json")).unwrap()).unwrap();
    assert_eq!(set.principals.len(), 2);
    assert_eq!(set.config.lambda_o, 0.0);
    assert_eq!(set.config.seed, 4);
}

#[test]
fn missing_embeddings_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = tpca(&["score", "--phrases", "p.json", "--embeddings", "nope.emb"], dir.path());
    assert_eq!(out.status.code(), Some(4));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error: data:"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1);
}

#[test]
fn exit_codes_follow_error_kind() {
    let (_dir, root) = fixture_dir();
    let base = ["--embeddings", "fixtures/cars.emb", "--out", "out"];
    let mut args = vec!["principal", "--backend", "nonsense"];
    args.extend(base);
    let out = tpca(&args, &root);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: config:"));

    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let url = format!("remote:http://127.0.0.1:{port}");
    let mut args = vec!["principal", "--backend", &url];
    args.extend(base);
    let out = tpca(&args, &root);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: backend:"));

    let mut args = vec!["principal", "--backend", "toy:fixtures/toy.json", "--lambda-v", "-1"];
    args.extend(base);
    assert_eq!(tpca(&args, &root).status.code(), Some(2));
}

#[test]
fn every_command_runs_on_the_fixture() {
    let (_dir, root) = fixture_dir();
    let mut args = vec!["principal"];
    args.extend(GENERATE);
    assert!(tpca(&args, &root).status.success());
    let emb = ["--embeddings", "fixtures/cars.emb"];
    let phrases = ["--phrases", "out/phrases.json"];
    let runs: Vec<(Vec<&str>, &str)> = vec![
        (vec!["average", "--backend", "toy:fixtures/toy.json", "--graph", "fixtures/lex.tsv", "--out", "avg"], "avg/average.json"),
        (vec!["baseline", "pca", "--k", "3", "--out", "pca"], "pca/directions.json"),
        (vec!["baseline", "kmeans", "--k", "3", "--out", "km"], "km/directions.json"),
        (vec!["baseline", "freq", "--backend", "toy:fixtures/toy.json", "--out", "freq"], "freq/words.json"),
        (vec!["cluster", "--k", "4", "--out", "cl"], "cl/clusters.json"),
        (vec!["subsample", "--count", "10", "--seed", "3", "--out", "sub"], "sub/subset.emb"),
        (vec!["score", "--out", "score"], "score/score.json"),
        (vec!["project", "--out", "proj"], "proj/projections.json"),
        (vec!["radar", "--image-id", "img004", "--out", "radar"], "radar/radar_img004.svg"),
        (vec!["probe", "--labels", "fixtures/attributes.json", "--out", "probe"], "probe/probe.json"),
    ];
    for (mut args, artifact) in runs {
        args.extend(emb);
        if matches!(args[0], "score" | "project" | "radar" | "probe") {
            args.extend(phrases);
        }
        let out = tpca(&args, &root);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(root.join(artifact).exists(), "{artifact}");
        let dir = Path::new(artifact).parent().unwrap();
        assert!(root.join(dir).join("run.json").exists());
    }
    let words: serde_json::Value = serde_json::from_str(&fs::read_to_string(root.join("freq/words.json")).unwrap()).unwrap();
    assert_eq!(words.as_array().unwrap().len(), 7);
    let (ids, m) = load_embeddings(root.join("sub/subset.emb")).unwrap();
    assert_eq!((ids.len(), m.len()), (10, 10));
}

#[test]
fn manifest_replay_needs_no_subcommand() {
    let (_dir, root) = fixture_dir();
    let out = tpca(&["--from-manifest", "fixtures/run.json", "principal"], &root);
    assert_ne!(out.status.code(), Some(0));
    let out = tpca(&["--from-manifest", "missing.json"], &root);
    assert_eq!(out.status.code(), Some(4));
}
