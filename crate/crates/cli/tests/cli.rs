use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hogrl::io;
use tempfile::TempDir;

fn hogrl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hogrl")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Writes a small camouflage spec, generates it and returns the data dir.
fn generated(dir: &Path) -> std::path::PathBuf {
    let spec = dir.join("spec.txt");
    fs::write(
        &spec,
        "n_benign = 80\nn_rings = 6\nring_size = 3\ndepth = 1\nbenign_density = 2.0\nfeature_dim = 3\nclass_separation = 3.0\nnoise_sigma = 0.5\nseed = 4\n",
    )
    .unwrap();
    let data = dir.join("data");
    let out = hogrl(&["gen", "--spec", s(&spec), "--out", s(&data)]);
    assert!(out.status.success(), "{}", stderr(&out));
    data
}

fn small_config(dir: &Path) -> std::path::PathBuf {
    let cfg = dir.join("train.cfg");
    fs::write(&cfg, "epochs = 40\neval_every = 5\nlayers = 2\nhidden_dim = 6\nhead_hidden = 6\nbatch_size = full\nlr = 0.02\n").unwrap();
    cfg
}

#[test]
fn gen_train_eval_round_trip() {
    let tmp = TempDir::new().unwrap();
    let data = generated(tmp.path());
    let cfg = small_config(tmp.path());
    let run = tmp.path().join("run");
    let (g, f, l) = (data.join("graph.txt"), data.join("features.txt"), data.join("labels.txt"));
    let out = hogrl(&[
        "train", "--graph", s(&g), "--features", s(&f), "--labels", s(&l), "--config", s(&cfg), "--seed", "3", "--out", s(&run),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    for artifact in ["checkpoint.txt", "epochs.jsonl", "test_eval.json"] {
        assert!(run.join(artifact).exists(), "{artifact}");
    }
    let log = fs::read_to_string(run.join("epochs.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 8);
    for line in log.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["train_loss"].as_f64().unwrap().is_finite());
        assert!(v["val"]["auc"].is_number());
    }

    let ckpt = io::read_checkpoint(&run.join("checkpoint.txt")).unwrap();
    assert_eq!(ckpt.config.seed, 3);
    assert_eq!(ckpt.config.epochs, 40);

    let ck = run.join("checkpoint.txt");
    let eval = hogrl(&[
        "eval", "--checkpoint", s(&ck), "--graph", s(&g), "--features", s(&f), "--labels", s(&l), "--split", "test",
    ]);
    assert!(eval.status.success(), "{}", stderr(&eval));
    let train_time: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("test_eval.json")).unwrap()).unwrap();
    let eval_time: serde_json::Value = serde_json::from_str(&stdout(&eval)).unwrap();
    assert_eq!(train_time, eval_time);

    let z = tmp.path().join("z.txt");
    let embed = hogrl(&["embed", "--checkpoint", s(&ck), "--graph", s(&g), "--features", s(&f), "--out", s(&z)]);
    assert!(embed.status.success(), "{}", stderr(&embed));
    let z = io::read_matrix(&z).unwrap();
    assert_eq!(z.ncols(), 6);
    assert_eq!(z.nrows(), io::read_graph(&g).unwrap().n());
}

#[test]
fn flags_override_the_config_file() {
    let tmp = TempDir::new().unwrap();
    let data = generated(tmp.path());
    let cfg = small_config(tmp.path());
    let run = tmp.path().join("run");
    let out = hogrl(&[
        "train",
        "--graph", s(&data.join("graph.txt")),
        "--features", s(&data.join("features.txt")),
        "--labels", s(&data.join("labels.txt")),
        "--config", s(&cfg),
        "--epochs", "0",
        "--mode", "hop",
        "--raw-adjacency",
        "--out", s(&run),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let ckpt = io::read_checkpoint(&run.join("checkpoint.txt")).unwrap();
    assert_eq!(ckpt.config.epochs, 0);
    assert_eq!(ckpt.config.layers, 2);
    assert!(!ckpt.config.normalize);
    assert!(ckpt.best.is_none());
    assert_eq!(fs::read_to_string(run.join("epochs.jsonl")).unwrap(), "");
}

#[test]
fn malformed_header_names_the_line() {
    let tmp = TempDir::new().unwrap();
    let data = generated(tmp.path());
    let bad = tmp.path().join("bad.txt");
    fs::write(&bad, "\n# comment\nHOGRL-GRAPH 9\n").unwrap();
    let out = hogrl(&[
        "train", "--graph", s(&bad), "--features", s(&data.join("features.txt")), "--labels", s(&data.join("labels.txt")), "--out", s(tmp.path()),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("bad.txt:3:"), "{}", stderr(&out));
}

#[test]
fn missing_file_and_usage_errors_exit_one() {
    let out = hogrl(&["eval", "--checkpoint", "/nonexistent/ck.txt", "--graph", "g", "--features", "f", "--labels", "l"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("/nonexistent/ck.txt"));
    assert_eq!(hogrl(&["train"]).status.code(), Some(1));
    assert_eq!(hogrl(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(hogrl(&["propagate", "--graph", "g", "--features", "f", "--layers", "2", "--mode", "sideways", "--out", "o"]).status.code(), Some(1));
    assert_eq!(hogrl(&["--help"]).status.code(), Some(0));
}

#[test]
fn gradcheck_reports_and_passes() {
    let out = hogrl(&["gradcheck", "--size", "small"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let line = text.lines().find(|l| l.starts_with("max_relative_error")).unwrap();
    let err: f64 = line.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!(err <= 1e-5);
}

#[test]
fn propagate_writes_every_order() {
    let tmp = TempDir::new().unwrap();
    let g = tmp.path().join("g.txt");
    fs::write(&g, "HOGRL-GRAPH 1\nnodes 3 relations 1\nrelation r 2\n0 1\n1 2\n").unwrap();
    let f = tmp.path().join("f.txt");
    fs::write(&f, "HOGRL-MATRIX 1\n3 1\n1.0\n1.0\n1.0\n").unwrap();
    let out_dir = tmp.path().join("p");
    let out = hogrl(&["propagate", "--graph", s(&g), "--features", s(&f), "--layers", "3", "--mode", "walk", "--out", s(&out_dir)]);
    assert!(out.status.success(), "{}", stderr(&out));
    for l in 1..=3 {
        let m = io::read_matrix(&out_dir.join(format!("r.order{l}.txt"))).unwrap();
        assert!(m.iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    // Raw path graph, x = (1, 0, 0): S²X = A²X - AX + X = (2, -1, 1).
    fs::write(&f, "HOGRL-MATRIX 1\n3 1\n1.0\n0.0\n0.0\n").unwrap();
    let out = hogrl(&["propagate", "--graph", s(&g), "--features", s(&f), "--layers", "2", "--raw-adjacency", "--out", s(&out_dir)]);
    assert!(out.status.success());
    let m = io::read_matrix(&out_dir.join("r.order2.txt")).unwrap();
    assert_eq!(m.column(0).to_vec(), vec![2.0, -1.0, 1.0]);
}

#[test]
fn homophily_reports() {
    let tmp = TempDir::new().unwrap();
    let g = tmp.path().join("g.txt");
    fs::write(&g, "HOGRL-GRAPH 1\nnodes 4 relations 1\nrelation r 6\n0 1\n0 2\n0 3\n1 2\n1 3\n2 3\n").unwrap();
    let l = tmp.path().join("l.txt");
    fs::write(&l, "0 1\n1 1\n2 1\n3 1\n").unwrap();
    let out = hogrl(&["homophily", "--graph", s(&g), "--labels", s(&l), "--layers", "1"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let fraud = &v[0]["fraud"];
    assert_eq!(fraud["mean"], 1.0);
    assert_eq!(fraud["histogram"][9], 4);
    let layer = &v[0]["layers"][0];
    assert_eq!(layer["mixed"]["mean"], layer["decoupled"]["mean"]);

    let data = generated(tmp.path());
    let out = hogrl(&["homophily", "--graph", s(&data.join("graph.txt")), "--labels", s(&data.join("labels.txt"))]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v[0]["fraud"]["mean"], 0.0);
    assert_eq!(v[0]["fraud"]["mode"], 0.05);
}
