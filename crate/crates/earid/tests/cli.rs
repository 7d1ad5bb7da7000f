use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use earid::core::Image;
use earid::harness::{cell_seed, split_seed, Condition};
use earid::io::{load_image, save_image};
use earid::synth::{write_glyph_dataset, GlyphSpec};
use tempfile::tempdir;

fn earid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_earid"))
        .args(args)
        .env_remove("EARID_OUT")
        .env_remove("EARID_JOBS")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_lists_every_flag() {
    let common = ["--seed", "--config", "--out", "--jobs", "--verbose"];
    let commands: [(&str, &[&str]); 10] = [
        ("scan", &["--root", "--profile", "--layout", "--pattern", "--expected-resolution", "--name", "--format"]),
        ("split", &["--manifest", "--test-fraction", "--format"]),
        ("canny", &["--in", "--manifest", "--sigma", "--radius", "--low", "--high"]),
        ("zoom", &["--in", "--manifest", "--width", "--height", "--margin-x", "--margin-y"]),
        ("augment", &["--manifest", "--chains", "--format"]),
        ("train", &["--manifest", "--epochs", "--batch-size", "--lr", "--momentum", "--input-size", "--format"]),
        ("evaluate", &["--manifest", "--checkpoint", "--batch-size", "--format"]),
        ("experiment", &["--use-seed", "--format"]),
        ("report", &["--in", "--format"]),
        ("synth", &["--kind"]),
    ];
    for (cmd, flags) in commands {
        let o = earid(&[cmd, "--help"]);
        assert_eq!(code(&o), 0, "{cmd}");
        let text = stdout(&o);
        for flag in flags.iter().chain(&common) {
            assert!(text.contains(flag), "`{cmd} --help` lacks {flag}");
        }
    }
    let o = earid(&["--help"]);
    assert_eq!(code(&o), 0);
    for (cmd, _) in commands {
        assert!(stdout(&o).contains(cmd));
    }
}

#[test]
fn usage_errors_exit_1() {
    for args in [
        &["frobnicate"][..],
        &["canny", "--bogus"],
        &["canny", "--out", "x.png"],
        &["split", "--manifest", "m.json", "--test-fraction", "abc"],
        &["scan", "--root", "."],
        &["experiment"],
        &["split", "--manifest", "m.json", "--out", "o.json", "--config", "c.json"],
    ] {
        let o = earid(args);
        assert_eq!(code(&o), 1, "{args:?}: {}", stderr(&o));
        assert!(!stderr(&o).is_empty());
    }
}

#[test]
fn runtime_failures_exit_2_with_the_path() {
    let dir = tempdir().unwrap();
    let missing = dir.path().join("missing.png");
    let o = earid(&["canny", "--in", s(&missing), "--out", s(&dir.path().join("e.png"))]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("missing.png"), "{}", stderr(&o));

    let tiny = dir.path().join("tiny.png");
    save_image(&Image::filled(2, 2, 1, 0.5).unwrap(), &tiny).unwrap();
    let o = earid(&["canny", "--in", s(&tiny), "--out", s(&dir.path().join("e.png"))]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("tiny.png"), "{}", stderr(&o));
}

#[test]
fn canny_and_zoom_on_single_images() {
    let dir = tempdir().unwrap();
    let input = dir.path().join("in.png");
    let img = Image::from_fn(24, 24, 3, |x, y, _| if (x as i32 - 12).pow(2) + (y as i32 - 12).pow(2) < 50 { 0.9 } else { 0.1 }).unwrap();
    save_image(&img, &input).unwrap();
    let edges = dir.path().join("edges.png");
    let o = earid(&["canny", "--in", s(&input), "--out", s(&edges), "--sigma", "1.4", "--low", "0.1", "--high", "0.2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let e = load_image(&edges).unwrap();
    assert_eq!((e.width(), e.height(), e.channels()), (24, 24, 1));
    assert!(e.data().iter().all(|&v| v == 0.0 || v == 1.0));
    assert!(e.data().contains(&1.0));

    let zoomed = dir.path().join("z.png");
    let o = earid(&["zoom", "--in", s(&input), "--out", s(&zoomed), "--width", "10", "--height", "12", "--margin-x", "0.25", "--margin-y", "0"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let z = load_image(&zoomed).unwrap();
    assert_eq!((z.width(), z.height()), (10, 12));
}

fn glyphs(root: &Path) {
    let spec = GlyphSpec {
        classes: 3,
        per_class: 5,
        width: 24,
        height: 32,
        ..GlyphSpec::default()
    };
    write_glyph_dataset(root, &spec).unwrap();
}

fn write_config(dir: &Path, out: &str, conditions: &str) -> std::path::PathBuf {
    let path = dir.join(format!("{out}.json"));
    let text = format!(
        r#"{{
  "version": "expcfg_v1",
  "dataset_root": "glyphs",
  "profile": {{"layout": "per-subject-dirs", "zoom_enabled": false}},
  "conditions": {conditions},
  "augment": {{"chains_per_image": 2}},
  "train": {{"epochs": 2, "batch_size": 4, "input_size": 8}},
  "master_seed": 3,
  "repeats": 1,
  "output_dir": "{out}"
}}"#
    );
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn experiment_twice_gives_identical_reports() {
    let dir = tempdir().unwrap();
    glyphs(&dir.path().join("glyphs"));
    let cfg_a = write_config(dir.path(), "a", r#"["BM", "AZ"]"#);
    let cfg_b = write_config(dir.path(), "b", r#"["BM", "AZ"]"#);
    for cfg in [&cfg_a, &cfg_b] {
        let o = earid(&["experiment", "--config", s(cfg)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        assert!(stdout(&o).contains("| Repeat |"));
    }
    for f in ["report.csv", "report.json", "report.md", "config.sha256"] {
        assert_eq!(
            fs::read(dir.path().join("a").join(f)).unwrap(),
            fs::read(dir.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }

    // `report` re-renders the stored JSON.
    let o = earid(&["report", "--in", s(&dir.path().join("a/report.json")), "--format", "csv"]);
    assert_eq!(code(&o), 0);
    assert_eq!(stdout(&o), fs::read_to_string(dir.path().join("a/report.csv")).unwrap());
}

#[test]
fn environment_overrides_output_and_jobs() {
    let dir = tempdir().unwrap();
    glyphs(&dir.path().join("glyphs"));
    let cfg = write_config(dir.path(), "unused", r#"["BM"]"#);
    let target = dir.path().join("from_env");
    let o = Command::new(env!("CARGO_BIN_EXE_earid"))
        .args(["experiment", "--config", s(&cfg), "--format", "json"])
        .env("EARID_OUT", &target)
        .env("EARID_JOBS", "2")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(target.join("report.json").is_file());
    assert!(!dir.path().join("unused").exists());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 1);
}

/// scan | split | train | evaluate through manifest files reproduces the
/// BM row of an `experiment` run.
#[test]
fn chained_commands_match_the_experiment_row() {
    let dir = tempdir().unwrap();
    let root = dir.path().join("glyphs");
    glyphs(&root);
    let cfg = write_config(dir.path(), "exp", r#"["BM"]"#);
    let o = earid(&["experiment", "--config", s(&cfg), "--format", "json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let expected = v["rows"][0]["test_accuracy"].as_f64().unwrap();

    let p = |name: &str| dir.path().join(name);
    let run = |args: &[&str]| {
        let o = earid(args);
        assert_eq!(code(&o), 0, "{args:?}: {}", stderr(&o));
        o
    };
    run(&["scan", "--root", s(&root), "--layout", "per-subject-dirs", "--out", s(&p("scan.json"))]);
    let split = split_seed(3, 0).to_string();
    run(&["split", "--manifest", s(&p("scan.json")), "--seed", &split, "--out", s(&p("split.json"))]);
    let seed = cell_seed(3, Condition::Bm, 0).to_string();
    run(&[
        "train", "--manifest", s(&p("split.json")), "--seed", &seed, "--epochs", "2", "--batch-size", "4",
        "--input-size", "8", "--out", s(&p("ckpt.json")),
    ]);
    let o = run(&["evaluate", "--manifest", s(&p("split.json")), "--checkpoint", s(&p("ckpt.json")), "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["test_accuracy"].as_f64().unwrap(), expected);

    let o = run(&["augment", "--manifest", s(&p("split.json")), "--chains", "2", "--seed", "1", "--out", s(&p("aug")), "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    // 15 images, 3 test, 12 train tripled.
    assert_eq!(v["records"], 3 + 12 * 3);
}

#[test]
fn scan_reports_counts_and_warnings() {
    let dir = tempdir().unwrap();
    let root = dir.path().join("glyphs");
    glyphs(&root);
    // Missing parent directories are created.
    let out = dir.path().join("not/yet/m.json");
    let o = earid(&["scan", "--root", s(&root), "--profile", "ami", "--out", s(&out), "--format", "json"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(out.is_file());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["records"], 15);
    assert_eq!(v["class_count"], 3);
    // Glyphs are not 492x702, so every file warns.
    assert_eq!(v["warnings"].as_array().unwrap().len(), 15);
}
