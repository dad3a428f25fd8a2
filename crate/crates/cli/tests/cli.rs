use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn mman(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mman"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = mman(args);
    assert!(
        out.status.success(),
        "mman {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn tiny_config(dir: &Path, samples: usize, extra: &str) -> PathBuf {
    let path = dir.join("tiny.cfg");
    fs::write(
        &path,
        format!(
            "# small enough for a test\nprecision = f64\nsamples = {samples}\nepochs = 2\ndecay_epoch = 1\nwidths = 4,8,8,8\nscales = 1\n{extra}"
        ),
    )
    .unwrap();
    path
}

fn files(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(
                    p.strip_prefix(dir).unwrap().to_path_buf(),
                    fs::read(&p).unwrap(),
                );
            }
        }
    }
    out
}

fn csv_metric(path: &Path, key: &str) -> f64 {
    let text = fs::read_to_string(path).unwrap();
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key},")))
        .unwrap_or_else(|| panic!("{key} missing from {}", path.display()))
        .parse()
        .unwrap()
}

#[test]
fn gen_data_is_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        ok(&[
            "gen-data",
            "--seed",
            "7",
            "--count",
            "16",
            "--size",
            "64",
            "--out",
            d.to_str().unwrap(),
        ]);
    }
    let (fa, fb) = (files(&a), files(&b));
    assert_eq!(fa.len(), 16 * 2 + 2);
    assert_eq!(fa, fb);
    let other = tmp.path().join("c");
    ok(&[
        "gen-data",
        "--seed",
        "8",
        "--count",
        "16",
        "--size",
        "64",
        "--out",
        other.to_str().unwrap(),
    ]);
    assert_ne!(files(&other), fa);
}

#[test]
fn train_then_eval_reproduces_the_report() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path(), 2, "variant = mman\n");
    let run = tmp.path().join("run");
    ok(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "3",
        "--out",
        run.to_str().unwrap(),
    ]);
    for f in [
        "checkpoint.bin",
        "trace.csv",
        "curves.svg",
        "report.csv",
        "report.txt",
        "run.txt",
        "architecture.txt",
    ] {
        assert!(run.join(f).exists(), "{f} missing");
    }
    let manifest = fs::read_to_string(run.join("run.txt")).unwrap();
    assert!(manifest.contains("seed = 3"));
    assert!(manifest.contains("config_digest = "));
    assert!(manifest.contains("version = "));

    let ev = tmp.path().join("eval");
    ok(&[
        "eval",
        "--checkpoint",
        run.join("checkpoint.bin").to_str().unwrap(),
        "--out",
        ev.to_str().unwrap(),
    ]);
    let (a, b) = (
        csv_metric(&run.join("report.csv"), "miou"),
        csv_metric(&ev.join("metrics.csv"), "miou"),
    );
    assert!((a - b).abs() < 1e-6, "train {a} vs eval {b}");
}

#[test]
fn resumed_training_matches_an_uninterrupted_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path(), 2, "variant = double_an\n");
    let cfg = cfg.to_str().unwrap();
    let whole = tmp.path().join("whole");
    ok(&["train", "--config", cfg, "--out", whole.to_str().unwrap()]);

    let part = tmp.path().join("part");
    ok(&[
        "train",
        "--config",
        cfg,
        "--iterations",
        "1",
        "--out",
        part.to_str().unwrap(),
    ]);
    assert!(fs::read_to_string(part.join("run.txt"))
        .unwrap()
        .contains("finished = false"));
    let rest = tmp.path().join("rest");
    ok(&[
        "train",
        "--resume",
        part.join("checkpoint.bin").to_str().unwrap(),
        "--out",
        rest.to_str().unwrap(),
    ]);
    assert_eq!(
        fs::read(rest.join("trace.csv")).unwrap(),
        fs::read(whole.join("trace.csv")).unwrap()
    );
    assert_eq!(
        fs::read(rest.join("checkpoint.bin")).unwrap(),
        fs::read(whole.join("checkpoint.bin")).unwrap()
    );
}

#[test]
fn variants_reports_fovs_and_parameter_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("arch");
    let text = ok(&["variants", "--no-train", "--out", out.to_str().unwrap()]);
    let mman_line = text.lines().find(|l| l.starts_with("mman ")).unwrap();
    assert!(
        mman_line.contains("16×16 global, 22×22 local"),
        "{mman_line}"
    );
    assert!(text.contains("256×256 global"));
}

#[test]
fn variants_trains_all_five_and_classifies_single_an() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path(), 5, "");
    let out = tmp.path().join("study");
    ok(&[
        "variants",
        "--config",
        cfg.to_str().unwrap(),
        "--test-count",
        "2",
        "--out",
        out.to_str().unwrap(),
    ]);
    let csv = fs::read_to_string(out.join("variants.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
    for line in csv.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        let n = cells.len();
        // disc_params and its closed form sit after the quoted FOV cell
        let quoted_end = cells.iter().rposition(|c| c.ends_with('"')).unwrap();
        assert_eq!(cells[quoted_end + 2], cells[quoted_end + 3], "{line}");
        if line.starts_with("single_an") {
            assert!(
                ["good", "poor", "indeterminate"].contains(&cells[n - 1]),
                "{line}"
            );
        }
    }
    for v in ["baseline", "single_an", "double_an", "multiple_an", "mman"] {
        assert!(out.join(format!("trace_{v}.csv")).exists());
        assert!(out.join(format!("curves_{v}.svg")).exists());
    }
}

#[test]
fn export_curves_writes_csv_and_svg() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny_config(tmp.path(), 2, "variant = single_an\n");
    let run = tmp.path().join("run");
    ok(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        run.to_str().unwrap(),
    ]);
    let out = tmp.path().join("curves");
    ok(&[
        "export-curves",
        "--trace",
        run.join("trace.csv").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        fs::read(out.join("curves.csv")).unwrap(),
        fs::read(run.join("trace.csv")).unwrap()
    );
    let svg = fs::read_to_string(out.join("curves.svg")).unwrap();
    assert!(svg.contains("D(real) macro") && svg.contains("L_gen"));
}

#[test]
fn bad_input_is_reported() {
    let out = mman(&["train", "--no-such-flag"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));

    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.cfg");
    fs::write(&cfg, "epochs = 3\ndecay_epoch = 3\n").unwrap();
    let out = mman(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        tmp.path().join("x").to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("decay_epoch") && !err.contains("repeated"),
        "{err}"
    );
    assert!(!tmp.path().join("x").exists());

    let out = mman(&[
        "train",
        "--variant",
        "quad_an",
        "--out",
        tmp.path().join("y").to_str().unwrap(),
    ]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("variant"));
}
