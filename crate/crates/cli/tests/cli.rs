use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn waveformer(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_waveformer"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn p(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let o = waveformer(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
    assert_eq!(waveformer(&[]).status.code(), Some(1));
    assert_eq!(waveformer(&["--help"]).status.code(), Some(0));
    assert_eq!(waveformer(&["generate", "--pde", "heat", "--out", "x"]).status.code(), Some(1));
}

#[test]
fn generate_is_byte_reproducible() {
    let dir = TempDir::new().unwrap();
    for name in ["a.wfds", "b.wfds"] {
        let o = waveformer(&["generate", "--pde", "burgers", "--samples", "4", "--seed", "7", "--out", &p(&dir, name)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let a = std::fs::read(dir.path().join("a.wfds")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b.wfds")).unwrap());
    assert_eq!(&a[..4], b"WFDS");
    let o = waveformer(&["generate", "--pde", "burgers", "--samples", "4", "--seed", "8", "--out", &p(&dir, "c.wfds")]);
    assert!(o.status.success());
    assert_ne!(a, std::fs::read(dir.path().join("c.wfds")).unwrap());
}

#[test]
fn bad_inputs_map_to_exit_codes() {
    let dir = TempDir::new().unwrap();
    let missing = p(&dir, "missing.wfds");
    let o = waveformer(&["evaluate", "--pred", &missing, "--truth", &missing, "--boundary", "3", "--csv", &p(&dir, "e.csv")]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr(&o).trim().lines().count(), 1);

    std::fs::write(dir.path().join("bad.cfg"), "levels = 0\n").unwrap();
    let data = p(&dir, "d.wfds");
    assert!(waveformer(&["generate", "--pde", "burgers", "--samples", "2", "--out", &data]).status.success());
    let o = waveformer(&["train", "--data", &data, "--config", &p(&dir, "bad.cfg"), "--out", &p(&dir, "m.wfck")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("BadValue"), "{}", stderr(&o));

    std::fs::write(dir.path().join("odd.cfg"), "preset = toy\nlevels = 7\n").unwrap();
    let o = waveformer(&["train", "--data", &data, "--config", &p(&dir, "odd.cfg"), "--out", &p(&dir, "m.wfck")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("BadLength"), "{}", stderr(&o));

    let o = waveformer(&["generate", "--pde", "ks", "--bc", "periodic", "--out", &p(&dir, "k.wfds")]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn evaluate_rejects_mismatched_shapes() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (p(&dir, "a.wfds"), p(&dir, "b.wfds"));
    assert!(waveformer(&["generate", "--pde", "burgers", "--samples", "2", "--out", &a]).status.success());
    assert!(waveformer(&["generate", "--pde", "burgers", "--samples", "2", "--grid", "32", "--out", &b]).status.success());
    let o = waveformer(&["evaluate", "--pred", &a, "--truth", &b, "--boundary", "10", "--csv", &p(&dir, "e.csv")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Misaligned"), "{}", stderr(&o));
}

fn train_toy(dir: &TempDir, data: &str, kind: &str) -> String {
    let ckpt = p(dir, &format!("{kind}.wfck"));
    let o = waveformer(&["train", "--model", kind, "--data", data, "--config", &p(dir, "toy.cfg"), "--out", &ckpt]);
    assert!(o.status.success(), "{}", stderr(&o));
    ckpt
}

#[test]
fn toy_pipeline_end_to_end() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("toy.cfg"), "preset = toy\n# two epochs\nseed = 3\n").unwrap();
    let data = p(&dir, "train.wfds");
    let o = waveformer(&["generate", "--pde", "burgers", "--samples", "6", "--seed", "1", "--grid", "32", "--out", &data]);
    assert!(o.status.success(), "{}", stderr(&o));

    let mut csvs = Vec::new();
    for kind in ["waveformer", "wno", "transformer"] {
        let ckpt = train_toy(&dir, &data, kind);
        assert_eq!(std::fs::read(&ckpt).unwrap(), std::fs::read(train_toy(&dir, &data, kind)).unwrap());
        let pred = p(&dir, &format!("{kind}.pred"));
        let o = waveformer(&["predict", "--model-file", &ckpt, "--data", &data, "--steps", "20", "--out", &pred]);
        assert!(o.status.success(), "{}", stderr(&o));
        let csv = p(&dir, &format!("{kind}.csv"));
        let o = waveformer(&["evaluate", "--pred", &pred, "--truth", &data, "--boundary", "8", "--csv", &csv]);
        assert!(o.status.success(), "{}", stderr(&o));
        let text = std::fs::read_to_string(&csv).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "step,model,relative_mse,region");
        assert_eq!(lines.len(), 21);
        assert!(lines[1].starts_with(&format!("0,{kind},")) && lines[1].ends_with(",trained"));
        assert!(lines[9].starts_with(&format!("8,{kind},")) && lines[9].ends_with(",extrapolated"));
        csvs.push(csv);
    }
    let out = p(&dir, "cmp.csv");
    let o = waveformer(&["compare", "--csv", &csvs[0], &csvs[1], &csvs[2], "--out", &out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "region,waveformer,wno,transformer,winner");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("trained,") && lines[2].starts_with("extrapolated,"));

    // Predictions past the end of the truth cannot be scored.
    let long = p(&dir, "long.pred");
    let ckpt = p(&dir, "waveformer.wfck");
    assert!(waveformer(&["predict", "--model-file", &ckpt, "--data", &data, "--steps", "200", "--out", &long]).status.success());
    let o = waveformer(&["evaluate", "--pred", &long, "--truth", &data, "--boundary", "8", "--csv", &p(&dir, "x.csv")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Misaligned"));
}

#[test]
fn selftest_passes() {
    let o = waveformer(&["selftest"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.lines().all(|l| l.starts_with("PASS ")));
    assert!(Path::new(env!("CARGO_BIN_EXE_waveformer")).exists());
}
