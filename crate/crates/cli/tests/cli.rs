use std::path::Path;
use std::process::{Command, Output};

fn seepline(args: &[&str], seed_env: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_seepline"));
    cmd.args(args).env_remove("SEEPLINE_SEED");
    if let Some(s) = seed_env {
        cmd.env("SEEPLINE_SEED", s);
    }
    cmd.output().unwrap()
}

fn ok(out: &Output) {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn synth_then_run_twice_gives_identical_manifests() {
    let dir = tempfile::tempdir().unwrap();
    ok(&seepline(&["--out", p(dir.path()), "synth", "--n", "300", "--missing", "0.05"], Some("4")));
    let data = dir.path().join("data.csv");
    assert!(dir.path().join("data.truth.csv").exists());
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        ok(&seepline(
            &["--out", p(&out), "run", "--input", p(&data), "--preset", "mlp", "--epochs", "2", "--stations", "NO.8,NO.13"],
            Some("4"),
        ));
    }
    let read = |run: &str, f: &str| std::fs::read(dir.path().join(run).join(f)).unwrap();
    assert_eq!(read("a", "manifest.json"), read("b", "manifest.json"));
    assert_eq!(read("a", "checkpoints/NO.8.json"), read("b", "checkpoints/NO.8.json"));
}

#[test]
fn seed_flag_and_env_change_the_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = p(dir.path());
    ok(&seepline(&["--out", out, "synth", "--n", "200", "--file", "a.csv"], Some("1")));
    ok(&seepline(&["--out", out, "synth", "--n", "200", "--file", "b.csv", "--seed", "1"], Some("9")));
    ok(&seepline(&["--out", out, "synth", "--n", "200", "--file", "c.csv"], Some("2")));
    let read = |f: &str| std::fs::read(dir.path().join(f)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_ne!(read("a.csv"), read("c.csv"));
}

#[test]
fn exit_codes_follow_the_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"epochz": 3}"#).unwrap();
    assert_eq!(seepline(&["run", "--config", p(&cfg)], None).status.code(), Some(2));
    assert_eq!(seepline(&["run", "--input", "/nonexistent.csv"], None).status.code(), Some(3));
    assert_eq!(seepline(&["synth", "--n", "10"], None).status.code(), Some(2));
    assert_eq!(seepline(&["bogus"], None).status.code(), Some(2));
    let kind = seepline(&["--out", p(dir.path()), "plot-data", "--kind", "scatter", "--artifact", "/nope"], None);
    assert_eq!(kind.status.code(), Some(3));
}

#[test]
fn plot_and_evaluate_from_run_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = p(dir.path());
    ok(&seepline(&["--out", out, "synth", "--n", "300"], None));
    let run = dir.path().join("run");
    ok(&seepline(
        &["--out", p(&run), "run", "--input", p(&dir.path().join("data.csv")), "--preset", "mlp", "--epochs", "2", "--stations", "NO.8", "--no-wavelet"],
        None,
    ));
    ok(&seepline(&["--out", out, "plot-data", "--kind", "forecast-overlay", "--artifact", p(&run.join("predictions/NO.8.csv"))], None));
    let overlay = std::fs::read_to_string(dir.path().join("plot-forecast-overlay.csv")).unwrap();
    assert!(overlay.starts_with("timestamp,truth,prediction\n"));
    ok(&seepline(&["--out", out, "evaluate", "--predictions", p(&run.join("predictions"))], None));
    let report = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert_eq!(report.lines().count(), 2);
    ok(&seepline(&["--out", out, "plot-data", "--kind", "correlation-heatmap", "--artifact", p(&run.join("imputed.csv"))], None));
    let heat = std::fs::read_to_string(dir.path().join("plot-correlation-heatmap.csv")).unwrap();
    assert_eq!(heat.lines().count(), 9);
}
