use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const TINY: &str = r#"
[agent]
variant = "ea"
hidden = [8, 8]
batch_size = 16
[rule]
m = 0.0
n = 0.5
[harness]
epochs = 2
eval_episodes = 2
train_days = 8
warmup_steps = 50
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rulebound"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Lines of stdout that name files.
fn printed_paths(o: &Output) -> Vec<PathBuf> {
    stdout(o)
        .lines()
        .filter(|l| l.starts_with('/'))
        .map(PathBuf::from)
        .collect()
}

fn last_error_line(o: &Output) -> serde_json::Value {
    let err = stderr(o);
    let line = err.lines().last().expect("an error line");
    serde_json::from_str(line).unwrap_or_else(|e| panic!("not JSON: {line}: {e}"))
}

#[test]
fn gradcheck_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "gradcheck",
        "--seed",
        "11",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}{}", stdout(&o), stderr(&o));
    assert!(!stdout(&o).contains("FAIL"));
    for p in printed_paths(&o) {
        assert!(p.exists(), "{}", p.display());
    }
}

#[test]
fn train_with_zero_epochs_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.toml",
        &TINY.replace("epochs = 2", "epochs = 0"),
    );
    let out = dir.path().join("out");
    let o = run(&[
        "train",
        "-c",
        cfg.to_str().unwrap(),
        "-o",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let paths = printed_paths(&o);
    assert!(!paths.is_empty());
    for p in &paths {
        assert!(p.exists(), "{}", p.display());
    }
    let metrics = paths.iter().find(|p| p.ends_with("metrics.csv")).unwrap();
    assert_eq!(
        std::fs::read_to_string(metrics).unwrap(),
        "epoch,mean_test_reward,violation_kh,energy_kwh,saturation_frac,actor_loss,critic_loss,wall_ms\n"
    );
}

#[test]
fn train_then_evaluate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", TINY);
    let out = dir.path().join("out");
    let o = run(&[
        "train",
        "-c",
        cfg.to_str().unwrap(),
        "--seed",
        "5",
        "-o",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let ckpt = printed_paths(&o)
        .into_iter()
        .find(|p| p.ends_with("agent.ckpt"))
        .expect("checkpoint printed");
    let eval = |sub: &str| {
        let dest = dir.path().join(sub);
        let o = run(&[
            "evaluate",
            "-c",
            cfg.to_str().unwrap(),
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "-o",
            dest.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        for p in printed_paths(&o) {
            assert!(p.exists());
        }
        stdout(&o).lines().next().unwrap().to_string()
    };
    let a = eval("e1");
    assert!(a.starts_with("reward "), "{a}");
    assert_eq!(a, eval("e2"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let o = run(&["train", "--bogus"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("--bogus"));
    assert_eq!(last_error_line(&o)["error"], "usage");
    let o = run(&[]);
    assert!(!o.status.success());
}

#[test]
fn bad_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", "[rule]\nm = 0.5\nn = 0.25\n");
    let o = run(&[
        "train",
        "-c",
        cfg.to_str().unwrap(),
        "-o",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    let e = last_error_line(&o);
    assert_eq!(e["error"], "config");
    assert!(e["message"].as_str().unwrap().contains("rule.n"), "{e}");

    let cfg = write_config(dir.path(), "d.toml", "[agent]\nbatch = 3\n");
    let o = run(&["train", "-c", cfg.to_str().unwrap()]);
    assert!(last_error_line(&o)["message"]
        .as_str()
        .unwrap()
        .contains("batch"));
}

#[test]
fn missing_checkpoint_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", TINY);
    let o = run(&[
        "evaluate",
        "-c",
        cfg.to_str().unwrap(),
        "--checkpoint",
        dir.path().join("nope.ckpt").to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert_eq!(last_error_line(&o)["error"], "io");
}

#[test]
fn export_weather_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.toml", TINY);
    let file = dir.path().join("w").join("weather.csv");
    let o = run(&[
        "export-weather",
        "-c",
        cfg.to_str().unwrap(),
        "-o",
        file.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let w = rulebound::env::WeatherSeries::read_csv(std::fs::File::open(&file).unwrap()).unwrap();
    assert_eq!(w.step_minutes(), 15);
    assert_eq!(w.len() % 96, 0);

    // The exported file can stand in for the generator.
    let with_file = format!("{TINY}weather_file = \"{}\"\n", file.display());
    let cfg2 = write_config(dir.path(), "f.toml", &with_file);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(run(&[
        "train",
        "-c",
        cfg.to_str().unwrap(),
        "-o",
        a.to_str().unwrap()
    ])
    .status
    .success());
    assert!(run(&[
        "train",
        "-c",
        cfg2.to_str().unwrap(),
        "-o",
        b.to_str().unwrap()
    ])
    .status
    .success());
    let m = |root: &Path| std::fs::read(root.join("ea_0_0.5/seed_0/metrics.csv")).unwrap();
    assert_eq!(m(&a), m(&b));
}

#[test]
fn compare_writes_report_and_curves() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_config(dir.path(), "a.toml", TINY);
    let b = write_config(
        dir.path(),
        "b.toml",
        &TINY.replace("variant = \"ea\"", "variant = \"classical\""),
    );
    let out = dir.path().join("cmp");
    let o = run(&[
        "compare",
        "-c",
        a.to_str().unwrap(),
        "-c",
        b.to_str().unwrap(),
        "--workers",
        "2",
        "-o",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let paths = printed_paths(&o);
    assert_eq!(paths.len(), 3);
    for p in &paths {
        assert!(p.exists());
    }
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("comparison.json")).unwrap())
            .unwrap();
    assert_eq!(report["labels"].as_array().unwrap().len(), 2);
}
