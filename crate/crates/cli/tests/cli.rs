use std::path::Path;
use std::process::Command;

use privnav_cli::config::{parse_file, Baseline, Overrides, RunConfig};
use privnav_cli::{exit_code, Fail, EXIT_CONFIG, EXIT_MISSING, EXIT_RUNTIME};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_privnav"))
}

/// Config small enough to run every step in seconds.
const TINY: &str = r#"
desk_scale = true
n_train = 8
n_test = 6
epochs = 1
batch = 4
head_epochs = 2
cipher_batch = 16
eval_chunk = 3
bench_batch = 4
bench_repeats = 1
attack_per_class = 8
"#;

#[test]
fn defaults_and_desk_profile() {
    let full = RunConfig::resolve(None, &Overrides::default()).unwrap();
    assert_eq!(full, RunConfig::paper());
    assert_eq!((full.n_train, full.n_test, full.parties, full.frac_bits), (15_000, 2_250, 2, 16));
    let desk = RunConfig::resolve(
        None,
        &Overrides {
            desk_scale: true,
            ..Overrides::default()
        },
    )
    .unwrap();
    assert_eq!(desk, RunConfig::desk());
    assert_eq!((desk.n_train, desk.n_test), (2_000, 250));
}

#[test]
fn command_line_beats_file_beats_defaults() {
    let file = parse_file("seed = 9\nparties = 3\nepochs = 7\nbaseline = \"map_only\"\n").unwrap();
    let cfg = RunConfig::resolve(Some(&file), &Overrides::default()).unwrap();
    assert_eq!((cfg.seed, cfg.parties, cfg.epochs, cfg.baseline), (9, 3, 7, Baseline::MapOnly));
    let cli = Overrides {
        seed: Some(4),
        parties: Some(5),
        baseline: Some(Baseline::Mpc5),
        desk_scale: false,
        out_dir: Some("elsewhere".into()),
    };
    let cfg = RunConfig::resolve(Some(&file), &cli).unwrap();
    assert_eq!((cfg.seed, cfg.parties, cfg.epochs, cfg.baseline), (4, 5, 7, Baseline::Mpc5));
    assert_eq!(cfg.out_dir, Path::new("elsewhere"));
    // A file asking for the desk profile keeps its explicit keys on top.
    let file = parse_file("desk_scale = true\nn_test = 40\n").unwrap();
    let cfg = RunConfig::resolve(Some(&file), &Overrides::default()).unwrap();
    assert_eq!((cfg.n_train, cfg.n_test, cfg.desk_scale), (2_000, 40, true));
}

#[test]
fn bad_configs_are_rejected() {
    assert!(matches!(parse_file("sede = 3"), Err(Fail::Config(_))));
    assert!(matches!(parse_file("seed = \"three\""), Err(Fail::Config(_))));
    assert!(matches!(parse_file("baseline = \"oracle\""), Err(Fail::Config(_))));
    for text in ["parties = 1", "n_train = 7", "lr = 0.0", "frac_bits = 40", "epochs = 0", "clip_norm = -1.0"] {
        let f = parse_file(text).unwrap();
        assert!(
            matches!(RunConfig::resolve(Some(&f), &Overrides::default()), Err(Fail::Config(_))),
            "{text}"
        );
    }
}

#[test]
fn resolved_config_round_trips_through_toml() {
    for cfg in [RunConfig::paper(), RunConfig::desk()] {
        let back = RunConfig::resolve(Some(&parse_file(&cfg.to_toml()).unwrap()), &Overrides::default()).unwrap();
        assert_eq!(back, cfg);
    }
}

#[test]
fn error_kinds_map_to_exit_codes() {
    assert_eq!(exit_code(&Fail::Config("x".into()).into()), EXIT_CONFIG);
    let missing = Fail::Missing {
        path: "a".into(),
        hint: "b".into(),
    };
    assert_eq!(exit_code(&missing.into()), EXIT_MISSING);
    assert_eq!(exit_code(&anyhow::anyhow!("boom")), EXIT_RUNTIME);
}

#[test]
fn binary_reports_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["eval", "--baseline", "map_only", "--out-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(EXIT_MISSING), "{}", String::from_utf8_lossy(&out.stderr));
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "n_train = 3\n").unwrap();
    let out = bin().args(["gen-data", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_CONFIG));
    let out = bin().args(["gen-data", "--config"]).arg(dir.path().join("absent.toml")).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_CONFIG));
    let out = bin().args(["bench", "--parties", "1", "--out-dir"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(EXIT_CONFIG));
    let out = bin().arg("--version").output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains(env!("CARGO_PKG_VERSION")));
}

fn run_ok(dir: &Path, args: &[&str]) -> String {
    let out = bin()
        .args(args)
        .arg("--config")
        .arg(dir.join("tiny.toml"))
        .arg("--out-dir")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn gen_data_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tiny.toml"), TINY).unwrap();
    run_ok(dir.path(), &["gen-data"]);
    let first: Vec<Vec<u8>> = ["train", "test", "train_det", "test_det"]
        .iter()
        .map(|n| std::fs::read(dir.path().join(format!("out/data/{n}.txt"))).unwrap())
        .collect();
    run_ok(dir.path(), &["gen-data"]);
    for (n, bytes) in ["train", "test", "train_det", "test_det"].iter().zip(&first) {
        assert_eq!(&std::fs::read(dir.path().join(format!("out/data/{n}.txt"))).unwrap(), bytes, "{n}");
    }
}

#[test]
fn tiny_pipeline_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tiny.toml"), TINY).unwrap();
    run_ok(dir.path(), &["gen-data"]);
    run_ok(dir.path(), &["train", "--all-baselines"]);
    let table = run_ok(dir.path(), &["eval", "--all-baselines"]);
    for b in Baseline::ALL {
        assert!(table.contains(b.name()), "{b} missing from\n{table}");
    }
    assert!(run_ok(dir.path(), &["bench"]).contains("p5_slowdown="));
    assert!(run_ok(dir.path(), &["attack"]).contains("share_accuracy="));
    let out = dir.path().join("out");
    for m in ["map_only", "first_person", "first_person_det", "plaintext_cam", "secure"] {
        assert!(out.join(format!("models/{m}.ck")).is_file(), "{m}");
    }
    let reports = out.join("reports");
    for r in ["eval_all.txt", "bench.txt", "attack.txt", "train_secure.txt"] {
        let text = std::fs::read_to_string(reports.join(r)).unwrap();
        assert!(text.starts_with("# privnav "), "{r}");
        assert!(text.contains("# n_train = 8"), "{r}");
    }
    for b in Baseline::ALL {
        for f in [format!("eval_{b}.txt"), format!("histogram_{b}.csv"), format!("rollouts_{b}.txt")] {
            assert!(reports.join(&f).is_file(), "{f}");
        }
        let rollouts = std::fs::read_to_string(reports.join(format!("rollouts_{b}.txt"))).unwrap();
        assert_eq!(rollouts.lines().filter(|l| l.starts_with("seed=")).count(), 6);
    }
    // Evaluation alone is repeatable byte for byte.
    let before = std::fs::read(reports.join("eval_all.txt")).unwrap();
    run_ok(dir.path(), &["eval", "--all-baselines"]);
    assert_eq!(std::fs::read(reports.join("eval_all.txt")).unwrap(), before);
}
