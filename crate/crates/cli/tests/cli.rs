use std::path::Path;
use std::process::{Command, Output};

fn zsr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zsr"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn small_run(out: &Path, extra: &[&str]) -> Output {
    let out = out.to_str().unwrap();
    let mut args = vec![
        "run",
        "--synthetic",
        "poly2",
        "--rows",
        "200",
        "--population-size",
        "40",
        "--max-generations",
        "5",
        "--seed",
        "3",
        "--out-dir",
        out,
    ];
    args.extend_from_slice(extra);
    zsr(&args)
}

/// CSV text with the trailing elapsed_ms column removed.
fn without_timing(path: &Path) -> String {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.rsplit_once(',').unwrap().0.to_owned())
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn run_writes_every_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = small_run(dir.path(), &["--local-search-iterations", "0,2"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("saved_effort="));
    for ls in ["0", "2"] {
        for arm in ["cached", "uncached"] {
            let g = dir
                .path()
                .join(format!("generations_ls{ls}_{arm}_seed3.csv"));
            let text = std::fs::read_to_string(&g).unwrap();
            assert!(text.starts_with(
                "generation,evaluations_total,evaluations_cached,cache_size,avg_fitness,avg_length,best_error,front_size,elapsed_ms\n"
            ));
            assert_eq!(text.lines().count(), 7);
            assert!(dir
                .path()
                .join(format!("front_ls{ls}_{arm}_seed3.json"))
                .exists());
        }
        assert!(dir
            .path()
            .join(format!("cache_ls{ls}_cached_seed3.csv"))
            .exists());
        assert!(!dir
            .path()
            .join(format!("cache_ls{ls}_uncached_seed3.csv"))
            .exists());
    }
    let summary = std::fs::read_to_string(dir.path().join("summary.jsonl")).unwrap();
    assert_eq!(summary.lines().count(), 6);
    assert!(summary.contains("\"record\":\"paired\""));
}

#[test]
fn single_threaded_outputs_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(small_run(a.path(), &[]).status.success());
    assert!(small_run(b.path(), &[]).status.success());
    for name in [
        "generations_ls10_cached_seed3.csv",
        "generations_ls10_uncached_seed3.csv",
    ] {
        assert_eq!(
            without_timing(&a.path().join(name)),
            without_timing(&b.path().join(name))
        );
    }
    let c = |d: &Path| std::fs::read(d.join("cache_ls10_cached_seed3.csv")).unwrap();
    assert_eq!(c(a.path()), c(b.path()));
}

#[test]
fn csv_dataset_and_single_arm() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("data.csv");
    let mut text = String::from("a,b,y\n");
    for i in 0..40 {
        let (a, b) = (i as f64 * 0.1, (i % 7) as f64);
        text.push_str(&format!("{a},{b},{}\n", a * b + 1.0));
    }
    std::fs::write(&csv, text).unwrap();
    let out_dir = dir.path().join("out");
    let out = zsr(&[
        "run",
        "--dataset",
        csv.to_str().unwrap(),
        "--target",
        "y",
        "--train-fraction",
        "0.75",
        "--population-size",
        "20",
        "--max-generations",
        "2",
        "--use-cache",
        "false",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("30 train / 10 test"), "{stdout}");
    assert!(!stdout.contains("saved_effort"));
    assert!(out_dir.join("generations_ls10_uncached_seed0.csv").exists());
}

#[test]
fn missing_target_fails_with_column_list() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("data.csv");
    std::fs::write(&csv, "a,b\n1,2\n3,4\n5,6\n").unwrap();
    let out = zsr(&[
        "run",
        "--dataset",
        csv.to_str().unwrap(),
        "--target",
        "y",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains('a') && err.contains('b') && err.contains('y'),
        "{err}"
    );
}

#[test]
fn bad_flags_fail() {
    let dir = tempfile::tempdir().unwrap();
    assert!(!small_run(dir.path(), &["--crossover-probability", "2"])
        .status
        .success());
    assert!(!zsr(&[
        "run",
        "--synthetic",
        "nope",
        "--out-dir",
        dir.path().to_str().unwrap()
    ])
    .status
    .success());
    assert!(!zsr(&["run"]).status.success());
}

#[test]
fn tournament_loss_table() {
    let out = zsr(&[
        "tournament-loss",
        "--tournament-sizes",
        "1,2",
        "--trials",
        "200",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "tournament_size,loss");
    let v: f64 = rows[1].split(',').nth(1).unwrap().parse().unwrap();
    assert!((v - 0.368).abs() < 0.02);
    assert!(!zsr(&["tournament-loss", "--population-size", "1"])
        .status
        .success());
}
