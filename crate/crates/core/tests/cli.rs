use std::fs;
use std::path::Path;
use std::process::Command;

use tempfile::tempdir;

const BIN: &str = env!("CARGO_BIN_EXE_potts-diffusion");

const SMALL: &str = "\
# small two-product run
grid.width = 40
grid.height = 30
network.p_r = 0.02
run.seed = 17
";

fn potts(args: &[&str]) -> std::process::Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.cfg");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let tmp = tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for (dir, threads) in [(&a, "1"), (&b, "4")] {
        let out = potts(&["--threads", threads, "run", "--config", &cfg, "--out", dir.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["timeseries.csv", "landscape.txt", "summary.txt", "config.txt"] {
        assert_eq!(read(&a, name), read(&b, name), "{name}");
    }
}

#[test]
fn seed_flag_changes_the_run_and_is_echoed() {
    let tmp = tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let dir = tmp.path().join("s");
    let out = potts(&["run", "--config", &cfg, "--seed", "99", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success());
    let summary = String::from_utf8(read(&dir, "summary.txt")).unwrap();
    assert!(summary.lines().any(|l| l == "seed = 99"));
    assert!(summary.lines().any(|l| l == "config.run.seed = 99"));
}

#[test]
fn network_dump_lists_every_edge() {
    let tmp = tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let dir = tmp.path().join("n");
    let out = potts(&["run", "--config", &cfg, "--out", dir.to_str().unwrap(), "--dump-network"]);
    assert!(out.status.success());
    let text = String::from_utf8(read(&dir, "network.txt")).unwrap();
    let mut lines = text.lines();
    // 40x30 Moore lattice: 4wh - 3(w + h) + 2 edges
    let edges = 4 * 40 * 30 - 3 * 70 + 2;
    assert_eq!(lines.next().unwrap(), format!("# nodes=1200 edges={edges} seed=17 p_r=0.02"));
    let rows: Vec<(u32, u32)> = lines
        .map(|l| {
            let (a, b) = l.split_once(' ').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), edges);
    assert!(rows.iter().all(|(a, b)| a < b));
}

#[test]
fn sweep_writes_one_row_per_value() {
    let tmp = tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let dir = tmp.path().join("sweep");
    let out = potts(&[
        "sweep",
        "--config",
        &cfg,
        "--param",
        "innovators.B.rate",
        "--values",
        "5,10,20,30",
        "--runs",
        "3",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(read(&dir, "sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[0].starts_with("param,value,runs,saturated_runs,mean_saturation_tick,n_A_mean,n_A_sd"));
    for (line, v) in lines[1..].iter().zip(["5", "10", "20", "30"]) {
        assert!(line.starts_with(&format!("innovators.B.rate,{v},3,")), "{line}");
    }
    for i in 0..4 {
        assert!(dir.join(format!("value_{i}")).join("aggregate.csv").exists());
    }
}

#[test]
fn replicate_writes_aggregates() {
    let tmp = tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let dir = tmp.path().join("rep");
    let out = potts(&["replicate", "--config", &cfg, "--runs", "4", "--out", dir.to_str().unwrap()]);
    assert!(out.status.success());
    let runs = String::from_utf8(read(&dir, "runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 5);
    let seeds: Vec<&str> = runs.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(seeds, ["17", "18", "19", "20"]);
    let agg = String::from_utf8(read(&dir, "aggregate.csv")).unwrap();
    assert!(agg.starts_with("tick,n_A_mean,n_A_sd,n_B_mean,n_B_sd,n_0_mean,n_0_sd\n"));
}

#[test]
fn preset_accepts_overrides() {
    let tmp = tempdir().unwrap();
    let dir = tmp.path().join("fig5");
    let out = potts(&[
        "preset",
        "--name",
        "fig5",
        "--set",
        "grid.width=30",
        "--set",
        "grid.height=30",
        "--set",
        "decision.temperature=0.05",
        "--runs",
        "1",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(read(&dir, "timeseries.csv")).unwrap();
    assert!(csv.starts_with("tick,n_A,n_B,n_AB,n_0\n"));
    let summary = String::from_utf8(read(&dir, "summary.txt")).unwrap();
    assert!(summary.contains("config.decision.temperature = 0.05"));
    assert!(summary.contains("config.grid.width = 30"));
}

#[test]
fn exit_codes() {
    let tmp = tempdir().unwrap();
    let out_dir = tmp.path().join("x");
    let out_dir = out_dir.to_str().unwrap();

    assert_eq!(potts(&["--help"]).status.code(), Some(0));
    assert_eq!(potts(&["--version"]).status.code(), Some(0));
    assert_eq!(potts(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(potts(&["run"]).status.code(), Some(1));

    let bad = write_config(tmp.path(), "network.p_r = 2\n");
    let out = potts(&["run", "--config", &bad, "--out", out_dir]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("network.p_r"));

    let missing = tmp.path().join("nope.cfg");
    assert_eq!(
        potts(&["run", "--config", missing.to_str().unwrap(), "--out", out_dir]).status.code(),
        Some(1)
    );
    assert_eq!(potts(&["preset", "--name", "fig9", "--out", out_dir]).status.code(), Some(1));

    // output path blocked by a regular file
    let blocker = tmp.path().join("blocker");
    fs::write(&blocker, "").unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let target = blocker.join("out");
    assert_eq!(
        potts(&["run", "--config", &cfg, "--out", target.to_str().unwrap()]).status.code(),
        Some(2)
    );
}
