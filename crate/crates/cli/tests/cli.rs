use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bwshare(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bwshare"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn bundled() -> String {
    format!("{}/scenarios/table1.json", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn bundled_scenario_shape() {
    let s = bwshare_core::Scenario::load(bundled()).unwrap();
    assert_eq!(s.layout.positions.len(), 441);
    assert_eq!(s.static_users.len(), 6);
    assert_eq!(s.roads.len(), 1);
    assert_eq!(s.roads[0].segment_count, 10);
    assert_eq!(s, bwshare_core::Scenario::table1(0.1));
}

#[test]
fn table1_first_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let res = bwshare(&["table1", "--scenario", &bundled(), "--out", out]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let rows = read_rows(&dir.path().join("table1.csv"));
    assert_eq!(rows.len(), 7);
    assert_eq!(rows[0].len(), 7);
    let row: Vec<f64> = rows[1].iter().map(|x| x.parse().unwrap()).collect();
    assert_eq!(&row[..3], &[1.0, 0.1, 3.1]);
    for (got, want) in row[3..].iter().zip([0.6659, 2.0459, 1.1545, 2.0549]) {
        assert!((got - want).abs() / want < 0.02, "{got} vs {want}");
    }
}

#[test]
fn eval_at_zero_multiplier_starves_static_users() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let res = bwshare(&["eval", "--xi", "0", "--tie", "mobile", "--out", out]);
    assert!(res.status.success());
    let rows = read_rows(&dir.path().join("eval.csv"));
    assert_eq!(rows[0][4], "su_throughput");
    assert_eq!(rows[1][4].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn learn1_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let res = bwshare(&[
            "learn1",
            "--xi",
            "3.1",
            "--slots",
            "200000",
            "--seed",
            "7",
            "--out",
            dir.path().to_str().unwrap(),
        ]);
        assert!(
            res.status.success(),
            "{}",
            String::from_utf8_lossy(&res.stderr)
        );
    }
    for name in [
        "learn1_metrics.csv",
        "learn1_estimates.csv",
        "learn1_summary.csv",
    ] {
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        assert!(!x.is_empty());
        assert_eq!(x, y, "{name} differs");
    }
    let header = read_rows(&a.path().join("learn1_metrics.csv"))[0].join(",");
    assert_eq!(header, "slot,mobile_tput,static_tput,xi,p");
}

#[test]
fn replications_write_one_file_each() {
    let dir = tempfile::tempdir().unwrap();
    let res = bwshare(&[
        "learn3",
        "--xi",
        "2.9",
        "--alpha",
        "0.5",
        "--slots",
        "5000",
        "--reps",
        "3",
        "--fading",
        "two-state",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    for rep in 0..3 {
        assert!(dir
            .path()
            .join(format!("learn3_metrics_rep{rep}.csv"))
            .exists());
    }
    assert_eq!(read_rows(&dir.path().join("learn3_summary.csv")).len(), 4);
}

#[test]
fn infeasible_constraint_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let res = bwshare(&[
        "solve-constrained",
        "--r0",
        "100",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&res.stderr).contains("infeasible"));
}

#[test]
fn solve_constrained_reports_solution() {
    let dir = tempfile::tempdir().unwrap();
    let res = bwshare(&[
        "solve-constrained",
        "--r0",
        "1.95",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(res.status.success());
    let rows = read_rows(&dir.path().join("solve_constrained.csv"));
    assert_eq!(rows[0].join(","), "r0,xi,p,delta,achieved");
    let achieved: f64 = rows[1][4].parse().unwrap();
    assert!((achieved - 1.95).abs() < 1e-9);
}

#[test]
fn invalid_scenario_exits_2_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = bwshare_core::Scenario::table1(0.1);
    s.roads[0].arrival_prob = 1.5;
    let path = dir.path().join("bad.json");
    fs::write(&path, s.to_json_string().unwrap()).unwrap();
    let res = bwshare(&[
        "eval",
        "--scenario",
        path.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("arrival_prob"));

    let mut s = bwshare_core::Scenario::table1(0.1);
    s.roads[0].segment_length = 12.0;
    fs::write(&path, s.to_json_string().unwrap()).unwrap();
    let res = bwshare(&[
        "eval",
        "--scenario",
        path.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("segment_length"));
}

#[test]
fn missing_parameter_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let res = bwshare(&[
        "learn2",
        "--slots",
        "10",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("r0"));
}

#[test]
fn export_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let res = bwshare(&[
        "export-scenario",
        "--theta",
        "0.01",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(res.status.success());
    let s = bwshare_core::Scenario::load(dir.path().join("scenario.json")).unwrap();
    assert_eq!(s, bwshare_core::Scenario::table1(0.01));
}
