use std::path::Path;
use std::process::{Command, Output};

fn compindex(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_compindex"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn small_fixture(dir: &Path) {
    let out = compindex(&["fixture", "--out", "fx", "--units", "30", "--years", "2"], dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn run_writes_a_manifest_and_exits_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    small_fixture(tmp.path());
    let out = compindex(&["run", "--config", "fx/run.json", "--out", "a"], tmp.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(tmp.path().join("a/manifest.json")).unwrap()).unwrap();
    for name in ["ranking.csv", "index.csv", "sa.csv", "ua.csv", "weights.json"] {
        assert!(manifest["outputs"][name].is_string(), "{name}");
        assert!(tmp.path().join("a").join(name).is_file());
    }
}

#[test]
fn comparing_two_identical_runs_reports_no_movement() {
    let tmp = tempfile::tempdir().unwrap();
    small_fixture(tmp.path());
    for dir in ["a", "b"] {
        let out = compindex(&["run", "--config", "fx/run.json", "--out", dir], tmp.path());
        assert!(out.status.success());
    }
    let out = compindex(&["compare", "a", "b", "--out", "cmp.csv"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let bands: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(bands["within_10"], 100.0);
    let csv = std::fs::read_to_string(tmp.path().join("cmp.csv")).unwrap();
    assert_eq!(csv.lines().count(), 31);
    assert_eq!(
        std::fs::read(tmp.path().join("a/manifest.json")).unwrap(),
        std::fs::read(tmp.path().join("b/manifest.json")).unwrap()
    );
}

#[test]
fn unknown_method_in_config_exits_with_the_config_code() {
    let tmp = tempfile::tempdir().unwrap();
    small_fixture(tmp.path());
    let path = tmp.path().join("fx/run.json");
    let mut cfg: serde_json::Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    cfg["pipeline"]["normalization"] = "rank".into();
    std::fs::write(&path, cfg.to_string()).unwrap();
    let out = compindex(&["run", "--config", "fx/run.json", "--out", "a"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!tmp.path().join("a").exists());
}

#[test]
fn missing_baseline_year_exits_with_the_config_code() {
    let tmp = tempfile::tempdir().unwrap();
    small_fixture(tmp.path());
    for step in [
        &[
            "impute",
            "--data",
            "fx/data.csv",
            "--hierarchy",
            "fx/hierarchy.json",
            "--out",
            "imputed.csv",
        ][..],
        &["treat", "--data", "imputed.csv", "--out", "treated.csv"],
    ] {
        assert!(compindex(step, tmp.path()).status.success(), "{step:?}");
    }
    let out = compindex(
        &[
            "normalize",
            "--data",
            "treated.csv",
            "--population",
            "fx/population.csv",
            "--hierarchy",
            "fx/hierarchy.json",
            "--baseline-year",
            "1990",
            "--out",
            "z.csv",
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_values_exit_with_the_data_code() {
    let tmp = tempfile::tempdir().unwrap();
    small_fixture(tmp.path());
    let path = tmp.path().join("fx/data.csv");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let cells: Vec<&str> = lines[1].split(',').collect();
    lines[1] = format!("{},{},{},not-a-number", cells[0], cells[1], cells[2]);
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();
    let out = compindex(
        &[
            "impute",
            "--data",
            "fx/data.csv",
            "--hierarchy",
            "fx/hierarchy.json",
            "--out",
            "imputed.csv",
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
}

#[test]
fn staged_commands_chain() {
    let tmp = tempfile::tempdir().unwrap();
    small_fixture(tmp.path());
    let steps: &[&[&str]] = &[
        &[
            "impute",
            "--data",
            "fx/data.csv",
            "--hierarchy",
            "fx/hierarchy.json",
            "--out",
            "imputed.csv",
        ],
        &[
            "treat",
            "--data",
            "imputed.csv",
            "--mode",
            "ons",
            "--out",
            "treated.csv",
            "--plan",
            "plan.json",
        ],
        &[
            "normalize",
            "--data",
            "treated.csv",
            "--population",
            "fx/population.csv",
            "--hierarchy",
            "fx/hierarchy.json",
            "--baseline-year",
            "2015",
            "--out",
            "z.csv",
        ],
        &[
            "weights",
            "--method",
            "pca",
            "--data",
            "z.csv",
            "--hierarchy",
            "fx/hierarchy.json",
            "--out",
            "w.json",
        ],
        &[
            "aggregate",
            "--data",
            "z.csv",
            "--weights",
            "w.json",
            "--hierarchy",
            "fx/hierarchy.json",
            "--population",
            "fx/population.csv",
            "--out",
            "index.csv",
        ],
    ];
    for step in steps {
        let out = compindex(step, tmp.path());
        assert!(
            out.status.success(),
            "{step:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let index = std::fs::read_to_string(tmp.path().join("index.csv")).unwrap();
    assert!(index
        .lines()
        .next()
        .unwrap()
        .starts_with("geo,area,level,node,year,score"));
}
