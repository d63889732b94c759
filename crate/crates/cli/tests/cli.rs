use std::path::Path;
use std::process::{Command, Output};

fn bcspec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bcspec")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn data_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().filter(|l| !l.starts_with('#')).skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn out_dir(dir: &Path) -> &str {
    dir.to_str().unwrap()
}

#[test]
fn dirichlet_spectrum_rows() {
    let o = bcspec(&["spectrum", "--family", "dirichlet", "--levels", "3"]);
    assert!(o.status.success());
    let rows = data_rows(&stdout(&o));
    assert_eq!(rows.len(), 3);
    for (k, row) in rows.iter().enumerate() {
        let n = (k + 1) as f64;
        assert_eq!(row[0], (k + 1).to_string());
        let e: f64 = row[1].parse().unwrap();
        assert!((e - n * n * std::f64::consts::PI.powi(2)).abs() < 1e-9 * e);
    }
    assert!(rows[0][1].starts_with("9.8696044010893"));
}

#[test]
fn edge_column_tends_to_minus_one() {
    let o = bcspec(&["edge", "--family", "dirichlet", "--t", "0.4,0.2,0.1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = data_rows(&stdout(&o));
    let col: Vec<f64> = rows.iter().filter(|r| r[1] == "1").map(|r| r[3].parse().unwrap()).collect();
    assert_eq!(col.len(), 3);
    let gaps: Vec<f64> = col.iter().map(|v| (v + 1.0).abs()).collect();
    assert!(gaps[2] < gaps[1] && gaps[1] < gaps[0] && gaps[2] < 0.05, "{col:?}");
}

#[test]
fn delta_circle_is_off_the_manifold() {
    let o = bcspec(&["distance", "--family", "delta_circle", "--a", "1"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["manifold_distance"].as_f64().unwrap() > 0.0);
    assert_eq!(v["meta"]["config"]["family"], "delta_circle");
}

#[test]
fn config_errors_exit_two() {
    let o = bcspec(&["kernel", "--family", "neumann", "--tau", "0.1", "--method", "monte_carlo"]);
    assert_eq!(o.status.code(), Some(2));
    let o = bcspec(&["spectrum", "--family", "nope"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(String::from_utf8_lossy(&o.stderr).lines().count(), 1);
}

#[test]
fn module_errors_exit_three_with_kind() {
    let o = bcspec(&["spectrum", "--matrix", "1,0,1,0,0,0,1,0"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error: NotUnitary"), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "family = \"neumann\"\nlevels = 2\n").unwrap();
    let from_file = data_rows(&stdout(&bcspec(&["spectrum", "--config", cfg.to_str().unwrap()])));
    assert_eq!(from_file.len(), 2);
    assert_eq!(from_file[0][1].parse::<f64>().unwrap(), 0.0);
    let overridden =
        data_rows(&stdout(&bcspec(&["spectrum", "--config", cfg.to_str().unwrap(), "--family", "dirichlet"])));
    assert!(overridden[0][1].starts_with("9.869"));

    std::fs::write(&cfg, "family = \"neumann\"\nbogus = 1\n").unwrap();
    assert_eq!(bcspec(&["spectrum", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn every_artifact_has_a_header() {
    let dir = tempfile::tempdir().unwrap();
    let d = out_dir(dir.path());
    let runs: [&[&str]; 4] = [
        &["spectrum", "--family", "periodic", "--levels", "4", "--out", d],
        &["kernel", "--family", "neumann", "--tau", "0.1", "--grid-n", "9", "--method", "monte_carlo", "--paths", "2000", "--seed", "3", "--out", d],
        &["classical", "--domain", "disk", "--alpha", "rotation", "--turn", "0.5", "--x0", "0,0", "--v0", "1,0.3", "--t-final", "3", "--out", d],
        &["distance", "--family", "periodic", "--out", d],
    ];
    for args in runs {
        let o = bcspec(args);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    for entry in std::fs::read_dir(dir.path()).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        if path.extension().unwrap() == "csv" {
            let head: Vec<&str> = text.lines().take(3).collect();
            assert!(head[0].starts_with("# bcspec 0.1.0 "), "{path:?}");
            assert!(head[1].starts_with("# config: {"), "{path:?}");
            assert!(head[2].starts_with("# seed: "), "{path:?}");
        } else {
            let v: serde_json::Value = serde_json::from_str(&text).unwrap();
            assert_eq!(v["meta"]["tool"], "bcspec", "{path:?}");
            assert!(v["meta"]["config"].is_object());
        }
    }
    let kernel = std::fs::read_to_string(dir.path().join("kernel.csv")).unwrap();
    assert!(kernel.lines().nth(2).unwrap().ends_with('3'));
}

#[test]
fn seeded_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |sub: &str, threads: &str| {
        let out = dir.path().join(sub);
        let o = Command::new(env!("CARGO_BIN_EXE_bcspec"))
            .env("BCSPEC_THREADS", threads)
            .args(["kernel", "--family", "periodic", "--tau", "0.05", "--grid-n", "11", "--method", "mc"])
            .args(["--paths", "5000", "--steps", "8", "--seed", "42", "--out", out.to_str().unwrap()])
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(out.join("kernel.csv")).unwrap()
    };
    let a = run("a", "1");
    let b = run("b", "4");
    assert_eq!(a, b);
}
