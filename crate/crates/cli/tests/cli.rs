use std::path::Path;
use std::process::{Command, Output};

fn gflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gflow"))
        .args(args)
        .env_remove("GFLOW_OUT")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn halfline_run_writes_linear_descent() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = gflow(&["run", "--space", "halfline", "--scheme", "bdf2", "--tau", "0.1", "--t-final", "0.5", "--out", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let path = dir.path().join("trajectory_halfline_bdf2_tau0.1.csv");
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("k,t,u,energy,step_distance\n"));
    let rows = rows(&path);
    assert_eq!(rows.len(), 6);
    for (k, row) in rows.iter().enumerate() {
        let u: f64 = row[2].parse().unwrap();
        assert!((u - (1.0 - 0.1 * k as f64)).abs() < 1e-12, "row {k}: {u}");
        assert_eq!(row[3], row[2], "energy equals u on the half-line");
    }
}

#[test]
fn horizon_shorter_than_step_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = gflow(&["run", "--space", "halfline", "--tau", "0.1", "--t-final", "0.05", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("t_final"));
}

#[test]
fn step_above_admissible_bound_is_rejected() {
    let o = gflow(&["run", "--space", "sphere", "--tau", "0.06"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn unknown_space_is_rejected() {
    let o = gflow(&["run", "--space", "torus"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sphere_rows_stay_on_the_sphere_and_reruns_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let args = ["run", "--space", "sphere", "--scheme", "mm,bdf2", "--tau", "1e-3", "--t-final", "0.1", "--out", out];
    assert!(gflow(&args).status.success());
    let paths = [
        dir.path().join("trajectory_sphere_mm_tau0.001.csv"),
        dir.path().join("trajectory_sphere_bdf2_tau0.001.csv"),
    ];
    let first: Vec<Vec<u8>> = paths.iter().map(|p| std::fs::read(p).unwrap()).collect();
    for path in &paths {
        let rows = rows(path);
        assert_eq!(rows.len(), 101);
        for row in rows {
            let n: f64 = row[2..5].iter().map(|c| c.parse::<f64>().unwrap().powi(2)).sum();
            assert!((n.sqrt() - 1.0).abs() < 1e-12);
        }
    }
    assert!(gflow(&args).status.success());
    let second: Vec<Vec<u8>> = paths.iter().map(|p| std::fs::read(p).unwrap()).collect();
    assert_eq!(first, second);
}

#[test]
fn output_directory_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_gflow"))
        .args(["run", "--space", "halfline", "--tau", "0.5", "--t-final", "1"])
        .env("GFLOW_OUT", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("trajectory_halfline_mm_tau0.5.csv").exists());
}

#[test]
fn config_file_sections_apply_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("gflow.toml");
    std::fs::write(
        &cfg,
        format!(
            "space = \"halfline\"\nscheme = [\"bdf2\"]\nout = {:?}\n\n[halfline]\ntau = [0.25]\nt_final = 1.0\n",
            dir.path().to_str().unwrap()
        ),
    )
    .unwrap();
    let o = gflow(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(rows(&dir.path().join("trajectory_halfline_bdf2_tau0.25.csv")).len(), 5);
    let o = gflow(&["run", "--config", cfg.to_str().unwrap(), "--tau", "0.5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(rows(&dir.path().join("trajectory_halfline_bdf2_tau0.5.csv")).len(), 3);

    std::fs::write(&cfg, "space = \"halfline\"\n[halfline]\nstep = 0.1\n").unwrap();
    assert_eq!(gflow(&["run", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn check_passes_on_computed_trajectories() {
    let o = gflow(&["check", "--space", "sphere", "--scheme", "bdf2", "--tau", "1e-3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = stdout(&o);
    assert!(table.contains("EnergyDim") && table.contains("EVI"));
    assert!(!table.contains("FAIL"));

    let o = gflow(&["check", "--space", "hilbert-rd", "--scheme", "mm", "--tau", "1e-3", "--t-final", "0.01"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("MonotoneEnergy"));
}

#[test]
fn check_flags_a_corrupted_trajectory_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let run = gflow(&["run", "--space", "halfline", "--scheme", "bdf2", "--tau", "0.1", "--t-final", "0.5", "--out", out]);
    assert!(run.status.success());
    let path = dir.path().join("trajectory_halfline_bdf2_tau0.1.csv");
    let file = path.to_str().unwrap();

    let clean = gflow(&["check", "--space", "halfline", "--scheme", "bdf2", "--trajectory", file]);
    assert!(clean.status.success(), "{}{}", stdout(&clean), stderr(&clean));

    // Raise the energy at step 3 above step 2.
    let text = std::fs::read_to_string(&path).unwrap();
    let corrupted: Vec<String> = text
        .lines()
        .map(|l| {
            if l.starts_with("3,") {
                let mut cols: Vec<&str> = l.split(',').collect();
                cols[2] = "0.95";
                cols.join(",")
            } else {
                l.to_string()
            }
        })
        .collect();
    std::fs::write(&path, corrupted.join("\n") + "\n").unwrap();
    let o = gflow(&["check", "--space", "halfline", "--scheme", "bdf2", "--trajectory", file]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    let err = stderr(&o);
    assert!(err.contains("EnergyDim") && err.contains("step 3"), "{err}");
}

#[test]
fn check_reads_mm_files_with_the_monotone_inequality() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert!(gflow(&["run", "--space", "halfline", "--scheme", "mm", "--tau", "0.1", "--t-final", "2", "--out", out]).status.success());
    let file = dir.path().join("trajectory_halfline_mm_tau0.1.csv");
    let o = gflow(&["check", "--space", "halfline", "--scheme", "mm", "--trajectory", file.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("MonotoneEnergy"));

    let both = gflow(&["check", "--space", "halfline", "--scheme", "mm,bdf2", "--trajectory", file.to_str().unwrap()]);
    assert_eq!(both.status.code(), Some(2));
}

#[test]
fn converge_on_the_halfline_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = gflow(&["converge", "--space", "halfline", "--jobs", "2", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("bdf2: slope 0.99"), "{text}");
    for name in ["convergence.csv", "convergence.svg", "diagnostics.csv"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let conv = rows(&dir.path().join("convergence.csv"));
    assert_eq!(conv.len(), 6);
    let diag = std::fs::read_to_string(dir.path().join("diagnostics.csv")).unwrap();
    assert!(!diag.contains("FAIL"));
    let svg = std::fs::read_to_string(dir.path().join("convergence.svg")).unwrap();
    assert!(svg.contains("bdf2 (slope"));
}

#[test]
fn converge_rejects_incommensurate_ladders() {
    let o = gflow(&["converge", "--space", "halfline", "--tau", "1e-2,3e-3,1e-3"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}
