use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn cfe(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cfe"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("CFE_CONFIG")
        .output()
        .expect("run cfe")
}

fn write_config(dir: &TempDir, body: &str) -> String {
    let path = dir.path().join("run.toml");
    fs::write(&path, format!("schema_version = 1\n{body}")).unwrap();
    path.to_str().unwrap().to_string()
}

/// Rows of a CSV file as string cells, header excluded.
fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn default_overlap_suite_passes() {
    let dir = TempDir::new().unwrap();
    let out = cfe(&["overlaps"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(!stdout.contains("FAIL"));
    for row in csv_rows(&dir.path().join("overlaps_projection.csv")) {
        if row[2] == "0" {
            assert_eq!(num(&row[3]), 1.0);
            assert_eq!(num(&row[4]), 0.0);
        }
    }
    assert!(dir.path().join("overlaps.meta.json").exists());
}

#[test]
fn mismatched_potential_is_a_located_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "[lattice]\nm_per_dim = 3\n\n[params]\nu_k = [[1, 0], [1, 0]]\n");
    let out = cfe(&["--config", &cfg, "spectrum"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 6") && err.contains("params.u_k"), "{err}");
}

#[test]
fn unknown_keys_and_iterative_solver_are_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "[basis]\nnmax = 3\n");
    assert_eq!(cfe(&["--config", &cfg, "spectrum"], dir.path()).status.code(), Some(2));
    let cfg = write_config(&dir, "[solver]\nmethod = \"iterative\"\n");
    let out = cfe(&["--config", &cfg, "spectrum"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn oversized_basis_is_refused() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "[lattice]\nm_per_dim = 7\n[basis]\nn_max = 6\n");
    let out = cfe(&["--config", &cfg, "spectrum"], dir.path());
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn weak_spectrum_is_the_ladder() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "[params]\nn_particles = 2\ngamma = 0.5\n[solver]\neigen_count = 6\n");
    let out = cfe(&["--config", &cfg, "spectrum", "--variant", "weak"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let rows = csv_rows(&dir.path().join("spectrum_eigenvalues.csv"));
    assert_eq!(rows.len(), 6);
    // -γN², then one or two quanta on the two k² = 1 coordinates
    let expect = [-2.0, -3.0, -3.0, -4.0, -4.0, -4.0];
    for (r, e) in rows.iter().zip(expect) {
        assert!((num(&r[1]) - e).abs() < 1e-12, "{r:?}");
    }
}

#[test]
fn zero_truncation_gives_a_single_level() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "[basis]\nn_max = 0\n");
    let out = cfe(&["--config", &cfg, "spectrum"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(csv_rows(&dir.path().join("spectrum_eigenvalues.csv")).len(), 1);
    assert_eq!(csv_rows(&dir.path().join("spectrum_ground_vector.csv")).len(), 1);
}

#[test]
fn outputs_are_reproducible_across_runs_and_threads() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for (dir, threads) in [(&a, "1"), (&b, "4")] {
        for cmd in ["overlaps", "spectrum"] {
            assert_eq!(cfe(&["--threads", threads, cmd], dir.path()).status.code(), Some(0));
        }
        assert_eq!(cfe(&["--threads", threads, "--format", "json", "spectrum"], dir.path()).status.code(), Some(0));
    }
    let mut compared = 0;
    for entry in fs::read_dir(a.path()).unwrap() {
        let name = entry.unwrap().file_name();
        if name.to_string_lossy().contains(".meta.") {
            continue;
        }
        let left = fs::read(a.path().join(&name)).unwrap();
        let right = fs::read(b.path().join(&name)).unwrap();
        assert!(left == right, "{name:?} differs");
        compared += 1;
    }
    assert!(compared >= 6);
}

#[test]
fn json_and_csv_carry_the_same_numbers() {
    let dir = TempDir::new().unwrap();
    cfe(&["spectrum"], dir.path());
    cfe(&["--format", "json", "spectrum"], dir.path());
    let doc: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("spectrum.json")).unwrap()).unwrap();
    let rows = csv_rows(&dir.path().join("spectrum_eigenvalues.csv"));
    let json_rows = doc["tables"]["eigenvalues"].as_array().unwrap();
    assert_eq!(rows.len(), json_rows.len());
    for (r, j) in rows.iter().zip(json_rows) {
        assert_eq!(num(&r[1]), j["re"].as_f64().unwrap());
        assert_eq!(num(&r[2]), j["im"].as_f64().unwrap());
    }
    assert_eq!(doc["passed"], serde_json::Value::Bool(true));
}

#[test]
fn constant_potential_series_has_no_first_order_shift() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "[params]\nu0 = 0.4\n[perturb]\nmax_order = 2\n");
    let out = cfe(&["--config", &cfg, "perturb"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let rows = csv_rows(&dir.path().join("perturb_series.csv"));
    assert_eq!(rows.len(), 3);
    assert!(num(&rows[1][1]).abs() < 1e-12 && num(&rows[1][2]).abs() < 1e-12);
}

#[test]
fn scan_reports_conjugate_spectra() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "[params]\nu0 = 0.3\n[scan]\nepsilons = [0.2, 0.7]\n");
    let out = cfe(&["--config", &cfg, "scan"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    for row in csv_rows(&dir.path().join("scan_scan.csv")) {
        assert!(num(&row[5]) < 1e-9);
        assert_eq!(num(&row[6]), 0.0);
    }
}

#[test]
fn compare_rows_follow_the_couplings() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "[params]\nn_particles = 3\n[lattice]\nm_per_dim = 3\n[compare]\ncouplings = [1.0, 0.1]\n");
    let out = cfe(&["--config", &cfg, "compare"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&dir.path().join("compare_comparison.csv"));
    assert_eq!(rows.len(), 2);
    assert!(num(&rows[1][3]) > num(&rows[0][3]));
}

#[test]
fn failed_check_exits_with_one() {
    // a 1e-300 tolerance cannot absorb rounding in the phase-quadrature identity
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "[solver]\ntolerance = 1e-300\n");
    let out = cfe(&["--config", &cfg, "overlaps"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}
