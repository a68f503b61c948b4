//! End-to-end checks of the `tmcopt` binary: artifacts, exit codes and
//! configuration errors.

use std::path::Path;
use std::process::{Command, Output};

use tmcopt::export::parse_vtk;

fn tmcopt(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tmcopt"))
        .args(args)
        .current_dir(cwd)
        .env_remove("TMCOPT_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect()
}

#[test]
fn default_cshape_writes_full_history_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "");
    let out = dir.path().join("out");
    let o = tmcopt(
        &["cshape", "--config", &cfg, "--out", out.to_str().unwrap(), "--snapshots", "0.2,0.5,1.0"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let header = std::fs::read_to_string(out.join("cshape_history.csv")).unwrap();
    assert!(header.starts_with("increment,Lambda,gap,u_c,iterations\n"));
    let rows = csv_rows(&out.join("cshape_history.csv"));
    assert_eq!(rows.len(), 200);
    assert_eq!(rows[199][1].parse::<f64>().unwrap(), 1.0);
    for lam in ["0.200", "0.500", "1.000"] {
        let text = std::fs::read_to_string(out.join(format!("cshape_L{lam}.vtk"))).unwrap();
        let d = parse_vtk(&text).unwrap();
        assert_eq!(d.cells.len(), 62 * 30);
        let rel = d.cell_scalar("sed_rel").unwrap();
        assert!((rel.iter().copied().fold(0.0, f64::max) - 1.0).abs() < 1e-8);
        assert!(d.cell_scalar("sed").is_some() && d.cell_scalar("sed_log_rel").is_some());
    }
}

#[test]
fn env_var_sets_default_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "nelx = 31\nnely = 15\nnIncr = 10\nlambdaMax = 0.5\n");
    let target = dir.path().join("from_env");
    let o = Command::new(env!("CARGO_BIN_EXE_tmcopt"))
        .args(["cshape", "--config", &cfg])
        .current_dir(dir.path())
        .env("TMCOPT_OUT_DIR", &target)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(csv_rows(&target.join("cshape_history.csv")).len(), 10);
}

#[test]
fn incompressible_material_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "E0 = 100.0\nnu = 0.5\n");
    let o = tmcopt(&["cshape", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("incompressible") && err.contains("line 2"), "{err}");
}

#[test]
fn negative_element_count_and_unknown_keys_rejected() {
    let dir = tempfile::tempdir().unwrap();
    for text in ["nelx = -1\n", "nelx = 10\nfoo = 3\n"] {
        let cfg = write(dir.path(), "c.toml", text);
        let o = tmcopt(&["cshape", "--config", &cfg], dir.path());
        assert_eq!(o.status.code(), Some(1), "{text}");
    }
    let cfg = write(dir.path(), "t.toml", "nelx = -1\n");
    let o = tmcopt(&["top", "--config", &cfg, "--variant", "contact"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bad_command_line_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "t.toml", "");
    let o = tmcopt(&["top", "--config", &cfg, "--variant", "elastic"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let o = tmcopt(&["cshape", "--config", &cfg, "--snapshots", "0.5,2"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let o = tmcopt(&["cshape", "--config", "missing.toml"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn solver_failure_exits_2_with_partial_history() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "maxIter = 1\n");
    let out = dir.path().join("out");
    let o = tmcopt(&["cshape", "--config", &cfg, "--out", out.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let rows = csv_rows(&out.join("cshape_history.csv"));
    assert!(rows.len() < 200);
}

#[test]
fn design_run_writes_trace_and_bounded_densities() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "t.toml", "nelx = 16\nnely = 16\nmaxOuterIter = 4\n");
    let out = dir.path().join("out");
    let o = tmcopt(
        &["top", "--config", &cfg, "--variant", "contact", "--out", out.to_str().unwrap(), "--workers", "2"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    let trace_text = std::fs::read_to_string(out.join("top_contact_trace.csv")).unwrap();
    assert!(trace_text.starts_with("iter,c,g,beta,change,"));
    let rows = csv_rows(&out.join("top_contact_trace.csv"));
    assert_eq!(rows.len(), 4);
    let last_c: f64 = rows[3][1].parse().unwrap();
    assert!(stdout.contains(&format!("final c = {last_c:.6e}")), "{stdout}");
    let d = parse_vtk(&std::fs::read_to_string(out.join("top_contact_final.vtk")).unwrap()).unwrap();
    for name in ["density", "density_dilated"] {
        assert!(d.cell_scalar(name).unwrap().iter().all(|v| (0.0..=1.0).contains(v)), "{name}");
    }
}

#[test]
fn worker_count_does_not_change_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "nelx = 31\nnely = 15\nnIncr = 40\n");
    let mut texts = Vec::new();
    for w in ["1", "3"] {
        let out = dir.path().join(format!("w{w}"));
        let o = tmcopt(
            &["cshape", "--config", &cfg, "--out", out.to_str().unwrap(), "--workers", w],
            dir.path(),
        );
        assert_eq!(o.status.code(), Some(0));
        texts.push(std::fs::read(out.join("cshape_history.csv")).unwrap());
    }
    assert_eq!(texts[0], texts[1]);
}
