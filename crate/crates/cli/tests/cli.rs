use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, stage: &str, config: &str, extra: &[&str]) -> Output {
    let path = dir.join("run.conf");
    fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_tzitzeica"))
        .arg(stage)
        .arg("--config")
        .arg(&path)
        .args(extra)
        .output()
        .unwrap()
}

fn last_line(text: &str) -> &str {
    text.lines().last().unwrap_or("")
}

fn stderr_tail(o: &Output) -> String {
    last_line(&String::from_utf8_lossy(&o.stderr)).to_string()
}

fn log_tail(dir: &Path, stage: &str) -> String {
    last_line(&fs::read_to_string(dir.join("out").join(format!("{stage}.log"))).unwrap()).to_string()
}

#[test]
fn zero_seed_solve_writes_a_field_of_zeros() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), "solve", "nx = 16\nny = 16\nseed = zero\n", &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("out/field.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "16,16,1.0000000000000000e0,1.0000000000000000e0");
    assert_eq!(lines.filter(|l| l.parse::<f64>().unwrap() == 0.0).count(), 256);
    let log = fs::read_to_string(dir.path().join("out/solve.log")).unwrap();
    assert!(log.contains("residual_0=0.0000000000000000e0"));
    assert_eq!(last_line(&log), "status=ok");
}

#[test]
fn flat_report_has_the_closed_form_invariants() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), "report", "nx = 96\nny = 96\nlx = 0.5\nly = 0.5\n", &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/report.json")).unwrap()).unwrap();
    let f = |k: &str| r[k].as_f64().unwrap();
    for k in ["k_min", "k_max", "q_min", "q_max"] {
        assert!((f(k) - 2.0).abs() < 1e-6, "{k} = {}", f(k));
    }
    assert!(f("minimality_h") < 1e-8, "{}", f("minimality_h"));
    for v in r.as_object().unwrap().values() {
        assert!(v.is_number());
    }
}

#[test]
fn exported_obj_loads_in_a_mesh_reader() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), "export", "nx = 16\nny = 16\nprojection = x1_re,x2_re,x3_re\n", &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    let (models, _) = tobj::load_obj(out.join("surface.obj"), &tobj::LoadOptions::default()).unwrap();
    let mesh = &models[0].mesh;
    assert_eq!(mesh.positions.len(), 3 * 17 * 17);
    assert_eq!(mesh.indices.len(), 3 * 2 * 16 * 16);
    assert!(mesh.indices.iter().all(|i| (*i as usize) < 17 * 17));
    // first vertex is N(0, 0) = e₃, projected onto (x1_re, x2_re, x3_re)
    assert_eq!(&mesh.positions[..3], &[0.0, 0.0, 1.0]);

    assert!(!out.join("mesh.csv").exists());
    let ply = fs::read_to_string(out.join("surface.ply")).unwrap();
    assert!(ply.starts_with("ply\nformat ascii 1.0\n") && ply.contains("element vertex 289\n") && ply.contains("element face 512\n"));
    let side: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("surface.projection.json")).unwrap()).unwrap();
    assert_eq!(side["projection"], "x1_re,x2_re,x3_re");
}

#[test]
fn surface_stage_writes_six_coordinates_per_node() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), "surface", "nx = 8\nny = 8\nradius = 2\n", &[]);
    assert!(o.status.success());
    let text = fs::read_to_string(dir.path().join("out/mesh.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "x1_re,x1_im,x2_re,x2_im,x3_re,x3_im");
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 81);
    for r in rows {
        assert_eq!(r.len(), 6);
        assert!((r.iter().map(|v| v * v).sum::<f64>().sqrt() - 2.0).abs() < 1e-8);
    }
}

#[test]
fn wave_seed_pipeline_solves_and_reports() {
    let dir = tempfile::tempdir().unwrap();
    let conf = "nx = 32\nny = 8\nly = 1.5\nseed = wave 6.1\nwave_periods = 1\ntheta = 0.5\n";
    let o = run(dir.path(), "report", conf, &[]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let solve = fs::read_to_string(dir.path().join("out/report.log")).unwrap();
    assert!(solve.contains("wrote=wave.csv") && solve.contains("wrote=field.csv") && solve.contains("wrote=frame.csv"));
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/report.json")).unwrap()).unwrap();
    assert!(r["pde_residual"].as_f64().unwrap() < 1e-10);
    assert!(r["normality_defect"].as_f64().unwrap() < 1e-8);
}

#[test]
fn out_flag_overrides_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let other = dir.path().join("elsewhere");
    let o = run(dir.path(), "solve", "nx = 8\nny = 8\nout = ignored\n", &["--out", other.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(other.join("field.csv").is_file());
    assert!(!dir.path().join("ignored").exists());
}

#[test]
fn parse_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(dir.path(), "solve", "nx 64\n", &["--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_tail(&o), "error=parse");
    assert_eq!(log_tail(dir.path(), "solve"), "error=parse");

    let o = run(dir.path(), "draw", "nx = 8\n", &[]);
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_tzitzeica")).arg("solve").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validation_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    for conf in ["radius = 0\n", "nx = 4\n", "seed = file missing.csv\n"] {
        let o = run(dir.path(), "frame", conf, &[]);
        assert_eq!(o.status.code(), Some(3), "{conf}");
    }
    let o = run(dir.path(), "wave", "nx = 8\nny = 8\n", &[]);
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(log_tail(dir.path(), "wave"), "error=validation");
}

#[test]
fn numerical_failures_exit_four_with_their_name() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), "wave", "seed = wave 5.5\n", &[]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(stderr_tail(&o), "error=domain");
    assert_eq!(log_tail(dir.path(), "wave"), "error=domain");

    let o = run(dir.path(), "frame", "nx = 8\nny = 8\nlx = 24\nly = 24\nsubsteps = 1\n", &[]);
    assert_eq!(o.status.code(), Some(4));
    assert_eq!(log_tail(dir.path(), "frame"), "error=unitarity-blowup");
}

#[test]
fn repeated_runs_are_bit_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let conf = "nx = 32\nny = 32\ntheta = 0.3\n";
    for d in [&a, &b] {
        assert!(run(d.path(), "export", conf, &[]).status.success());
        assert!(run(d.path(), "report", conf, &[]).status.success());
    }
    for f in ["field.csv", "frame.csv", "report.json", "surface.obj", "surface.ply", "surface.projection.json"] {
        assert_eq!(fs::read(a.path().join("out").join(f)).unwrap(), fs::read(b.path().join("out").join(f)).unwrap(), "{f}");
    }
}
