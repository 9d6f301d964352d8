use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::Command as Proc;

use maxsurf::loops::{classify_loop, LoopClass};
use maxsurf_cli::config::MeshKind;
use maxsurf_cli::files::{loop_file, parse_loop_file, parse_surface_file, surface_file, to_json, LoopFile, SHADOW_LABEL};
use maxsurf_cli::run::FAILURE_MARKER;
use maxsurf_cli::{run, CliError, Command, Format, JobConfig};
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Proc {
    Proc::new(env!("CARGO_BIN_EXE_maxsurf"))
}

fn write_loop(dir: &Path, name: &str, n: usize, m: usize, f: impl Fn(f64) -> Vec<f64>) -> PathBuf {
    let lf = LoopFile {
        version: 1,
        n,
        samples: (0..m).map(|j| f(2.0 * PI * j as f64 / m as f64)).collect(),
    };
    let p = dir.join(name);
    std::fs::write(&p, to_json(&lf)).unwrap();
    p
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn finite(out: &Path, rings: usize) -> JobConfig {
    let mut c = JobConfig::new(Command::SolveFinite);
    c.out = Some(out.to_path_buf());
    c.mesh_r = Some(rings);
    c.mesh_theta = 64;
    c
}

#[test]
fn constant_loop_file_is_positive() {
    let d = TempDir::new().unwrap();
    let p = write_loop(d.path(), "c.json", 2, 64, |_| vec![0.0, 0.6, 0.8]);
    let l = parse_loop_file(&p).unwrap();
    assert_eq!((l.m(), l.n()), (64, 2));
    assert_eq!(classify_loop(&l).class, LoopClass::Positive);
}

#[test]
fn non_unit_sample_is_named() {
    let d = TempDir::new().unwrap();
    let p = write_loop(d.path(), "bad.json", 2, 16, |t| {
        if (t - 2.0 * PI * 5.0 / 16.0).abs() < 1e-12 {
            vec![1.0, 0.1, 0.0]
        } else {
            vec![1.0, 0.0, 0.0]
        }
    });
    let e = parse_loop_file(&p).unwrap_err();
    assert!(e.to_string().contains("sample 5"), "{e}");
    assert_eq!(e.exit_code(), 5);
}

#[test]
fn schema_mismatch_is_rejected() {
    let d = TempDir::new().unwrap();
    let p = d.path().join("v2.json");
    std::fs::write(&p, r#"{"version": 2, "n": 1, "samples": [[1, 0], [0, 1], [-1, 0]]}"#).unwrap();
    assert!(parse_loop_file(&p).unwrap_err().to_string().contains("unsupported version"));
    std::fs::write(&p, r#"{"version": 1, "n": 1, "points": []}"#).unwrap();
    assert!(parse_loop_file(&p).unwrap_err().to_string().contains("schema mismatch"));
}

#[test]
fn loop_file_round_trips_exactly() {
    let d = TempDir::new().unwrap();
    let p = write_loop(d.path(), "w.json", 2, 37, |t| {
        let v = [t.cos(), 0.3 * (3.0 * t).sin(), 0.7];
        let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        v.iter().map(|x| x / r).collect()
    });
    let l = parse_loop_file(&p).unwrap();
    let q = d.path().join("again.json");
    std::fs::write(&q, to_json(&loop_file(&l))).unwrap();
    let l2 = parse_loop_file(&q).unwrap();
    assert_eq!(l.samples(), l2.samples());
}

#[test]
fn photon_check_loop_exits_nonzero() {
    let d = TempDir::new().unwrap();
    let p = write_loop(d.path(), "photon.json", 1, 32, |t| vec![t.cos(), t.sin()]);
    assert_eq!(classify_loop(&parse_loop_file(&p).unwrap()).class, LoopClass::Photon);
    let out = bin().args(["check-loop", "--input"]).arg(&p).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["class"], "Photon");
}

#[test]
fn planar_fixture_solves_exactly() {
    let d = TempDir::new().unwrap();
    let o = run(&finite(d.path(), 8)).unwrap();
    assert!(o.passed);
    let rep = read_json(&d.path().join("report.json"));
    assert!(rep["solve"]["final_residual"].as_f64().unwrap() < 1e-12);
    assert_eq!(rep["converged"], true);
    assert!(!d.path().join(FAILURE_MARKER).exists());
}

#[test]
fn verify_of_two_meshes_of_one_boundary_passes() {
    let d = TempDir::new().unwrap();
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    // The Hausdorff check needs both meshes fine enough; at 8 vs 11 rings the gap is ~3e-4.
    for (dir, rings) in [(&a, 20), (&b, 27)] {
        let st = bin()
            .args(["solve-finite", "--mesh-theta", "128", "--tilt", "0.03", "--mesh-r", &rings.to_string(), "--out"])
            .arg(dir)
            .status()
            .unwrap();
        assert!(st.success());
    }
    let out = bin()
        .args(["verify", "--check", "uniqueness", "--check", "mean_curvature", "--check", "acausality", "--input"])
        .arg(a.join("surface.json"))
        .arg("--input")
        .arg(b.join("surface.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let sup = v["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "uniqueness_sup_b")
        .unwrap();
    assert!(sup["value"].as_f64().unwrap() <= -1.0 + 1e-5);
}

#[test]
fn grid_solve_passes_every_check_on_the_compact_set() {
    let d = TempDir::new().unwrap();
    let mut c = finite(d.path(), 8);
    c.mesh_kind = MeshKind::Grid;
    c.tilt = 0.1;
    assert!(run(&c).unwrap().passed);
    let mut v = JobConfig::new(Command::Verify);
    v.inputs = vec![d.path().join("surface.json")];
    v.compact_radius = Some(0.45);
    let o = run(&v).unwrap();
    assert!(o.passed, "{}", o.stdout);
}

#[test]
fn export_and_import_are_bit_exact() {
    let d = TempDir::new().unwrap();
    let mut c = finite(d.path(), 6);
    c.tilt = 0.1;
    run(&c).unwrap();
    let p = d.path().join("surface.json");
    let s = parse_surface_file(&p).unwrap();
    let text = std::fs::read_to_string(&p).unwrap();
    assert_eq!(to_json(&surface_file(&s)), text);
    let mut e = JobConfig::new(Command::ExportMesh);
    e.inputs = vec![p.clone()];
    let o = run(&e).unwrap();
    assert_eq!(o.stdout, text);
    let s2 = parse_surface_file(&p).unwrap();
    for (a, b) in s.fibers().iter().zip(s2.fibers()) {
        assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}

#[test]
fn obj_shadow_is_labeled() {
    let d = TempDir::new().unwrap();
    run(&finite(d.path(), 4)).unwrap();
    let mut e = JobConfig::new(Command::ExportMesh);
    e.inputs = vec![d.path().join("surface.json")];
    e.format = Format::ObjShadow;
    let o = run(&e).unwrap();
    assert!(o.stdout.starts_with(&format!("# {SHADOW_LABEL}\n")));
    assert!(o.stdout.lines().any(|l| l.starts_with("f ")));
}

#[test]
fn identical_jobs_give_identical_reports() {
    let d = TempDir::new().unwrap();
    let (a, b) = (d.path().join("a"), d.path().join("b"));
    for dir in [&a, &b] {
        let mut c = finite(dir, 6);
        c.tilt = 0.08;
        c.tilt_k = 3;
        run(&c).unwrap();
    }
    for f in ["report.json", "surface.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn asymptotic_run_flushes_stages_and_plots() {
    let d = TempDir::new().unwrap();
    let lp = write_loop(d.path(), "l.json", 2, 48, |t| {
        let v = [t.cos(), t.sin(), 0.8];
        let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        v.iter().map(|x| x / r).collect()
    });
    let out = d.path().join("asym");
    let mut c = JobConfig::new(Command::SolveAsymptotic);
    c.inputs = vec![lp];
    c.out = Some(out.clone());
    c.rho_schedule = vec![2.0, 2.5];
    assert!(run(&c).unwrap().passed);
    for f in ["stage-0.json", "stage-1.json", "surface-stage-1.json", "surface.json", "report.json"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let rep = read_json(&out.join("report.json"));
    assert_eq!(rep["stages"].as_array().unwrap().len(), 2);
    let mut p = JobConfig::new(Command::PlotData);
    p.inputs = vec![out.join("report.json")];
    let o = run(&p).unwrap();
    assert!(o.stdout.starts_with("rho\tstabilization"));
    assert!(o.stdout.contains("rho\titeration\tarea\tresidual\tmargin"));
}

#[test]
fn failures_leave_a_marker_and_distinct_codes() {
    let d = TempDir::new().unwrap();
    // A semi-positive loop: the asymptotic solver refuses it.
    let lp = write_loop(d.path(), "semi.json", 1, 48, |t| {
        let a = if t <= PI / 2.0 { t } else { (PI / 2.0) * (2.0 * PI - t) / (1.5 * PI) };
        vec![a.cos(), a.sin()]
    });
    let out = d.path().join("fail");
    let mut c = JobConfig::new(Command::SolveAsymptotic);
    c.inputs = vec![lp];
    c.out = Some(out.clone());
    let e = run(&c).unwrap_err();
    assert!(matches!(e, CliError::Core(maxsurf::Error::Solver(_))));
    let marker = std::fs::read_to_string(out.join(FAILURE_MARKER)).unwrap();
    assert!(marker.contains(&format!("exit_code: {}", e.exit_code())));

    let mut bad = JobConfig::new(Command::SolveAsymptotic);
    bad.inputs = vec![d.path().join("missing.json")];
    let io = run(&bad).unwrap_err();
    bad.rho_schedule = vec![3.0, 2.0];
    let cfg = run(&bad).unwrap_err();
    let codes = [e.exit_code(), io.exit_code(), cfg.exit_code()];
    assert_eq!(codes, [10, 4, 3]);
    let st = bin().args(["solve-asymptotic", "--input"]).arg(d.path().join("missing.json")).output().unwrap().status;
    assert_eq!(st.code(), Some(4));
}

#[test]
fn flat_fixture_is_its_own_plane() {
    let d = TempDir::new().unwrap();
    let mut c = JobConfig::new(Command::SolveFlat);
    c.out = Some(d.path().to_path_buf());
    c.mesh_r = Some(6);
    c.mesh_theta = 48;
    assert!(run(&c).unwrap().passed);
    let s = parse_surface_file(&d.path().join("surface.json")).unwrap();
    assert!(s.is_flat());
    for (i, z) in s.mesh().nodes().iter().enumerate() {
        let f = s.fiber(i);
        assert!((f[0] - (0.3 * z[0] - 0.2 * z[1])).abs() < 1e-8);
        assert!((f[1] - (0.15 * z[0] - 0.1 * z[1])).abs() < 1e-8);
    }
}
