use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use maxsurf::ambient::PointedPlane;
use maxsurf::loops::{classify_loop, lipschitz_profile, FiniteCurve, LoopClass};
use maxsurf::plateau::{AsymptoticOptions, BoundaryData, FlatBoundary, Solver};
use maxsurf::surfaces::{DiscreteSurface, DiskMesh, Grading, MeshOptions};
use maxsurf::verify::{CheckRegistry, VerifyInput, VerifyOptions};
use nalgebra::{DMatrix, DVector};
use serde_json::{json, Value};

use crate::config::{Command, Format, JobConfig, MeshKind, DEFAULT_RINGS};
use crate::error::{CliError, Result};
use crate::files::{
    obj_shadow, parse_boundary_file, parse_flat_boundary_file, parse_loop_file, parse_surface_file, surface_file, to_json,
};
use crate::report;

/// Name of the marker written to the output directory when a job fails.
pub const FAILURE_MARKER: &str = "FAILED";

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    /// Every requested check passed.
    pub passed: bool,
    pub artifacts: Vec<PathBuf>,
    /// The primary report, when no output directory was given.
    pub stdout: String,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.passed {
            0
        } else {
            crate::error::EXIT_CHECK_FAILED
        }
    }
}

/// Where artifacts go: files in a directory, or the primary report on stdout.
struct Sink {
    dir: Option<PathBuf>,
    written: Vec<PathBuf>,
    stdout: String,
}

impl Sink {
    fn new(dir: Option<&Path>) -> Result<Self> {
        if let Some(d) = dir {
            std::fs::create_dir_all(d).map_err(|e| CliError::io(d, e))?;
            let marker = d.join(FAILURE_MARKER);
            if marker.exists() {
                std::fs::remove_file(&marker).map_err(|e| CliError::io(&marker, e))?;
            }
        }
        Ok(Self {
            dir: dir.map(Path::to_path_buf),
            written: Vec::new(),
            stdout: String::new(),
        })
    }

    /// A secondary artifact: only written with an output directory.
    fn artifact(&mut self, name: &str, content: &str) -> Result<()> {
        if let Some(d) = &self.dir {
            let p = d.join(name);
            std::fs::write(&p, content).map_err(|e| CliError::io(&p, e))?;
            self.written.push(p);
        }
        Ok(())
    }

    /// The primary output of a command: a file, or stdout without an output directory.
    fn primary(&mut self, name: &str, content: &str) -> Result<()> {
        if self.dir.is_some() {
            self.artifact(name, content)
        } else {
            self.stdout.push_str(content);
            Ok(())
        }
    }

    fn fail(&self, cfg: &JobConfig, e: &CliError) {
        if let Some(d) = &self.dir {
            let text = format!(
                "command: {}\nexit_code: {}\nerror: {}\ncompleted_artifacts: {}\n",
                cfg.command.name(),
                e.exit_code(),
                e,
                self.written.len()
            );
            // Best effort: the original error is what gets reported.
            let _ = std::fs::write(d.join(FAILURE_MARKER), text);
        }
    }
}

/// Caps the global rayon pool at `MAXSURF_THREADS` threads when the variable is set.
pub fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("MAXSURF_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Config(format!("MAXSURF_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

/// Runs one job. On error the output directory receives a failure marker next to whatever
/// artifacts were already flushed.
pub fn run(cfg: &JobConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let mut sink = Sink::new(cfg.out.as_deref())?;
    let res = match cfg.command {
        Command::CheckLoop => check_loop(cfg, &mut sink),
        Command::SolveFinite => solve_finite(cfg, &mut sink),
        Command::SolveAsymptotic => solve_asymptotic(cfg, &mut sink),
        Command::SolveFlat => solve_flat(cfg, &mut sink),
        Command::Verify => verify(cfg, &mut sink),
        Command::ExportMesh => export_mesh(cfg, &mut sink),
        Command::PlotData => plot_data(cfg, &mut sink),
    };
    match res {
        Ok(passed) => Ok(RunOutcome {
            passed,
            artifacts: sink.written,
            stdout: sink.stdout,
        }),
        Err(e) => {
            sink.fail(cfg, &e);
            Err(e)
        }
    }
}

fn uniform(rings: usize) -> MeshOptions {
    MeshOptions {
        rings,
        sectors: 6,
        grading: Grading::Uniform,
    }
}

fn check_loop(cfg: &JobConfig, sink: &mut Sink) -> Result<bool> {
    let l = parse_loop_file(&cfg.inputs[0])?;
    let c = classify_loop(&l);
    let p = lipschitz_profile(&l);
    sink.primary("check-loop.json", &to_json(&report::loop_check(&c, &p, l.m(), l.n())))?;
    Ok(c.class == LoopClass::Positive)
}

fn solved(sink: &mut Sink, s: &DiscreteSurface, solve: Value, extra: Value) -> Result<()> {
    sink.artifact("surface.json", &to_json(&surface_file(s)))?;
    let mut rep = json!({
        "nodes": s.mesh().num_nodes(),
        "boundary_nodes": s.mesh().boundary().len(),
        "mesh_size": s.mesh().mesh_size(),
        "solve": solve,
    });
    if let (Value::Object(r), Value::Object(e)) = (&mut rep, extra) {
        r.extend(e);
    }
    sink.primary("report.json", &to_json(&rep))
}

fn solve_finite(cfg: &JobConfig, sink: &mut Sink) -> Result<bool> {
    let rings = cfg.mesh_r.unwrap_or(DEFAULT_RINGS);
    let solver = Solver::new(cfg.solver.clone());
    let (s, r) = match (cfg.inputs.first(), cfg.mesh_kind) {
        (Some(p), _) => solver.finite(&parse_boundary_file(p)?, &uniform(rings))?,
        (None, MeshKind::Polar) => {
            let frame = PointedPlane::standard(cfg.n)?;
            let b = BoundaryData::perturbed_circle(frame, cfg.radius, cfg.mesh_theta, cfg.tilt, cfg.tilt_k)?;
            solver.finite(&b, &uniform(rings))?
        }
        (None, MeshKind::Grid) => {
            // The grid fixes its own boundary sampling: 8 nodes per unit of `rings`.
            let mesh = Arc::new(DiskMesh::mapped_grid(cfg.radius, rings)?);
            let nodes = mesh.boundary().iter().map(|&i| mesh.node(i)).collect();
            let b = BoundaryData::tilted(PointedPlane::standard(cfg.n)?, nodes, cfg.tilt, cfg.tilt_k)?;
            solver.finite_on(&b, mesh)?
        }
    };
    let passed = r.final_residual <= cfg.solver.tol_h.max(r.residual_floor);
    solved(sink, &s, report::solve_report(&r), json!({"converged": passed}))?;
    Ok(passed)
}

/// Default flat fixture: an affine graph over the disk of radius `cfg.radius`.
fn flat_fixture(cfg: &JobConfig) -> Result<FlatBoundary> {
    let m = cfg.mesh_theta;
    let nodes = (0..m)
        .map(|j| {
            let t = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
            [cfg.radius * t.cos(), cfg.radius * t.sin()]
        })
        .collect();
    let a = DMatrix::from_fn(cfg.n, 2, |i, j| if j == 0 { 0.3 } else { -0.2 } / (i + 1) as f64);
    Ok(FlatBoundary::affine([0.0, 0.0], nodes, &a, &DVector::zeros(cfg.n))?)
}

fn solve_flat(cfg: &JobConfig, sink: &mut Sink) -> Result<bool> {
    let b = match cfg.inputs.first() {
        Some(p) => parse_flat_boundary_file(p)?,
        None => flat_fixture(cfg)?,
    };
    let (s, r) = Solver::new(cfg.solver.clone()).flat(&b, &uniform(cfg.mesh_r.unwrap_or(DEFAULT_RINGS)))?;
    let passed = r.final_residual <= cfg.solver.tol_h.max(r.residual_floor);
    solved(sink, &s, report::solve_report(&r), json!({"converged": passed}))?;
    Ok(passed)
}

fn solve_asymptotic(cfg: &JobConfig, sink: &mut Sink) -> Result<bool> {
    let l = parse_loop_file(&cfg.inputs[0])?;
    let mut opts = AsymptoticOptions {
        schedule: cfg.rho_schedule.clone(),
        ..Default::default()
    };
    if let Some(r) = cfg.mesh_r {
        opts.mesh = uniform(r);
    }
    let solver = Solver::new(cfg.solver.clone());
    // Stages are flushed as they finish, so a failing stage leaves the earlier ones behind.
    let mut write_err = None;
    let mut k = 0;
    let rep = solver.asymptotic_with(&l, &opts, &mut |st| {
        if write_err.is_some() {
            return;
        }
        let res = sink
            .artifact(&format!("stage-{k}.json"), &to_json(&report::stage(st)))
            .and_then(|_| sink.artifact(&format!("surface-stage-{k}.json"), &to_json(&surface_file(&st.surface))));
        if let Err(e) = res {
            write_err = Some(e);
        }
        k += 1;
    })?;
    if let Some(e) = write_err {
        return Err(e);
    }
    if let Some(last) = rep.stages.last() {
        sink.artifact("surface.json", &to_json(&surface_file(&last.surface)))?;
    }
    let passed = rep.skipped.is_empty() && rep.stages.len() == opts.schedule.len();
    let mut v = report::asymptotic_report(&rep);
    v["complete"] = json!(passed);
    sink.primary("report.json", &to_json(&v))?;
    Ok(passed)
}

fn verify(cfg: &JobConfig, sink: &mut Sink) -> Result<bool> {
    let surfaces: Vec<DiscreteSurface> = cfg.inputs.iter().map(|p| parse_surface_file(p)).collect::<Result<_>>()?;
    let l = cfg.loop_input.as_deref().map(parse_loop_file).transpose()?;
    let s = &surfaces[0];
    // Boundary curve of a finite solve, for the hull and boundary-angle checks.
    let curve = if !s.is_flat() && cfg.loop_input.is_none() && s.mesh().boundary().len() >= 16 {
        let pts = s.mesh().boundary().iter().map(|&i| s.ambient_point(i)).collect::<maxsurf::Result<Vec<_>>>()?;
        Some(FiniteCurve::new(pts)?)
    } else {
        None
    };
    let input = VerifyInput {
        surface: s,
        other: surfaces.get(1),
        loop_spec: l.as_ref(),
        curve: curve.as_ref(),
    };
    let opts = VerifyOptions {
        seed: cfg.seed,
        compact_radius: cfg.compact_radius,
        ..Default::default()
    };
    let rep = CheckRegistry::default().run(&input, &opts, &cfg.checks)?;
    sink.primary("verify.json", &to_json(&report::verify_report(&rep)))?;
    Ok(rep.passed())
}

fn export_mesh(cfg: &JobConfig, sink: &mut Sink) -> Result<bool> {
    let s = parse_surface_file(&cfg.inputs[0])?;
    match cfg.format {
        Format::Json => sink.primary("mesh.json", &to_json(&surface_file(&s)))?,
        Format::ObjShadow => sink.primary("shadow.obj", &obj_shadow(&s))?,
    }
    Ok(true)
}

fn num(v: &Value) -> String {
    match v.as_f64() {
        Some(x) => format!("{x:?}"),
        None => "nan".to_string(),
    }
}

fn trace_rows(out: &mut String, prefix: &str, solve: &Value) {
    let col = |k: &str| solve[k].as_array().cloned().unwrap_or_default();
    let (a, r, m) = (col("area_trace"), col("residual_trace"), col("margin_trace"));
    for i in 0..a.len() {
        let _ = writeln!(
            out,
            "{prefix}{i}\t{}\t{}\t{}",
            num(&a[i]),
            r.get(i).map_or("nan".into(), num),
            m.get(i).map_or("nan".into(), num)
        );
    }
}

/// Tab-separated traces of a solve report (and the stage table of an asymptotic one).
fn plot_data(cfg: &JobConfig, sink: &mut Sink) -> Result<bool> {
    let path = &cfg.inputs[0];
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| CliError::format(path, format!("not a report: {e}")))?;
    let mut trace = String::new();
    if let Some(stages) = v["stages"].as_array().filter(|s| s.iter().all(|x| x.get("rho").is_some())).filter(|_| v.get("solve").is_none()) {
        let mut table = String::from("rho\tstabilization\tfinal_residual\titerations\tnodes\n");
        trace.push_str("rho\titeration\tarea\tresidual\tmargin\n");
        for s in stages {
            let _ = writeln!(
                table,
                "{}\t{}\t{}\t{}\t{}",
                num(&s["rho"]),
                num(&s["stabilization"]),
                num(&s["solve"]["final_residual"]),
                s["solve"]["iterations"],
                s["nodes"]
            );
            trace_rows(&mut trace, &format!("{}\t", num(&s["rho"])), &s["solve"]);
        }
        sink.artifact("stages.tsv", &table)?;
        if sink.dir.is_none() {
            sink.stdout.push_str(&table);
            sink.stdout.push('\n');
        }
    } else if v.get("solve").is_some() {
        trace.push_str("iteration\tarea\tresidual\tmargin\n");
        trace_rows(&mut trace, "", &v["solve"]);
    } else {
        return Err(CliError::format(path, "neither a solve nor an asymptotic report"));
    }
    sink.primary("trace.tsv", &trace)?;
    Ok(true)
}
