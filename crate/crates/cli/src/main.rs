use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use maxsurf::plateau::SolverOptions;
use maxsurf_cli::config::MeshKind;
use maxsurf_cli::{run, Command, Format, JobConfig};

#[derive(Parser)]
#[command(name = "maxsurf", version, about = "Maximal surfaces in H^{2,n}: solvers, checks and exports")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Classify a boundary loop (exit 0 iff it is positive).
    CheckLoop(Opts),
    /// Finite Plateau problem from a boundary file or the built-in circle.
    SolveFinite(Opts),
    /// Asymptotic problem for a positive loop by exhaustion.
    SolveAsymptotic(Opts),
    /// Flat problem in R^{2,n} from a boundary file or the built-in affine disk.
    SolveFlat(Opts),
    /// Run the checks on one surface, or two for the pairwise ones.
    Verify(Opts),
    /// Re-export a surface file as JSON or as an OBJ plot shadow.
    ExportMesh(Opts),
    /// Tabular traces from a solve report.
    PlotData(Opts),
}

#[derive(Clone, Copy, ValueEnum)]
enum MeshArg {
    Polar,
    Grid,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    ObjShadow,
}

#[derive(Args)]
struct Opts {
    /// Input file (repeat for verify's second surface).
    #[arg(long)]
    input: Vec<PathBuf>,
    /// Loop file for verify's hull check.
    #[arg(long = "loop")]
    loop_input: Option<PathBuf>,
    /// Output directory; the report goes to stdout without it.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    n: usize,
    /// Rings of the polar mesh.
    #[arg(long)]
    mesh_r: Option<usize>,
    /// Boundary samples of the built-in fixtures.
    #[arg(long, default_value_t = 96)]
    mesh_theta: usize,
    /// Mesh family; grid needs the built-in circle and uses --mesh-r as its resolution.
    #[arg(long, value_enum, default_value_t = MeshArg::Polar)]
    mesh_kind: MeshArg,
    #[arg(long)]
    tol_h: Option<f64>,
    #[arg(long)]
    stage_tol: Option<f64>,
    /// Comma-separated pseudosphere radii.
    #[arg(long, value_delimiter = ',')]
    rho_schedule: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
    /// Parameter radius of the built-in circle.
    #[arg(long, default_value_t = 0.6)]
    radius: f64,
    /// Fiber tilt amplitude of the built-in circle.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    tilt: f64,
    #[arg(long, default_value_t = 2)]
    tilt_k: u32,
    /// Check to run in verify (repeatable; all applicable when absent).
    #[arg(long = "check")]
    checks: Vec<String>,
    /// Restrict pointwise curvature checks to parameter radius at most this.
    #[arg(long)]
    compact_radius: Option<f64>,
}

fn config(command: Command, o: Opts) -> JobConfig {
    let mut c = JobConfig::new(command);
    let defaults = SolverOptions::default();
    c.inputs = o.input;
    c.loop_input = o.loop_input;
    c.out = o.out;
    c.n = o.n;
    c.mesh_r = o.mesh_r;
    c.mesh_theta = o.mesh_theta;
    c.mesh_kind = match o.mesh_kind {
        MeshArg::Polar => MeshKind::Polar,
        MeshArg::Grid => MeshKind::Grid,
    };
    c.solver.tol_h = o.tol_h.unwrap_or(defaults.tol_h);
    c.solver.stage_tol = o.stage_tol.unwrap_or(defaults.stage_tol);
    if let Some(s) = o.rho_schedule {
        c.rho_schedule = s;
    }
    c.seed = o.seed;
    c.format = match o.format {
        FormatArg::Json => Format::Json,
        FormatArg::ObjShadow => Format::ObjShadow,
    };
    c.radius = o.radius;
    c.tilt = o.tilt;
    c.tilt_k = o.tilt_k;
    c.checks = o.checks;
    c.compact_radius = o.compact_radius;
    c
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, opts) = match cli.command {
        Sub::CheckLoop(o) => (Command::CheckLoop, o),
        Sub::SolveFinite(o) => (Command::SolveFinite, o),
        Sub::SolveAsymptotic(o) => (Command::SolveAsymptotic, o),
        Sub::SolveFlat(o) => (Command::SolveFlat, o),
        Sub::Verify(o) => (Command::Verify, o),
        Sub::ExportMesh(o) => (Command::ExportMesh, o),
        Sub::PlotData(o) => (Command::PlotData, o),
    };
    let cfg = config(command, opts);
    let res = maxsurf_cli::run::init_threads().and_then(|_| run(&cfg));
    match res {
        Ok(out) => {
            let mut stdout = std::io::stdout();
            let _ = stdout.write_all(out.stdout.as_bytes());
            for a in &out.artifacts {
                eprintln!("wrote {}", a.display());
            }
            if !out.passed {
                eprintln!("{}: checks failed", cfg.command.name());
            }
            ExitCode::from(out.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
