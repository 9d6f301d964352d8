use std::path::PathBuf;

use maxsurf::plateau::SolverOptions;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    CheckLoop,
    SolveFinite,
    SolveAsymptotic,
    SolveFlat,
    Verify,
    ExportMesh,
    PlotData,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::CheckLoop => "check-loop",
            Command::SolveFinite => "solve-finite",
            Command::SolveAsymptotic => "solve-asymptotic",
            Command::SolveFlat => "solve-flat",
            Command::Verify => "verify",
            Command::ExportMesh => "export-mesh",
            Command::PlotData => "plot-data",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshKind {
    /// Rings of nodes about the centre, refined toward the boundary polygon.
    Polar,
    /// The square grid mapped onto the disk: regular valence-6 nodes, which the
    /// pointwise Gauss-lift check needs. Built-in fixtures only.
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    /// Wavefront OBJ of the 3-coordinate plot shadow.
    ObjShadow,
}

/// Everything one job needs. Built by the binary from its flags, or directly in tests.
#[derive(Debug, Clone, PartialEq)]
pub struct JobConfig {
    pub command: Command,
    pub inputs: Vec<PathBuf>,
    /// Loop for the hull check of `verify`.
    pub loop_input: Option<PathBuf>,
    /// Output directory; reports go to stdout when absent.
    pub out: Option<PathBuf>,
    pub n: usize,
    /// Rings of the polar mesh; the asymptotic default is a graded mesh when absent.
    pub mesh_r: Option<usize>,
    /// Boundary samples of the built-in fixtures.
    pub mesh_theta: usize,
    pub mesh_kind: MeshKind,
    pub solver: SolverOptions,
    pub rho_schedule: Vec<f64>,
    pub seed: u64,
    pub format: Format,
    /// Parameter radius of the built-in circle fixture.
    pub radius: f64,
    /// Tilt `eps (cos kθ, sin kθ)` of the built-in circle fixture.
    pub tilt: f64,
    pub tilt_k: u32,
    /// Checks to run in `verify`; all applicable ones when empty.
    pub checks: Vec<String>,
    pub compact_radius: Option<f64>,
}

pub const DEFAULT_RINGS: usize = 12;

impl JobConfig {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            inputs: Vec::new(),
            loop_input: None,
            out: None,
            n: 2,
            mesh_r: None,
            mesh_theta: 96,
            mesh_kind: MeshKind::Polar,
            solver: SolverOptions::default(),
            rho_schedule: vec![2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0],
            seed: 0,
            format: Format::Json,
            radius: 0.6,
            tilt: 0.0,
            tilt_k: 2,
            checks: Vec::new(),
            compact_radius: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.n < 1 {
            return bad("--n must be at least 1".into());
        }
        if self.mesh_theta < 3 {
            return bad("--mesh-theta must be at least 3".into());
        }
        if self.mesh_r == Some(0) {
            return bad("--mesh-r must be positive".into());
        }
        for (name, v) in [("--tol-h", self.solver.tol_h), ("--stage-tol", self.solver.stage_tol)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.rho_schedule.is_empty()
            || self.rho_schedule.iter().any(|r| !(*r > 0.0 && r.is_finite()))
            || self.rho_schedule.windows(2).any(|w| !(w[0] < w[1]))
        {
            return bad("--rho-schedule must be positive and strictly increasing".into());
        }
        if !(self.radius > 0.0 && self.radius < 1.0) {
            return bad(format!("--radius must lie in (0, 1), got {}", self.radius));
        }
        if let Some(r) = self.compact_radius {
            if !(r > 0.0) {
                return bad("--compact-radius must be positive".into());
            }
        }
        if self.mesh_kind == MeshKind::Grid && (self.command != Command::SolveFinite || !self.inputs.is_empty()) {
            return bad("--mesh-kind grid applies to solve-finite on the built-in circle only".into());
        }
        self.solver.validate()?;
        let needs = match self.command {
            Command::CheckLoop | Command::SolveAsymptotic | Command::ExportMesh | Command::PlotData => 1..=1,
            Command::Verify => 1..=2,
            Command::SolveFinite | Command::SolveFlat => 0..=1,
        };
        if !needs.contains(&self.inputs.len()) {
            return bad(format!(
                "{} takes {} to {} --input files, got {}",
                self.command.name(),
                needs.start(),
                needs.end(),
                self.inputs.len()
            ));
        }
        Ok(())
    }
}
