//! Solvers for the finite, asymptotic and flat Plateau problems.
//!
//! Every solve is a continuation from a totally geodesic disk: the boundary data are
//! deformed from planar to the target in stages, and each stage is driven to stationarity
//! of the discrete area by the drivers named in [`SolverOptions::drivers`].

mod assembly;
pub mod boundary;
mod solver;

use std::sync::Arc;

use nalgebra::DVector;

pub use boundary::{continuity_path, half_disk_polygon, BoundaryData, FlatBoundary};
pub use solver::{
    AscentDriver, ContinuityGrid, DriverOutcome, DriverRegistry, NewtonDriver, RejectedStep, SolveReport, residual_floor, SolverOptions,
    StageDriver, StageRecord, StageState, AREA_ROUNDOFF,
};

use crate::ambient::{PointH, PointedPlane};
use crate::error::{Error, Result};
use crate::loops::{
    classify_loop, exhaustion_curve, interior_point, strongly_positive_check, LoopClass, LoopSpec,
    StrongPositivityReport,
};
use crate::surfaces::{DiscreteSurface, DiskMesh, Grading, MeshOptions};

/// A solver configuration together with the driver registry it draws from.
#[derive(Debug, Clone)]
pub struct Solver {
    pub options: SolverOptions,
    registry: DriverRegistry,
}

impl Solver {
    pub fn new(options: SolverOptions) -> Self {
        Self {
            options,
            registry: DriverRegistry::default(),
        }
    }

    pub fn with_registry(options: SolverOptions, registry: DriverRegistry) -> Self {
        Self { options, registry }
    }

    pub fn registry(&self) -> &DriverRegistry {
        &self.registry
    }

    /// Finite Plateau problem over the star-shaped polygon of `boundary` (about the origin).
    pub fn finite(&self, boundary: &BoundaryData, mesh: &MeshOptions) -> Result<(DiscreteSurface, SolveReport)> {
        if self.options.check_boundary {
            let sp = boundary.strong_positivity()?;
            if !sp.passed {
                return Err(Error::solver(format!("boundary curve is not strongly positive: {sp:?}")));
            }
        }
        let mesh = Arc::new(DiskMesh::polar([0.0, 0.0], boundary.nodes(), mesh)?);
        self.finite_on(boundary, mesh)
    }

    /// As [`finite`](Self::finite) on a given mesh whose boundary cycle carries `boundary`.
    pub fn finite_on(&self, boundary: &BoundaryData, mesh: Arc<DiskMesh>) -> Result<(DiscreteSurface, SolveReport)> {
        check_boundary_nodes(&mesh, boundary.nodes())?;
        let initial = DiscreteSurface::planar(mesh, boundary.frame().clone())?;
        let path = |t: f64| Ok(continuity_path(boundary, t)?.fibers().to_vec());
        solver::continuation(initial, &path, &self.options, &self.registry)
    }

    /// Flat problem in `R^{2,n}`, continued from the plane `y = 0` along `t · y_boundary`.
    pub fn flat(&self, boundary: &FlatBoundary, mesh: &MeshOptions) -> Result<(DiscreteSurface, SolveReport)> {
        let mesh = Arc::new(DiskMesh::polar(boundary.center(), boundary.nodes(), mesh)?);
        let n = boundary.n();
        let initial = DiscreteSurface::flat(mesh.clone(), n, vec![DVector::zeros(n); mesh.num_nodes()])?;
        let values = boundary.values().to_vec();
        let path = move |t: f64| Ok(values.iter().map(|v| v * t).collect());
        solver::continuation(initial, &path, &self.options, &self.registry)
    }

    /// Asymptotic problem by exhaustion: one finite solve per entry of the schedule.
    pub fn asymptotic(&self, l: &LoopSpec, opts: &AsymptoticOptions) -> Result<AsymptoticReport> {
        self.asymptotic_with(l, opts, &mut |_| {})
    }

    /// As [`asymptotic`](Self::asymptotic), handing every finished stage to `on_stage`
    /// before the next one starts, so callers keep completed stages if a later one fails.
    pub fn asymptotic_with(
        &self,
        l: &LoopSpec,
        opts: &AsymptoticOptions,
        on_stage: &mut dyn FnMut(&AsymptoticStage),
    ) -> Result<AsymptoticReport> {
        let class = classify_loop(l);
        if class.class != LoopClass::Positive {
            return Err(Error::solver(format!(
                "asymptotic solves need a positive loop, got {:?}",
                class.class
            )));
        }
        if opts.schedule.is_empty() || opts.schedule.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::solver("radius schedule must be non-empty and increasing"));
        }
        let p = match &opts.p {
            Some(p) => p.clone(),
            None => interior_point(l)?,
        };
        let frame = oriented_frame(PointedPlane::through(&p)?, l, &p)?;
        let mut stages: Vec<AsymptoticStage> = Vec::new();
        let mut skipped = Vec::new();
        for &rho in &opts.schedule {
            let curve = exhaustion_curve(l, &p, rho)?;
            let check = strongly_positive_check(&curve)?;
            if !check.passed {
                skipped.push((rho, "exhaustion curve is not strongly positive".to_string()));
                continue;
            }
            // Resolve the boundary in the plane of the frame, where continuation starts:
            // consecutive boundary nodes at most `boundary_spacing` apart.
            let mut fine = l.clone();
            let mut b = BoundaryData::from_curve(&curve, frame.clone())?;
            for _ in 0..6 {
                let gap = planar_gap(b.nodes());
                if gap <= opts.boundary_spacing || fine.m() >= MAX_BOUNDARY_NODES {
                    break;
                }
                let m = ((fine.m() as f64 * gap / opts.boundary_spacing * 1.02).ceil() as usize).min(MAX_BOUNDARY_NODES);
                fine = l.resampled_smooth(m)?;
                b = BoundaryData::from_curve(&exhaustion_curve(&fine, &p, rho)?, frame.clone())?;
            }
            let mesh = DiskMesh::polar([0.0, 0.0], b.nodes(), &opts.mesh)
                .map_err(|e| Error::solver(format!("stage rho = {rho}: {e}")))?;
            let mut sopts = self.options.clone();
            sopts.check_boundary = false;
            let solver = Solver::with_registry(sopts, self.registry.clone());
            let (surface, report) = solver
                .finite_on(&b, Arc::new(mesh))
                .map_err(|e| Error::solver(format!("stage rho = {rho}: {e}")))?;
            let stabilization = stages
                .last()
                .map(|prev| stabilization_metric(&prev.surface, &surface, opts.r0))
                .transpose()?;
            let stage = AsymptoticStage {
                rho,
                surface,
                report,
                curve_check: check,
                stabilization,
                boundary_loop: fine,
            };
            on_stage(&stage);
            stages.push(stage);
        }
        Ok(AsymptoticReport {
            p,
            frame,
            stages,
            skipped,
        })
    }
}

/// Flips `u2` when the loop, pushed along its exhaustion curve and projected to the plane
/// of `frame`, turns clockwise; the polar mesher wants counter-clockwise boundaries.
fn oriented_frame(frame: PointedPlane, l: &LoopSpec, p: &PointH) -> Result<PointedPlane> {
    let b = BoundaryData::from_curve(&exhaustion_curve(l, p, 1.0)?, frame.clone())?;
    let z = b.nodes();
    let area: f64 = (0..z.len())
        .map(|j| {
            let (a, c) = (z[j], z[(j + 1) % z.len()]);
            a[0] * c[1] - a[1] * c[0]
        })
        .sum();
    if area >= 0.0 {
        return Ok(frame);
    }
    let mut basis = frame.basis().clone();
    basis.column_mut(1).neg_mut();
    PointedPlane::from_basis(basis)
}

/// Largest hyperbolic distance between consecutive polygon vertices in the Poincaré disk.
fn planar_gap(nodes: &[[f64; 2]]) -> f64 {
    let m = nodes.len();
    (0..m)
        .map(|j| {
            let (a, b) = (nodes[j], nodes[(j + 1) % m]);
            let d2 = (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
            let na = 1.0 - a[0] * a[0] - a[1] * a[1];
            let nb = 1.0 - b[0] * b[0] - b[1] * b[1];
            (1.0 + 2.0 * d2 / (na * nb)).acosh()
        })
        .fold(0.0, f64::max)
}

fn check_boundary_nodes(mesh: &DiskMesh, nodes: &[[f64; 2]]) -> Result<()> {
    if mesh.boundary().len() != nodes.len()
        || mesh.boundary().iter().zip(nodes).any(|(&i, z)| mesh.node(i) != *z)
    {
        return Err(Error::solver("mesh boundary does not match the boundary nodes"));
    }
    Ok(())
}

/// Options of an exhaustion run.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticOptions {
    /// Pseudosphere radii, increasing.
    pub schedule: Vec<f64>,
    /// Centre of the pseudospheres; the loop's interior point when `None`.
    pub p: Option<PointH>,
    /// Parameter radius of the compact set where consecutive stages are compared.
    pub r0: f64,
    pub mesh: MeshOptions,
    /// Largest spatial distance between consecutive boundary nodes; the loop is resampled
    /// smoothly when its exhaustion curve is coarser.
    pub boundary_spacing: f64,
}

/// Cap on the number of boundary nodes of one exhaustion stage.
pub const MAX_BOUNDARY_NODES: usize = 1 << 15;

impl Default for AsymptoticOptions {
    fn default() -> Self {
        Self {
            schedule: vec![2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0],
            p: None,
            r0: 0.5,
            mesh: MeshOptions {
                rings: 0,
                sectors: 6,
                grading: Grading::Hyperbolic {
                    spacing: 0.25,
                    growth: 1.15,
                    max_spacing: 0.8,
                },
            },
            boundary_spacing: 0.8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AsymptoticStage {
    pub rho: f64,
    pub surface: DiscreteSurface,
    pub report: SolveReport,
    /// Check of the exhaustion curve at the loop's own sampling.
    pub curve_check: StrongPositivityReport,
    /// The loop at the sampling used for the stage's boundary.
    pub boundary_loop: LoopSpec,
    /// Largest ambient distance to the previous stage over `{|z| ≤ r0}`.
    pub stabilization: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct AsymptoticReport {
    pub p: PointH,
    pub frame: PointedPlane,
    pub stages: Vec<AsymptoticStage>,
    /// Radii that were skipped, with the reason.
    pub skipped: Vec<(f64, String)>,
}

impl AsymptoticReport {
    pub fn stabilization(&self) -> Vec<f64> {
        self.stages.iter().filter_map(|s| s.stabilization).collect()
    }
}

/// Largest Euclidean distance, in standard ambient coordinates, between `new` at its nodes
/// with `|z| ≤ r0` and `old` interpolated at the same parameters.
pub fn stabilization_metric(old: &DiscreteSurface, new: &DiscreteSurface, r0: f64) -> Result<f64> {
    let mut worst = 0.0f64;
    for (i, z) in new.mesh().nodes().iter().enumerate() {
        if z[0] * z[0] + z[1] * z[1] > r0 * r0 {
            continue;
        }
        let a = new.ambient_point(i)?.vector().0.clone();
        let b = old
            .position_at(*z)
            .ok_or_else(|| Error::solver("compact set leaves the previous stage's domain"))?;
        worst = worst.max((a - b).norm());
    }
    Ok(worst)
}

pub fn solve_finite(
    boundary: &BoundaryData,
    mesh: &MeshOptions,
    opts: &SolverOptions,
) -> Result<(DiscreteSurface, SolveReport)> {
    Solver::new(opts.clone()).finite(boundary, mesh)
}

pub fn solve_flat(
    boundary: &FlatBoundary,
    mesh: &MeshOptions,
    opts: &SolverOptions,
) -> Result<(DiscreteSurface, SolveReport)> {
    Solver::new(opts.clone()).flat(boundary, mesh)
}

pub fn solve_asymptotic(l: &LoopSpec, asym: &AsymptoticOptions, opts: &SolverOptions) -> Result<AsymptoticReport> {
    Solver::new(opts.clone()).asymptotic(l, asym)
}
