//! Text formats: loops, boundary data and surfaces, all JSON.
//!
//! Numbers are written in the shortest form that parses back to the same `f64`, so every
//! file round-trips bit-exactly.

use std::path::Path;
use std::sync::Arc;

use maxsurf::ambient::PointedPlane;
use maxsurf::loops::LoopSpec;
use maxsurf::plateau::{BoundaryData, FlatBoundary};
use maxsurf::surfaces::{DiscreteSurface, DiskMesh};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const FORMAT_VERSION: u32 = 1;

/// Largest deviation from unit norm accepted for loop samples and fiber values.
pub const NORM_TOL: f64 = 1e-12;

/// Label carried by every exported shadow.
pub const SHADOW_LABEL: &str =
    "plot shadow (u1, u2, angle of w to the basepoint fiber); not an isometric embedding of the surface";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopFile {
    pub version: u32,
    pub n: usize,
    pub samples: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryFile {
    pub version: u32,
    pub n: usize,
    /// Columns `u1, u2, q0, v1..vn` of the pointed plane; the standard one when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<Vec<Vec<f64>>>,
    pub nodes: Vec<[f64; 2]>,
    pub fibers: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlatBoundaryFile {
    pub version: u32,
    pub n: usize,
    pub center: [f64; 2],
    pub nodes: Vec<[f64; 2]>,
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shadow {
    pub label: String,
    pub points: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceFile {
    pub version: u32,
    /// `curved` or `flat`.
    pub kind: String,
    pub n: usize,
    pub lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<Vec<Vec<f64>>>,
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<usize>,
    /// Unit fiber values (curved) or values in `R^n` (flat).
    pub fibers: Vec<Vec<f64>>,
    /// Derived data, written for consumers and ignored on import.
    pub ambient: Vec<Vec<f64>>,
    pub shadow: Shadow,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn parse<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| CliError::format(path, format!("schema mismatch: {e}")))
}

fn check_version(path: &Path, v: u32) -> Result<()> {
    if v != FORMAT_VERSION {
        return Err(CliError::format(path, format!("unsupported version {v} (expected {FORMAT_VERSION})")));
    }
    Ok(())
}

pub fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

pub fn parse_loop_file(path: &Path) -> Result<LoopSpec> {
    parse_loop_str(path, &read(path)?)
}

/// Parses and validates a loop; `path` only labels errors.
pub fn parse_loop_str(path: &Path, text: &str) -> Result<LoopSpec> {
    let f: LoopFile = parse(path, text)?;
    check_version(path, f.version)?;
    if f.n < 1 {
        return Err(CliError::format(path, "n must be at least 1"));
    }
    let mut samples = Vec::with_capacity(f.samples.len());
    for (j, w) in f.samples.iter().enumerate() {
        if w.len() != f.n + 1 {
            return Err(CliError::format(
                path,
                format!("sample {j} has {} components, expected {}", w.len(), f.n + 1),
            ));
        }
        let v = DVector::from_column_slice(w);
        let norm = v.norm();
        if !((norm - 1.0).abs() <= NORM_TOL) {
            return Err(CliError::format(path, format!("sample {j} is not a unit vector (norm {norm:e})")));
        }
        samples.push(v);
    }
    Ok(LoopSpec::new(samples)?)
}

pub fn loop_file(l: &LoopSpec) -> LoopFile {
    LoopFile {
        version: FORMAT_VERSION,
        n: l.n(),
        samples: l.samples().iter().map(|w| w.as_slice().to_vec()).collect(),
    }
}

fn frame_columns(f: &PointedPlane) -> Vec<Vec<f64>> {
    f.basis().column_iter().map(|c| c.iter().copied().collect()).collect()
}

fn frame_from(path: &Path, n: usize, cols: &Option<Vec<Vec<f64>>>) -> Result<PointedPlane> {
    match cols {
        None => Ok(PointedPlane::standard(n)?),
        Some(cols) => {
            let d = n + 3;
            if cols.len() != d || cols.iter().any(|c| c.len() != d) {
                return Err(CliError::format(path, format!("frame must have {d} columns of length {d}")));
            }
            let m = DMatrix::from_fn(d, d, |i, j| cols[j][i]);
            Ok(PointedPlane::from_basis(m)?)
        }
    }
}

pub fn parse_boundary_file(path: &Path) -> Result<BoundaryData> {
    let f: BoundaryFile = parse(path, &read(path)?)?;
    check_version(path, f.version)?;
    let frame = frame_from(path, f.n, &f.frame)?;
    let fibers = f.fibers.iter().map(|w| DVector::from_column_slice(w)).collect();
    Ok(BoundaryData::new(frame, f.nodes, fibers)?)
}

pub fn boundary_file(b: &BoundaryData) -> BoundaryFile {
    BoundaryFile {
        version: FORMAT_VERSION,
        n: b.n(),
        frame: Some(frame_columns(b.frame())),
        nodes: b.nodes().to_vec(),
        fibers: b.fibers().iter().map(|w| w.as_slice().to_vec()).collect(),
    }
}

pub fn parse_flat_boundary_file(path: &Path) -> Result<FlatBoundary> {
    let f: FlatBoundaryFile = parse(path, &read(path)?)?;
    check_version(path, f.version)?;
    let values = f.values.iter().map(|w| DVector::from_column_slice(w)).collect();
    Ok(FlatBoundary::new(f.n, f.center, f.nodes, values)?)
}

pub fn flat_boundary_file(b: &FlatBoundary) -> FlatBoundaryFile {
    FlatBoundaryFile {
        version: FORMAT_VERSION,
        n: b.n(),
        center: b.center(),
        nodes: b.nodes().to_vec(),
        values: b.values().iter().map(|w| w.as_slice().to_vec()).collect(),
    }
}

/// The plot shadow: parameter coordinates and, for curved surfaces, the angle between the
/// fiber value and the basepoint fiber (the norm of the value for flat ones).
pub fn shadow(s: &DiscreteSurface) -> Shadow {
    let base = if s.is_flat() { None } else { Some(s.frame().basepoint_fiber()) };
    let points = s
        .mesh()
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, z)| {
            let f = s.fiber(i);
            let a = match &base {
                Some(v) => f.dot(v).clamp(-1.0, 1.0).acos(),
                None => f.norm(),
            };
            [z[0], z[1], a]
        })
        .collect();
    Shadow {
        label: SHADOW_LABEL.to_string(),
        points,
    }
}

pub fn surface_file(s: &DiscreteSurface) -> SurfaceFile {
    let mesh = s.mesh();
    SurfaceFile {
        version: FORMAT_VERSION,
        kind: if s.is_flat() { "flat" } else { "curved" }.to_string(),
        n: s.n(),
        lambda: s.lambda(),
        frame: (!s.is_flat()).then(|| frame_columns(s.frame())),
        nodes: mesh.nodes().to_vec(),
        triangles: mesh.triangles().to_vec(),
        boundary: mesh.boundary().to_vec(),
        fibers: s.fibers().iter().map(|f| f.as_slice().to_vec()).collect(),
        ambient: s.ambient_positions().iter().map(|x| x.as_slice().to_vec()).collect(),
        shadow: shadow(s),
    }
}

pub fn parse_surface_file(path: &Path) -> Result<DiscreteSurface> {
    parse_surface_str(path, &read(path)?)
}

pub fn parse_surface_str(path: &Path, text: &str) -> Result<DiscreteSurface> {
    let f: SurfaceFile = parse(path, text)?;
    check_version(path, f.version)?;
    let mesh = Arc::new(DiskMesh::from_parts(f.nodes, f.triangles, f.boundary)?);
    let fibers: Vec<DVector<f64>> = f.fibers.iter().map(|w| DVector::from_column_slice(w)).collect();
    match f.kind.as_str() {
        "curved" => {
            let frame = frame_from(path, f.n, &f.frame)?;
            Ok(DiscreteSurface::curved(mesh, frame, fibers, f.lambda)?)
        }
        "flat" => Ok(DiscreteSurface::flat(mesh, f.n, fibers)?),
        k => Err(CliError::format(path, format!("unknown surface kind '{k}'"))),
    }
}

/// Wavefront OBJ of the plot shadow, labeled as such in its header.
pub fn obj_shadow(s: &DiscreteSurface) -> String {
    let sh = shadow(s);
    let mut out = format!("# {}\n", sh.label);
    for p in &sh.points {
        out.push_str(&format!("v {:?} {:?} {:?}\n", p[0], p[1], p[2]));
    }
    for t in s.mesh().triangles() {
        out.push_str(&format!("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1));
    }
    out
}
