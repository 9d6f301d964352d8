//! Boundary data for the finite and flat problems and the continuity path.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::ambient::{psi, psi_inv, PointedPlane};
use crate::error::{Error, Result};
use crate::loops::{strongly_positive_check, FiniteCurve, StrongPositivityReport};

/// A closed curve given as a graph over a star-shaped polygon `∂Ω` of a pointed plane.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    frame: PointedPlane,
    nodes: Vec<[f64; 2]>,
    fibers: Vec<DVector<f64>>,
}

impl BoundaryData {
    pub fn new(frame: PointedPlane, nodes: Vec<[f64; 2]>, fibers: Vec<DVector<f64>>) -> Result<Self> {
        if nodes.len() != fibers.len() {
            return Err(Error::surface("one fiber value per boundary node is required"));
        }
        if nodes.len() < 3 {
            return Err(Error::surface("boundary needs at least 3 nodes"));
        }
        let n = frame.n();
        for (j, (z, f)) in nodes.iter().zip(&fibers).enumerate() {
            if f.len() != n + 1 {
                return Err(Error::DimensionMismatch {
                    expected: n + 1,
                    got: f.len(),
                });
            }
            if (f.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::surface(format!("boundary fiber {j} is not a unit vector")));
            }
            if !(z[0] * z[0] + z[1] * z[1] < 1.0) {
                return Err(Error::surface(format!("boundary node {j} is outside the unit disk")));
            }
        }
        Ok(Self { frame, nodes, fibers })
    }

    /// Graph description of a closed curve over `frame`.
    pub fn from_curve(curve: &FiniteCurve, frame: PointedPlane) -> Result<Self> {
        let mut nodes = Vec::with_capacity(curve.m());
        let mut fibers = Vec::with_capacity(curve.m());
        for p in curve.points() {
            let (u, w) = psi_inv(&frame, p)?;
            nodes.push(u);
            fibers.push(w);
        }
        Self::new(frame, nodes, fibers)
    }

    pub fn to_curve(&self) -> Result<FiniteCurve> {
        let pts = self
            .nodes
            .iter()
            .zip(&self.fibers)
            .map(|(z, f)| psi(&self.frame, *z, f.as_slice()))
            .collect::<Result<Vec<_>>>()?;
        FiniteCurve::new(pts)
    }

    /// Circle of parameter radius `radius` in the hyperbolic plane of `frame`.
    pub fn circle(frame: PointedPlane, radius: f64, m: usize) -> Result<Self> {
        Self::perturbed_circle(frame, radius, m, 0.0, 0)
    }

    /// Circle whose fiber values are tilted by `eps · cos(kθ)` along the first fiber
    /// direction (and `eps · sin(kθ)` along the second, when there is one).
    pub fn perturbed_circle(frame: PointedPlane, radius: f64, m: usize, eps: f64, k: u32) -> Result<Self> {
        let nodes = (0..m)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / m as f64;
                [radius * t.cos(), radius * t.sin()]
            })
            .collect();
        Self::tilted(frame, nodes, eps, k)
    }

    /// Fiber values `eps · (cos kθ, sin kθ)` off the basepoint fiber (normalized), at given
    /// nodes with polar angles `θ`.
    pub fn tilted(frame: PointedPlane, nodes: Vec<[f64; 2]>, eps: f64, k: u32) -> Result<Self> {
        let v = frame.basepoint_fiber();
        let n = frame.n();
        let fibers = nodes
            .iter()
            .map(|z| {
                let t = z[1].atan2(z[0]);
                let mut f = v.clone();
                if eps != 0.0 {
                    f[1] += eps * (k as f64 * t).cos();
                    if n >= 2 {
                        f[2] += eps * (k as f64 * t).sin();
                    }
                    f = f.normalize();
                }
                f
            })
            .collect();
        Self::new(frame, nodes, fibers)
    }

    pub fn frame(&self) -> &PointedPlane {
        &self.frame
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn fibers(&self) -> &[DVector<f64>] {
        &self.fibers
    }

    pub fn m(&self) -> usize {
        self.nodes.len()
    }

    pub fn n(&self) -> usize {
        self.frame.n()
    }

    /// Strong positivity of the boundary curve.
    pub fn strong_positivity(&self) -> Result<StrongPositivityReport> {
        strongly_positive_check(&self.to_curve()?)
    }
}

/// Contracts the fiber values toward the basepoint: `t = 0` gives the planar curve,
/// `t = 1` the input.
pub fn continuity_path(b: &BoundaryData, t: f64) -> Result<BoundaryData> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::surface(format!("continuity parameter {t} outside [0, 1]")));
    }
    let v = b.frame.basepoint_fiber();
    if t == 1.0 {
        return Ok(b.clone());
    }
    let s = 1.0 - t;
    let mut fibers = Vec::with_capacity(b.m());
    for (j, w) in b.fibers.iter().enumerate() {
        if w.dot(&v) <= 0.0 {
            return Err(Error::surface(format!(
                "boundary fiber {j} is outside the hemisphere of the basepoint"
            )));
        }
        let c = w * (1.0 - s) + &v * s;
        let nc = c.norm();
        if nc < 1e-12 {
            return Err(Error::surface("antipodal fiber value on the continuity path"));
        }
        fibers.push(c / nc);
    }
    Ok(BoundaryData {
        frame: b.frame.clone(),
        nodes: b.nodes.clone(),
        fibers,
    })
}

/// Boundary values in the flat space `R^{2,n}`: a polygon `∂Ω` and values `y_j ∈ R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatBoundary {
    n: usize,
    center: [f64; 2],
    nodes: Vec<[f64; 2]>,
    values: Vec<DVector<f64>>,
}

impl FlatBoundary {
    /// `center` must see the whole polygon (star-shaped about it).
    pub fn new(n: usize, center: [f64; 2], nodes: Vec<[f64; 2]>, values: Vec<DVector<f64>>) -> Result<Self> {
        if nodes.len() != values.len() || nodes.len() < 3 {
            return Err(Error::surface("one value per boundary node (at least 3) is required"));
        }
        if let Some(v) = values.iter().find(|v| v.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, got: v.len() });
        }
        Ok(Self {
            n,
            center,
            nodes,
            values,
        })
    }

    /// Restriction of the affine map `z ↦ a z + c` to the polygon.
    pub fn affine(center: [f64; 2], nodes: Vec<[f64; 2]>, a: &DMatrix<f64>, c: &DVector<f64>) -> Result<Self> {
        if a.ncols() != 2 || a.nrows() != c.len() {
            return Err(Error::surface("affine map must be n × 2 with an n-vector offset"));
        }
        let values = nodes
            .iter()
            .map(|z| a * DVector::from_column_slice(z) + c)
            .collect();
        Self::new(c.len(), center, nodes, values)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn center(&self) -> [f64; 2] {
        self.center
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn values(&self) -> &[DVector<f64>] {
        &self.values
    }
}

/// Counter-clockwise boundary of the half-disk `{|z| ≤ r, z_2 ≥ 0}` with `m_arc` arc
/// segments and `m_line` segments on the diameter, and a centre it is star-shaped about.
pub fn half_disk_polygon(radius: f64, m_arc: usize, m_line: usize) -> (Vec<[f64; 2]>, [f64; 2]) {
    let mut pts = Vec::with_capacity(m_arc + m_line);
    for j in 0..m_arc {
        let t = PI * j as f64 / m_arc as f64;
        pts.push([radius * t.cos(), radius * t.sin()]);
    }
    for j in 0..m_line {
        let x = -radius + 2.0 * radius * j as f64 / m_line as f64;
        pts.push([x, 0.0]);
    }
    (pts, [0.0, 0.4 * radius])
}
