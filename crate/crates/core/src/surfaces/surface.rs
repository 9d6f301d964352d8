//! Discrete graph surfaces over a disk mesh.

use std::sync::Arc;

use nalgebra::DVector;

use crate::ambient::{exp_map_raw, log_map_raw, pair, psi_frame_coords, psi_inv_frame, PointH, PointedPlane};
use crate::error::{Error, Result};
use crate::surfaces::mesh::DiskMesh;

/// A piecewise-linear surface given as a graph over a disk mesh.
///
/// For `lambda > 0` the surface lies in `H^{2,n}` with metric rescaled to `g / lambda` and
/// each node carries a fiber value on `S^n` (`n + 1` coordinates, frame `W` basis). For
/// `lambda = 0` it lies in the flat space `R^{2,n}` and each node carries `y ∈ R^n`.
///
/// Model positions are stored in frame coordinates, divided by `sqrt(lambda)` in the curved
/// case so that every computation uses the standard pairing.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSurface {
    mesh: Arc<DiskMesh>,
    frame: PointedPlane,
    lambda: f64,
    fibers: Vec<DVector<f64>>,
    pos: Vec<f64>,
    d: usize,
}

impl DiscreteSurface {
    /// Surface in `H^{2,n}` (rescaled by `lambda > 0`) with the given fiber values.
    pub fn curved(mesh: Arc<DiskMesh>, frame: PointedPlane, fibers: Vec<DVector<f64>>, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::surface("curved surfaces need lambda > 0"));
        }
        let n = frame.n();
        if fibers.len() != mesh.num_nodes() {
            return Err(Error::surface("one fiber value per node is required"));
        }
        for f in &fibers {
            if f.len() != n + 1 {
                return Err(Error::DimensionMismatch {
                    expected: n + 1,
                    got: f.len(),
                });
            }
            if (f.norm() - 1.0).abs() > 1e-10 {
                return Err(Error::surface("fiber values must be unit vectors"));
            }
        }
        for z in mesh.nodes() {
            if !(z[0] * z[0] + z[1] * z[1] < 1.0) {
                return Err(Error::surface("mesh node outside the unit disk"));
            }
        }
        let d = n + 3;
        let mut s = Self {
            mesh,
            frame,
            lambda,
            fibers,
            pos: Vec::new(),
            d,
        };
        s.pos = vec![0.0; s.mesh.num_nodes() * d];
        s.refresh_all();
        Ok(s)
    }

    /// Surface in `R^{2,n}` given by `y: Ω → R^n`.
    pub fn flat(mesh: Arc<DiskMesh>, n: usize, values: Vec<DVector<f64>>) -> Result<Self> {
        if values.len() != mesh.num_nodes() {
            return Err(Error::surface("one value per node is required"));
        }
        if values.iter().any(|v| v.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: values.iter().find(|v| v.len() != n).unwrap().len(),
            });
        }
        let d = n + 2;
        let mut s = Self {
            mesh,
            frame: PointedPlane::standard(n)?,
            lambda: 0.0,
            fibers: values,
            pos: Vec::new(),
            d,
        };
        s.pos = vec![0.0; s.mesh.num_nodes() * d];
        s.refresh_all();
        Ok(s)
    }

    /// The totally geodesic disk `f ≡ basepoint` over `mesh`.
    pub fn planar(mesh: Arc<DiskMesh>, frame: PointedPlane) -> Result<Self> {
        let v = frame.basepoint_fiber();
        let fibers = vec![v; mesh.num_nodes()];
        Self::curved(mesh, frame, fibers, 1.0)
    }

    pub(crate) fn refresh_all(&mut self) {
        for i in 0..self.mesh.num_nodes() {
            self.refresh(i);
        }
    }

    fn refresh(&mut self, i: usize) {
        let d = self.d;
        let z = self.mesh.node(i);
        let out = &mut self.pos[i * d..(i + 1) * d];
        if self.lambda > 0.0 {
            psi_frame_coords(z, self.fibers[i].as_slice(), out);
            let s = 1.0 / self.lambda.sqrt();
            out.iter_mut().for_each(|v| *v *= s);
        } else {
            out[0] = z[0];
            out[1] = z[1];
            out[2..].copy_from_slice(self.fibers[i].as_slice());
        }
    }

    pub fn mesh(&self) -> &DiskMesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<DiskMesh> {
        &self.mesh
    }

    pub fn frame(&self) -> &PointedPlane {
        &self.frame
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn is_flat(&self) -> bool {
        self.lambda == 0.0
    }

    pub fn n(&self) -> usize {
        self.frame.n()
    }

    /// Dimension of the model space vectors.
    pub fn model_dim(&self) -> usize {
        self.d
    }

    pub fn fibers(&self) -> &[DVector<f64>] {
        &self.fibers
    }

    pub fn fiber(&self, i: usize) -> &DVector<f64> {
        &self.fibers[i]
    }

    pub(crate) fn set_fibers(&mut self, f: Vec<DVector<f64>>) {
        self.fibers = f;
        self.refresh_all();
    }

    /// Model position of node `i` (frame coordinates, scaled).
    pub fn model_position(&self, i: usize) -> &[f64] {
        &self.pos[i * self.d..(i + 1) * self.d]
    }

    /// Ambient point in standard coordinates (curved surfaces only).
    pub fn ambient_point(&self, i: usize) -> Result<PointH> {
        if self.is_flat() {
            return Err(Error::surface("flat surfaces have no ambient points in H^{2,n}"));
        }
        let s = self.lambda.sqrt();
        let c: Vec<f64> = self.model_position(i).iter().map(|v| v * s).collect();
        Ok(PointH::from_unchecked(self.frame.from_frame(&c)))
    }

    /// Positions in standard ambient coordinates for curved surfaces, model coordinates
    /// for flat ones.
    pub fn ambient_positions(&self) -> Vec<DVector<f64>> {
        (0..self.mesh.num_nodes())
            .map(|i| {
                if self.is_flat() {
                    DVector::from_column_slice(self.model_position(i))
                } else {
                    self.ambient_point(i).unwrap().vector().0.clone()
                }
            })
            .collect()
    }

    /// Sectional curvature magnitude of the model: the model has curvature `-kappa`.
    pub fn kappa(&self) -> f64 {
        self.lambda
    }

    /// Interpolated fiber value at a parameter point.
    pub fn fiber_at(&self, z: [f64; 2]) -> Option<DVector<f64>> {
        let (t, l) = self.mesh.locate(z)?;
        Some(self.fiber_in(t, l))
    }

    fn fiber_in(&self, t: usize, l: [f64; 3]) -> DVector<f64> {
        let tri = self.mesh.triangles()[t];
        let v = &self.fibers[tri[0]] * l[0] + &self.fibers[tri[1]] * l[1] + &self.fibers[tri[2]] * l[2];
        if self.is_flat() {
            v
        } else {
            v.normalize()
        }
    }

    fn position_from(&self, z: [f64; 2], f: &DVector<f64>) -> DVector<f64> {
        if self.is_flat() {
            let mut v = DVector::zeros(self.d);
            v[0] = z[0];
            v[1] = z[1];
            v.rows_mut(2, self.d - 2).copy_from(f);
            v
        } else {
            let mut c = vec![0.0; self.d];
            psi_frame_coords(z, f.as_slice(), &mut c);
            self.frame.from_frame(&c)
        }
    }

    /// Interpolated position at a parameter point, in the coordinates of
    /// [`ambient_positions`](Self::ambient_positions).
    pub fn position_at(&self, z: [f64; 2]) -> Option<DVector<f64>> {
        let f = self.fiber_at(z)?;
        Some(self.position_from(z, &f))
    }

    /// As [`position_at`](Self::position_at), with points outside the mesh snapped to the
    /// nearest boundary edge.
    pub fn position_at_clamped(&self, z: [f64; 2]) -> DVector<f64> {
        let (t, l) = self.mesh.locate_clamped(z);
        let tri = self.mesh.triangles()[t];
        let mut zs = [0.0; 2];
        for k in 0..3 {
            let p = self.mesh.node(tri[k]);
            zs[0] += l[k] * p[0];
            zs[1] += l[k] * p[1];
        }
        self.position_from(zs, &self.fiber_in(t, l))
    }

    /// Logarithm in the model at node `i` of node `j`. `None` for causally related nodes.
    pub(crate) fn log_between(&self, i: usize, j: usize, out: &mut [f64]) -> Option<f64> {
        model_log(self.kappa(), self.model_position(i), self.model_position(j), out)
    }
}

/// Logarithm in the model of curvature `-kappa` (scaled coordinates).
pub(crate) fn model_log(kappa: f64, y: &[f64], z: &[f64], out: &mut [f64]) -> Option<f64> {
    if kappa > 0.0 {
        let s = kappa.sqrt();
        let a: Vec<f64> = y.iter().map(|v| v * s).collect();
        let b: Vec<f64> = z.iter().map(|v| v * s).collect();
        let dist = log_map_raw(&a, &b, out)?;
        out.iter_mut().for_each(|v| *v /= s);
        Some(dist / s)
    } else {
        let mut q = 0.0;
        for k in 0..y.len() {
            out[k] = z[k] - y[k];
        }
        q += pair(out, out);
        if q < 0.0 {
            return None;
        }
        Some(q.sqrt())
    }
}

/// Exponential map in the model.
#[cfg(test)]
pub(crate) fn model_exp(kappa: f64, y: &[f64], v: &[f64], out: &mut [f64]) {
    if kappa > 0.0 {
        let s = kappa.sqrt();
        let a: Vec<f64> = y.iter().map(|x| x * s).collect();
        let b: Vec<f64> = v.iter().map(|x| x * s).collect();
        exp_map_raw(&a, &b, out);
        out.iter_mut().for_each(|x| *x /= s);
    } else {
        for k in 0..y.len() {
            out[k] = y[k] + v[k];
        }
    }
}

/// Projection onto the tangent space of the model at `y`.
pub(crate) fn model_tangent_projection(kappa: f64, y: &[f64], v: &mut [f64]) {
    if kappa > 0.0 {
        let c = kappa * pair(v, y);
        for k in 0..v.len() {
            v[k] += c * y[k];
        }
    }
}

/// Geodesic distance in the model between acausal points.
pub(crate) fn model_distance(kappa: f64, y: &[f64], z: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..y.len() {
        let d = y[k] - z[k];
        s += if k < 2 { d * d } else { -d * d };
    }
    let s = s.max(0.0);
    if kappa > 0.0 {
        let r = kappa.sqrt();
        2.0 * (s.sqrt() * r / 2.0).asinh() / r
    } else {
        s.sqrt()
    }
}

/// Converts between scales. Positive scales share the point set; the flat scale is reached
/// through the blow-up chart `x ↦ log_{q0}(x) / sqrt(lambda)` at the frame basepoint and
/// left through its inverse.
pub fn rescale(s: &DiscreteSurface, lambda: f64) -> Result<DiscreteSurface> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::surface("scale must be a finite non-negative number"));
    }
    let n = s.n();
    match (s.lambda > 0.0, lambda > 0.0) {
        (true, true) => DiscreteSurface::curved(s.mesh.clone(), s.frame.clone(), s.fibers.clone(), lambda),
        (false, false) => Ok(s.clone()),
        (true, false) => {
            let base = {
                let mut v = vec![0.0; n + 3];
                v[2] = 1.0;
                v
            };
            let r = s.lambda.sqrt();
            let mut nodes = Vec::with_capacity(s.mesh.num_nodes());
            let mut vals = Vec::with_capacity(s.mesh.num_nodes());
            let mut l = vec![0.0; n + 3];
            for i in 0..s.mesh.num_nodes() {
                let x: Vec<f64> = s.model_position(i).iter().map(|v| v * r).collect();
                log_map_raw(&base, &x, &mut l).ok_or_else(|| Error::surface("node is not acausal to the basepoint"))?;
                nodes.push([l[0] / r, l[1] / r]);
                vals.push(DVector::from_fn(n, |k, _| l[3 + k] / r));
            }
            let mesh = Arc::new(s.mesh.with_nodes(nodes)?);
            let mut out = DiscreteSurface::flat(mesh, n, vals)?;
            out.frame = s.frame.clone();
            Ok(out)
        }
        (false, true) => {
            let base = {
                let mut v = vec![0.0; n + 3];
                v[2] = 1.0;
                v
            };
            let r = lambda.sqrt();
            let mut nodes = Vec::with_capacity(s.mesh.num_nodes());
            let mut fibers = Vec::with_capacity(s.mesh.num_nodes());
            let mut x = vec![0.0; n + 3];
            for i in 0..s.mesh.num_nodes() {
                let y = s.model_position(i);
                let mut v = vec![0.0; n + 3];
                v[0] = y[0] * r;
                v[1] = y[1] * r;
                for k in 0..n {
                    v[3 + k] = y[2 + k] * r;
                }
                exp_map_raw(&base, &v, &mut x);
                let (u, w) = psi_inv_frame(&x)?;
                nodes.push(u);
                fibers.push(w);
            }
            let mesh = Arc::new(s.mesh.with_nodes(nodes)?);
            DiscreteSurface::curved(mesh, s.frame.clone(), fibers, lambda)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surfaces::mesh::MeshOptions;

    fn wavy(n_nodes: usize, n: usize) -> Vec<DVector<f64>> {
        (0..n_nodes)
            .map(|i| {
                let t = i as f64 * 0.37;
                let mut v = DVector::zeros(n + 1);
                v[0] = 1.0;
                v[1] = 0.2 * t.sin();
                if n > 1 {
                    v[2] = 0.1 * t.cos();
                }
                v.normalize()
            })
            .collect()
    }

    #[test]
    fn ambient_points_lie_on_quadric() {
        let mesh = Arc::new(DiskMesh::disk(0.7, 24, &MeshOptions { rings: 5, ..Default::default() }).unwrap());
        let frame = PointedPlane::standard(2).unwrap();
        let f = wavy(mesh.num_nodes(), 2);
        let s = DiscreteSurface::curved(mesh.clone(), frame, f, 4.0).unwrap();
        for i in 0..mesh.num_nodes() {
            let x = s.ambient_point(i).unwrap();
            assert!((pair(x.as_slice(), x.as_slice()) + 1.0).abs() < 1e-12);
            // Model positions carry the scale.
            let y = s.model_position(i);
            assert!((pair(y, y) + 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn model_log_exp_roundtrip() {
        for kappa in [0.0, 0.3, 2.0] {
            let s = if kappa > 0.0 { 1.0 / f64::sqrt(kappa) } else { 1.0 };
            let mut y = vec![0.1, -0.2, 0.0, 0.05];
            let mut z = vec![0.4, 0.3, 0.0, -0.1];
            if kappa > 0.0 {
                // Put both on the quadric of radius s.
                for p in [&mut y, &mut z] {
                    let q = p[0] * p[0] + p[1] * p[1] - p[3] * p[3];
                    p[2] = (s * s + q).sqrt();
                }
            }
            let mut l = vec![0.0; 4];
            let d = model_log(kappa, &y, &z, &mut l).unwrap();
            assert!((pair(&l, &l).sqrt() - d).abs() < 1e-12);
            assert!((model_distance(kappa, &y, &z) - d).abs() < 1e-12);
            let mut back = vec![0.0; 4];
            model_exp(kappa, &y, &l, &mut back);
            for k in 0..4 {
                assert!((back[k] - z[k]).abs() < 1e-12, "kappa {kappa}");
            }
        }
    }

    #[test]
    fn rescale_roundtrip_through_flat() {
        let mesh = Arc::new(DiskMesh::disk(0.5, 24, &MeshOptions { rings: 4, ..Default::default() }).unwrap());
        let frame = PointedPlane::standard(1).unwrap();
        let f = wavy(mesh.num_nodes(), 1);
        let s = DiscreteSurface::curved(mesh, frame, f, 9.0).unwrap();
        let flat = rescale(&s, 0.0).unwrap();
        assert!(flat.is_flat());
        let back = rescale(&flat, 9.0).unwrap();
        for i in 0..s.mesh().num_nodes() {
            let (a, b) = (s.mesh().node(i), back.mesh().node(i));
            assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
            assert!((s.fiber(i) - back.fiber(i)).norm() < 1e-12);
        }
        // Blow-up preserves distances between nodes.
        for (i, j) in [(0, 5), (3, 17), (10, 40)] {
            let dc = model_distance(9.0, s.model_position(i), s.model_position(j));
            let df = model_distance(0.0, flat.model_position(i), flat.model_position(j));
            // Flat distance approximates the curved one near the basepoint.
            assert!((dc - df).abs() < 0.05 * dc, "{dc} {df}");
        }
    }

    #[test]
    fn rejects_bad_input() {
        let mesh = Arc::new(DiskMesh::disk(0.5, 12, &MeshOptions { rings: 2, ..Default::default() }).unwrap());
        let frame = PointedPlane::standard(1).unwrap();
        let f = vec![DVector::from_vec(vec![2.0, 0.0]); mesh.num_nodes()];
        assert!(DiscreteSurface::curved(mesh.clone(), frame.clone(), f, 1.0).is_err());
        let f = vec![DVector::from_vec(vec![1.0, 0.0]); mesh.num_nodes()];
        assert!(DiscreteSurface::curved(mesh, frame, f, 0.0).is_err());
    }
}
