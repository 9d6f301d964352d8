//! Discrete area, mean curvature, second fundamental form and curvature estimates.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix2};
use rayon::prelude::*;

use crate::ambient::{pair, qform};
use crate::error::{Error, Result};
use crate::surfaces::surface::{model_distance, model_tangent_projection, DiscreteSurface};

/// Default spacelike guard: a triangle is rejected when `λ_min(G) < GUARD · tr(G)`.
pub const SPACELIKE_GUARD: f64 = 1e-10;

#[inline]
fn eta(k: usize) -> f64 {
    if k < 2 {
        1.0
    } else {
        -1.0
    }
}

/// Gram matrix of the edge vectors `x1 - x0`, `x2 - x0`.
pub(crate) fn edge_gram(x0: &[f64], x1: &[f64], x2: &[f64]) -> (f64, f64, f64) {
    let (mut a, mut b, mut c) = (0.0, 0.0, 0.0);
    for k in 0..x0.len() {
        let e1 = x1[k] - x0[k];
        let e2 = x2[k] - x0[k];
        let s = eta(k);
        a += s * e1 * e1;
        b += s * e1 * e2;
        c += s * e2 * e2;
    }
    (a, b, c)
}

/// Smallest eigenvalue over trace of a 2×2 Gram; negative or tiny means not spacelike.
pub(crate) fn gram_margin(a: f64, b: f64, c: f64) -> f64 {
    let tr = a + c;
    if !(tr > 0.0) {
        return -1.0;
    }
    let lmin = tr / 2.0 - (((a - c) / 2.0).powi(2) + b * b).sqrt();
    lmin / tr
}

/// Area, gradient and (optionally) Hessian of one triangle with respect to its vertex
/// positions. `None` when the triangle fails the spacelike guard.
pub(crate) struct TriangleDerivs {
    /// Three covectors of length `d`.
    pub grad: [Vec<f64>; 3],
    /// Row-major `3d × 3d`.
    pub hess: Vec<f64>,
}

pub(crate) fn triangle_derivatives(x: [&[f64]; 3], guard: f64, with_hessian: bool) -> Option<TriangleDerivs> {
    let d = x[0].len();
    let (a, b, c) = edge_gram(x[0], x[1], x[2]);
    if gram_margin(a, b, c) < guard {
        return None;
    }
    let det = a * c - b * b;
    let sq = det.sqrt();
    let he1: Vec<f64> = (0..d).map(|k| eta(k) * (x[1][k] - x[0][k])).collect();
    let he2: Vec<f64> = (0..d).map(|k| eta(k) * (x[2][k] - x[0][k])).collect();
    // ∇D with respect to e1, e2.
    let gd1: Vec<f64> = (0..d).map(|k| 2.0 * c * he1[k] - 2.0 * b * he2[k]).collect();
    let gd2: Vec<f64> = (0..d).map(|k| 2.0 * a * he2[k] - 2.0 * b * he1[k]).collect();
    let f = 1.0 / (4.0 * sq);
    let ga1: Vec<f64> = gd1.iter().map(|v| v * f).collect();
    let ga2: Vec<f64> = gd2.iter().map(|v| v * f).collect();
    let g0: Vec<f64> = (0..d).map(|k| -ga1[k] - ga2[k]).collect();
    let mut hess = Vec::new();
    if with_hessian {
        let f2 = 1.0 / (8.0 * det * sq);
        // Hessian in (e1, e2), blocks h11, h12, h22.
        let mut h11 = vec![0.0; d * d];
        let mut h12 = vec![0.0; d * d];
        let mut h22 = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let id = if i == j { eta(i) } else { 0.0 };
                let d11 = 2.0 * c * id - 2.0 * he2[i] * he2[j];
                let d22 = 2.0 * a * id - 2.0 * he1[i] * he1[j];
                let d12 = 4.0 * he1[i] * he2[j] - 2.0 * he2[i] * he1[j] - 2.0 * b * id;
                h11[i * d + j] = f * d11 - f2 * gd1[i] * gd1[j];
                h22[i * d + j] = f * d22 - f2 * gd2[i] * gd2[j];
                h12[i * d + j] = f * d12 - f2 * gd1[i] * gd2[j];
            }
        }
        let n3 = 3 * d;
        hess = vec![0.0; n3 * n3];
        for i in 0..d {
            for j in 0..d {
                let a11 = h11[i * d + j];
                let a12 = h12[i * d + j];
                let a21 = h12[j * d + i];
                let a22 = h22[i * d + j];
                let blocks = [
                    [a11 + a12 + a21 + a22, -(a11 + a21), -(a12 + a22)],
                    [-(a11 + a12), a11, a12],
                    [-(a21 + a22), a21, a22],
                ];
                for (p, row) in blocks.iter().enumerate() {
                    for (q, v) in row.iter().enumerate() {
                        hess[(p * d + i) * n3 + q * d + j] = *v;
                    }
                }
            }
        }
    }
    Some(TriangleDerivs {
        grad: [g0, ga1, ga2],
        hess,
    })
}

fn tri_positions(s: &DiscreteSurface, t: usize) -> [&[f64]; 3] {
    let tri = s.mesh().triangles()[t];
    [s.model_position(tri[0]), s.model_position(tri[1]), s.model_position(tri[2])]
}

/// Induced Gram matrix of a triangle's edge vectors in the scaled metric.
pub fn induced_gram(s: &DiscreteSurface, tri: usize) -> Result<Matrix2<f64>> {
    if tri >= s.mesh().triangles().len() {
        return Err(Error::surface("triangle index out of range"));
    }
    let x = tri_positions(s, tri);
    let (a, b, c) = edge_gram(x[0], x[1], x[2]);
    Ok(Matrix2::new(a, b, b, c))
}

/// Smallest guard margin over all triangles.
pub fn spacelike_margin(s: &DiscreteSurface) -> f64 {
    (0..s.mesh().triangles().len())
        .into_par_iter()
        .map(|t| {
            let x = tri_positions(s, t);
            let (a, b, c) = edge_gram(x[0], x[1], x[2]);
            gram_margin(a, b, c)
        })
        .reduce(|| f64::INFINITY, f64::min)
}

/// Sum of triangle areas `½ sqrt(det G)`; fails on a non-spacelike triangle.
pub fn total_area(s: &DiscreteSurface) -> Result<f64> {
    let areas: Vec<Option<f64>> = (0..s.mesh().triangles().len())
        .into_par_iter()
        .map(|t| {
            let x = tri_positions(s, t);
            let (a, b, c) = edge_gram(x[0], x[1], x[2]);
            let det = a * c - b * b;
            (a + c > 0.0 && det > 0.0).then(|| 0.5 * det.sqrt())
        })
        .collect();
    let mut sum = 0.0;
    for (t, a) in areas.iter().enumerate() {
        sum += a.ok_or_else(|| Error::surface(format!("triangle {t} is not spacelike")))?;
    }
    Ok(sum)
}

/// Barycentric dual areas (a third of the incident triangle areas).
pub fn dual_areas(s: &DiscreteSurface) -> Result<Vec<f64>> {
    let mesh = s.mesh();
    let mut dual = vec![0.0; mesh.num_nodes()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let x = tri_positions(s, t);
        let (a, b, c) = edge_gram(x[0], x[1], x[2]);
        let det = a * c - b * b;
        if !(det > 0.0 && a + c > 0.0) {
            return Err(Error::surface(format!("triangle {t} is not spacelike")));
        }
        for &v in tri {
            dual[v] += det.sqrt() / 6.0;
        }
    }
    Ok(dual)
}

/// Node-wise area gradient in the fiber directions, divided by the dual area.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    /// Tangent vectors in fiber coordinates; zero at boundary nodes.
    pub per_node: Vec<DVector<f64>>,
    pub max_norm: f64,
}

/// Gradient of the area with respect to model positions, per node.
pub(crate) fn position_gradient(s: &DiscreteSurface) -> Result<Vec<Vec<f64>>> {
    let mesh = s.mesh();
    let d = s.model_dim();
    let local: Vec<Option<TriangleDerivs>> = (0..mesh.triangles().len())
        .into_par_iter()
        .map(|t| triangle_derivatives(tri_positions(s, t), 0.0, false))
        .collect();
    let mut g = vec![vec![0.0; d]; mesh.num_nodes()];
    for (t, l) in local.into_iter().enumerate() {
        let l = l.ok_or_else(|| Error::surface(format!("triangle {t} is not spacelike")))?;
        for (k, &v) in mesh.triangles()[t].iter().enumerate() {
            for c in 0..d {
                g[v][c] += l.grad[k][c];
            }
        }
    }
    Ok(g)
}

/// Projects the fiber part of a position covector onto the tangent space of the fiber.
pub(crate) fn fiber_component(s: &DiscreteSurface, i: usize, g: &[f64]) -> DVector<f64> {
    let off = 2;
    let mut v = DVector::from_fn(g.len() - off, |k, _| g[off + k]);
    if !s.is_flat() {
        let f = s.fiber(i);
        let c = v.dot(f);
        v -= f * c;
    }
    v
}

/// Fiber-value scale `∂Y/∂f` at a node: `β / sqrt(λ)` for curved surfaces, 1 for flat ones.
pub(crate) fn fiber_scale(s: &DiscreteSurface, i: usize) -> f64 {
    if s.is_flat() {
        1.0
    } else {
        let z = s.mesh().node(i);
        let r2 = z[0] * z[0] + z[1] * z[1];
        (1.0 + r2) / (1.0 - r2) / s.lambda().sqrt()
    }
}

/// Exact gradient of [`total_area`] with respect to the fiber values, tangent to `S^n`
/// (curved) or in `R^n` (flat). Boundary nodes are fixed and get zero.
pub fn area_gradient(s: &DiscreteSurface) -> Result<Vec<DVector<f64>>> {
    let g = position_gradient(s)?;
    let mesh = s.mesh();
    Ok((0..mesh.num_nodes())
        .map(|i| {
            if mesh.is_boundary(i) {
                DVector::zeros(s.fiber(i).len())
            } else {
                fiber_component(s, i, &g[i]) * fiber_scale(s, i)
            }
        })
        .collect())
}

pub fn mean_curvature_residual(s: &DiscreteSurface) -> Result<ResidualReport> {
    let g = position_gradient(s)?;
    let dual = dual_areas(s)?;
    let mesh = s.mesh();
    let mut per_node = Vec::with_capacity(mesh.num_nodes());
    let mut max_norm = 0.0f64;
    for i in 0..mesh.num_nodes() {
        if mesh.is_boundary(i) {
            per_node.push(DVector::zeros(s.fiber(i).len()));
            continue;
        }
        let v = fiber_component(s, i, &g[i]) / dual[i];
        max_norm = max_norm.max(v.norm());
        per_node.push(v);
    }
    Ok(ResidualReport { per_node, max_norm })
}

/// Angle-defect Gauss curvature at an interior node. Triangle angles are computed from
/// the geodesic distances between the vertices.
pub fn gauss_curvature(s: &DiscreteSurface, node: usize) -> Result<f64> {
    let mesh = s.mesh();
    if node >= mesh.num_nodes() {
        return Err(Error::surface("node index out of range"));
    }
    if mesh.is_boundary(node) {
        return Err(Error::surface("curvature is defined at interior nodes only"));
    }
    let kappa = s.kappa();
    let mut angle = 0.0;
    let mut area = 0.0;
    for &t in mesh.node_triangles(node) {
        let tri = mesh.triangles()[t];
        let k = tri.iter().position(|&v| v == node).unwrap();
        let p = s.model_position(tri[k]);
        let q = s.model_position(tri[(k + 1) % 3]);
        let r = s.model_position(tri[(k + 2) % 3]);
        let a = model_distance(kappa, p, q);
        let b = model_distance(kappa, p, r);
        let c = model_distance(kappa, q, r);
        let cosg = ((a * a + b * b - c * c) / (2.0 * a * b)).clamp(-1.0, 1.0);
        let g = cosg.acos();
        angle += g;
        area += 0.5 * a * b * g.sin();
    }
    if !(area > 0.0) {
        return Err(Error::surface("degenerate star"));
    }
    Ok((2.0 * PI - angle) / (area / 3.0))
}

/// Local quadratic fit of the surface at a node in normal coordinates.
///
/// `II(e_a, e_b) = Σ_k coeffs[k][(a, b)] · normals[k]`, with `tangent` orthonormal
/// (`q = 1`) and `normals` orthonormal (`q = -1`) in model coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalFit {
    pub node: usize,
    pub point: Vec<f64>,
    pub tangent: [Vec<f64>; 2],
    pub normals: Vec<Vec<f64>>,
    pub coeffs: Vec<Matrix2<f64>>,
    /// Root-mean-square misfit of the quadratic model.
    pub misfit: f64,
}

impl LocalFit {
    /// `Σ_k C^k C^k`: the form `(x, y) ↦ -Σ_i q(II(x, e_i), II(y, e_i))`.
    pub fn squared_form(&self) -> Matrix2<f64> {
        self.coeffs.iter().fold(Matrix2::zeros(), |acc, c| acc + c * c)
    }

    /// `‖II‖² = max_{|v|=1} -Σ_i q(II(v, e_i), II(v, e_i))`.
    pub fn norm_sq(&self) -> f64 {
        let m = self.squared_form();
        sym2_max_eig(&m)
    }

    /// Second fundamental form applied to two basis directions, as a model vector.
    pub fn ii(&self, a: usize, b: usize) -> Vec<f64> {
        let d = self.point.len();
        let mut v = vec![0.0; d];
        for (c, nk) in self.coeffs.iter().zip(&self.normals) {
            for i in 0..d {
                v[i] += c[(a, b)] * nk[i];
            }
        }
        v
    }

    /// Gauss equation with ambient curvature `-kappa`:
    /// `K = -kappa + <II11, II22> - q(II12)`.
    pub fn gauss_from_ii(&self, kappa: f64) -> f64 {
        let mut k = -kappa;
        for c in &self.coeffs {
            // q restricted to the normal bundle is minus the coefficient dot product.
            k += -c[(0, 0)] * c[(1, 1)] + c[(0, 1)] * c[(0, 1)];
        }
        k
    }

    /// Mean curvature vector coefficients `tr II`.
    pub fn mean_curvature_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| (c[(0, 0)] + c[(1, 1)]).powi(2)).sum()
    }

    /// Coordinates of a model vector in the fitted tangent basis.
    pub fn tangent_coords(&self, v: &[f64]) -> [f64; 2] {
        [pair(v, &self.tangent[0]), pair(v, &self.tangent[1])]
    }
}

fn sym2_max_eig(m: &Matrix2<f64>) -> f64 {
    let tr = m[(0, 0)] + m[(1, 1)];
    let disc = (((m[(0, 0)] - m[(1, 1)]) / 2.0).powi(2) + m[(0, 1)] * m[(1, 0)]).max(0.0).sqrt();
    tr / 2.0 + disc
}

/// Completes `fixed` (q-orthonormal, positive) to a basis of the tangent space of the model at
/// `y` by `count` negative vectors, Gram-Schmidt with pivoting on the standard basis.
fn negative_complement(kappa: f64, y: &[f64], fixed: &[Vec<f64>], count: usize) -> Result<Vec<Vec<f64>>> {
    let d = y.len();
    let mut cands: Vec<Vec<f64>> = (0..d)
        .map(|k| {
            let mut e = vec![0.0; d];
            e[k] = 1.0;
            model_tangent_projection(kappa, y, &mut e);
            for f in fixed {
                let c = pair(&e, f);
                for i in 0..d {
                    e[i] -= c * f[i];
                }
            }
            e
        })
        .collect();
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(count);
    while out.len() < count {
        if let Some(last) = out.last() {
            for c in cands.iter_mut() {
                let coef = -pair(c, last);
                for i in 0..d {
                    c[i] -= coef * last[i];
                }
            }
        }
        let (mut bi, mut bq) = (usize::MAX, 0.0);
        for (i, c) in cands.iter().enumerate() {
            let qc = qform(c);
            if qc < -bq {
                bq = -qc;
                bi = i;
            }
        }
        if bi == usize::MAX || bq < 1e-10 {
            return Err(Error::surface("normal frame construction failed"));
        }
        let c = cands.remove(bi);
        let s = bq.sqrt();
        out.push(c.iter().map(|v| v / s).collect());
    }
    Ok(out)
}

/// Local quadratic fit at an interior node (1-ring, enlarged to the 2-ring when the 1-ring
/// cannot determine the quadratic model).
pub fn local_fit(s: &DiscreteSurface, node: usize) -> Result<LocalFit> {
    if s.mesh().is_boundary(node) {
        return Err(Error::surface("node has no full 1-ring"));
    }
    local_fit_impl(s, node, false)
}

/// As [`local_fit`] but also accepts boundary nodes, using their 2-ring.
pub fn local_fit_any(s: &DiscreteSurface, node: usize) -> Result<LocalFit> {
    local_fit_impl(s, node, s.mesh().is_boundary(node))
}

fn local_fit_impl(s: &DiscreteSurface, node: usize, force_two_ring: bool) -> Result<LocalFit> {
    let mesh = s.mesh();
    if node >= mesh.num_nodes() {
        return Err(Error::surface("node index out of range"));
    }
    let one: Vec<usize> = mesh.neighbors(node).to_vec();
    let candidates = if force_two_ring || one.len() < 6 {
        vec![mesh.two_ring(node)]
    } else {
        vec![one, mesh.two_ring(node)]
    };
    let mut last_err = Error::surface("fit failed");
    for nb in candidates {
        match fit_on(s, node, &nb) {
            Ok(f) => return Ok(f),
            Err(e) => last_err = e,
        }
    }
    Err(last_err)
}

fn fit_on(s: &DiscreteSurface, node: usize, nb: &[usize]) -> Result<LocalFit> {
    let d = s.model_dim();
    let kappa = s.kappa();
    let y = s.model_position(node).to_vec();
    let z0 = s.mesh().node(node);
    let nn = nb.len();
    if nn < 5 {
        return Err(Error::surface("stencil too small for a quadratic fit"));
    }
    let mut logs = Vec::with_capacity(nn);
    for &j in nb {
        let mut l = vec![0.0; d];
        s.log_between(node, j, &mut l)
            .ok_or_else(|| Error::surface("neighbour is causally related to the node"))?;
        logs.push(l);
    }
    // Initial tangent plane from the parameter offsets.
    let zmat = DMatrix::from_fn(2, nn, |r, c| s.mesh().node(nb[c])[r] - z0[r]);
    let lmat = DMatrix::from_fn(d, nn, |r, c| logs[c][r]);
    let zzt = &zmat * zmat.transpose();
    let inv = zzt.try_inverse().ok_or_else(|| Error::surface("degenerate stencil"))?;
    let t = &lmat * zmat.transpose() * inv;
    let mut t1: Vec<f64> = t.column(0).iter().copied().collect();
    let mut t2: Vec<f64> = t.column(1).iter().copied().collect();
    model_tangent_projection(kappa, &y, &mut t1);
    model_tangent_projection(kappa, &y, &mut t2);

    let n = d - 2 - if kappa > 0.0 { 1 } else { 0 };
    let mut result = None;
    for _ in 0..8 {
        // q-orthonormalize the tangent pair.
        let q1 = qform(&t1);
        if !(q1 > 0.0) {
            return Err(Error::surface("fitted tangent plane is not spacelike"));
        }
        let e1: Vec<f64> = t1.iter().map(|v| v / q1.sqrt()).collect();
        let c = pair(&t2, &e1);
        let mut e2: Vec<f64> = (0..d).map(|k| t2[k] - c * e1[k]).collect();
        let q2 = qform(&e2);
        if !(q2 > 0.0) {
            return Err(Error::surface("fitted tangent plane is not spacelike"));
        }
        e2.iter_mut().for_each(|v| *v /= q2.sqrt());
        let normals = negative_complement(kappa, &y, &[e1.clone(), e2.clone()], n)?;
        let sc: Vec<[f64; 2]> = logs.iter().map(|l| [pair(l, &e1), pair(l, &e2)]).collect();
        let a = DMatrix::from_fn(nn, 5, |r, col| {
            let [s1, s2] = sc[r];
            match col {
                0 => s1,
                1 => s2,
                2 => 0.5 * s1 * s1,
                3 => s1 * s2,
                _ => 0.5 * s2 * s2,
            }
        });
        let svd = a.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        // Columns scale like h and h^2; compare against h^2 relative size.
        let hs = sc.iter().map(|v| v[0].abs().max(v[1].abs())).fold(0.0, f64::max);
        if !(smin > 1e-8 * smax * hs.min(1.0)) {
            return Err(Error::surface("quadratic fit is rank deficient"));
        }
        let mut coeffs = Vec::with_capacity(n);
        let mut lin: Vec<[f64; 2]> = Vec::with_capacity(n);
        let mut miss = 0.0;
        for nk in &normals {
            let rhs = DVector::from_fn(nn, |r, _| -pair(&logs[r], nk));
            let sol = svd.solve(&rhs, 1e-14).map_err(|e| Error::surface(e.to_string()))?;
            let res = &a * &sol - &rhs;
            miss += res.norm_squared();
            lin.push([sol[0], sol[1]]);
            coeffs.push(Matrix2::new(sol[2], sol[3], sol[3], sol[4]));
        }
        let tilt = lin.iter().map(|l| l[0].abs().max(l[1].abs())).fold(0.0, f64::max);
        result = Some(LocalFit {
            node,
            point: y.clone(),
            tangent: [e1.clone(), e2.clone()],
            normals: normals.clone(),
            coeffs,
            misfit: (miss / (nn * n.max(1)) as f64).sqrt(),
        });
        if tilt < 1e-13 {
            break;
        }
        // Tilt the plane by the linear part and refit.
        for k in 0..d {
            t1[k] = e1[k];
            t2[k] = e2[k];
            for (l, nk) in lin.iter().zip(&normals) {
                t1[k] += l[0] * nk[k];
                t2[k] += l[1] * nk[k];
            }
        }
        model_tangent_projection(kappa, &y, &mut t1);
        model_tangent_projection(kappa, &y, &mut t2);
    }
    result.ok_or_else(|| Error::surface("fit failed"))
}

/// `‖II‖²` at an interior node from the local fit.
pub fn second_fundamental_norm(s: &DiscreteSurface, node: usize) -> Result<f64> {
    Ok(local_fit(s, node)?.norm_sq())
}

/// Normalized Cauchy-Riemann defect of the Gauss lift at one node:
/// `‖TΓ∘j - J∘TΓ‖ / ‖TΓ‖` with `TΓ(X) = (X, II(X, ·))` and `J(u, A) = (iu, A∘i)`.
pub fn gauss_lift_defect(fit: &LocalFit) -> f64 {
    // Rotation by a right angle in the fitted tangent basis.
    let rot = |v: [f64; 2]| [-v[1], v[0]];
    let ii = |x: [f64; 2], y: [f64; 2], k: usize| {
        let c = &fit.coeffs[k];
        let mut s = 0.0;
        for a in 0..2 {
            for b in 0..2 {
                s += x[a] * y[b] * c[(a, b)];
            }
        }
        s
    };
    let basis = [[1.0, 0.0], [0.0, 1.0]];
    // Defect applied to basis directions: D(X)(e_b) = II(jX, e_b) - II(X, i e_b).
    let mut dm = Matrix2::zeros();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for x in basis {
        let mut v = Vec::new();
        for eb in basis {
            for k in 0..fit.coeffs.len() {
                v.push(ii(rot(x), eb, k) - ii(x, rot(eb), k));
            }
        }
        rows.push(v);
    }
    for a in 0..2 {
        for b in 0..2 {
            dm[(a, b)] = rows[a].iter().zip(&rows[b]).map(|(p, q)| p * q).sum();
        }
    }
    let num = sym2_max_eig(&dm);
    let den = 1.0 + fit.norm_sq();
    (num / den).sqrt()
}

/// Largest Gauss-lift defect over interior nodes.
pub fn gauss_lift_residual(s: &DiscreteSurface) -> Result<f64> {
    let nodes = s.mesh().interior_nodes();
    let vals: Vec<Result<f64>> = nodes
        .par_iter()
        .map(|&i| local_fit(s, i).map(|f| gauss_lift_defect(&f)))
        .collect();
    let mut m = 0.0f64;
    for v in vals {
        m = m.max(v?);
    }
    Ok(m)
}

/// First and second Grams of a triangle: `g_I` and `g_II = g_I + Q`, with
/// `Q(x, y) = -tr g_N(II(x, ·), II(y, ·))` averaged over the vertex fits.
#[derive(Debug, Clone, PartialEq)]
pub struct G2Gram {
    pub g1: Matrix2<f64>,
    pub g2: Matrix2<f64>,
    /// Largest eigenvalue of `g1^{-1} g2`.
    pub max_ratio: f64,
    /// `1 + max ‖II‖²` over the vertices.
    pub bound: f64,
}

pub fn g2_gram(s: &DiscreteSurface, tri: usize) -> Result<G2Gram> {
    let g1 = induced_gram(s, tri)?;
    let t = s.mesh().triangles()[tri];
    let x0 = s.model_position(t[0]);
    let e: Vec<Vec<f64>> = (1..3)
        .map(|k| {
            let xk = s.model_position(t[k]);
            (0..x0.len()).map(|i| xk[i] - x0[i]).collect()
        })
        .collect();
    let mut q = Matrix2::zeros();
    let mut nmax = 0.0f64;
    for &v in &t {
        let fit = local_fit_any(s, v)?;
        let sf = fit.squared_form();
        nmax = nmax.max(fit.norm_sq());
        let c: Vec<[f64; 2]> = e.iter().map(|ev| fit.tangent_coords(ev)).collect();
        for a in 0..2 {
            for b in 0..2 {
                let mut acc = 0.0;
                for i in 0..2 {
                    for j in 0..2 {
                        acc += c[a][i] * sf[(i, j)] * c[b][j];
                    }
                }
                q[(a, b)] += acc / 3.0;
            }
        }
    }
    let g2 = g1 + q;
    let inv = g1.try_inverse().ok_or_else(|| Error::surface("degenerate triangle"))?;
    let m = inv * g2;
    let tr = m.trace();
    let det = m.determinant();
    let max_ratio = tr / 2.0 + ((tr / 2.0).powi(2) - det).max(0.0).sqrt();
    Ok(G2Gram {
        g1,
        g2,
        max_ratio,
        bound: 1.0 + nmax,
    })
}

/// Pairwise acausality of the nodes and the triangle-wise graph slope bound.
#[derive(Debug, Clone, PartialEq)]
pub struct AcausalityReport {
    pub ok: bool,
    /// Largest `<x_i, x_j>` over distinct node pairs (curved), or the smallest `q(x_i - x_j)`
    /// with the sign flipped (flat).
    pub worst_pairing: f64,
    pub slope_ok: bool,
    /// Largest `‖df‖ (1 + |z|²) / 2` over triangles (must stay below 1).
    pub worst_slope_ratio: f64,
}

pub fn acausality_check(s: &DiscreteSurface) -> AcausalityReport {
    let nn = s.mesh().num_nodes();
    let flat = s.is_flat();
    let lam = s.lambda();
    let worst = (0..nn)
        .into_par_iter()
        .map(|i| {
            let xi = s.model_position(i);
            let mut w = f64::NEG_INFINITY;
            for j in (i + 1)..nn {
                let xj = s.model_position(j);
                let v = if flat {
                    let dv: Vec<f64> = xi.iter().zip(xj).map(|(a, b)| a - b).collect();
                    -qform(&dv)
                } else {
                    pair(xi, xj) * lam
                };
                w = w.max(v);
            }
            w
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    let ok = if flat { worst < 0.0 } else { worst <= -1.0 + 1e-8 };
    let mut slope = 0.0f64;
    if !flat {
        for tri in s.mesh().triangles() {
            let z: Vec<[f64; 2]> = tri.iter().map(|&v| s.mesh().node(v)).collect();
            let zm = Matrix2::new(z[1][0] - z[0][0], z[2][0] - z[0][0], z[1][1] - z[0][1], z[2][1] - z[0][1]);
            let Some(zi) = zm.try_inverse() else { continue };
            let f0 = s.fiber(tri[0]);
            let fm = DMatrix::from_fn(f0.len(), 2, |r, c| s.fiber(tri[c + 1])[r] - f0[r]);
            let df = fm * DMatrix::from_row_slice(2, 2, zi.as_slice()).transpose();
            let sv = df.singular_values().max();
            let zc = [(z[0][0] + z[1][0] + z[2][0]) / 3.0, (z[0][1] + z[1][1] + z[2][1]) / 3.0];
            let r2 = zc[0] * zc[0] + zc[1] * zc[1];
            slope = slope.max(sv * (1.0 + r2) / 2.0);
        }
    }
    AcausalityReport {
        ok,
        worst_pairing: worst,
        slope_ok: slope < 1.0,
        worst_slope_ratio: slope,
    }
}
