//! Gradient and Hessian of the discrete area in the free fiber variables.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::BlockCsr;
use crate::surfaces::geometry::{
    dual_areas, fiber_component, fiber_scale, gram_margin, position_gradient, triangle_derivatives,
};
use crate::surfaces::{mean_curvature_residual, DiscreteSurface};

/// Free variables of a solve: one tangent block per interior node.
#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub interior: Vec<usize>,
    /// Variable index of each node, `usize::MAX` at boundary nodes.
    pub var: Vec<usize>,
    /// Block size (`n`).
    pub bs: usize,
    pattern: Vec<Vec<usize>>,
}

impl Layout {
    pub fn new(s: &DiscreteSurface) -> Self {
        let mesh = s.mesh();
        let interior = mesh.interior_nodes();
        let mut var = vec![usize::MAX; mesh.num_nodes()];
        for (k, &i) in interior.iter().enumerate() {
            var[i] = k;
        }
        let pattern = interior
            .iter()
            .map(|&i| {
                let mut row: Vec<usize> = mesh
                    .neighbors(i)
                    .iter()
                    .filter_map(|&j| (var[j] != usize::MAX).then_some(var[j]))
                    .collect();
                row.push(var[i]);
                row.sort_unstable();
                row.dedup();
                row
            })
            .collect();
        Self {
            interior,
            var,
            bs: s.n(),
            pattern,
        }
    }

    pub fn dim(&self) -> usize {
        self.interior.len() * self.bs
    }
}

/// Orthonormal basis of `f^⊥ ⊂ R^{n+1}` (columns), from a Householder reflection.
pub(crate) fn tangent_basis(f: &DVector<f64>) -> DMatrix<f64> {
    let m = f.len();
    let mut u = f.clone();
    let s = if f[0] >= 0.0 { 1.0 } else { -1.0 };
    u[0] += s;
    let uu = u.dot(&u);
    let mut h = DMatrix::identity(m, m);
    if uu > 0.0 {
        h -= (&u * u.transpose()) * (2.0 / uu);
    }
    h.columns(1, m - 1).into_owned()
}

/// Map from the free block of node `i` to its fiber coordinates.
pub(crate) fn fiber_basis(s: &DiscreteSurface, i: usize) -> DMatrix<f64> {
    if s.is_flat() {
        DMatrix::identity(s.n(), s.n())
    } else {
        tangent_basis(s.fiber(i))
    }
}

/// Riemannian gradient of the area in the free variables.
pub(crate) fn gradient(s: &DiscreteSurface, layout: &Layout) -> Result<Vec<f64>> {
    let g = position_gradient(s)?;
    let bs = layout.bs;
    let mut out = vec![0.0; layout.dim()];
    out.par_chunks_mut(bs).enumerate().for_each(|(k, o)| {
        let i = layout.interior[k];
        let gf = fiber_component(s, i, &g[i]) * fiber_scale(s, i);
        let t = fiber_basis(s, i);
        let r = t.transpose() * gf;
        o.copy_from_slice(r.as_slice());
    });
    Ok(out)
}

/// Lumped mass of the natural metric on fiber variations: `dual_i · scale_i²`.
pub(crate) fn lumped_mass(s: &DiscreteSurface, layout: &Layout) -> Result<Vec<f64>> {
    let dual = dual_areas(s)?;
    Ok(layout
        .interior
        .iter()
        .map(|&i| dual[i] * fiber_scale(s, i).powi(2))
        .collect())
}

/// Negated Riemannian Hessian of the area (positive definite near a stable critical point).
pub(crate) fn neg_hessian(s: &DiscreteSurface, layout: &Layout, guard: f64) -> Result<BlockCsr> {
    let mesh = s.mesh();
    let d = s.model_dim();
    let fd = d - 2;
    let bs = layout.bs;
    let bases: Vec<DMatrix<f64>> = layout.interior.par_iter().map(|&i| fiber_basis(s, i)).collect();
    let scales: Vec<f64> = (0..mesh.num_nodes()).map(|i| fiber_scale(s, i)).collect();
    let local: Vec<Option<Vec<(usize, usize, Vec<f64>)>>> = mesh
        .triangles()
        .par_iter()
        .map(|tri| {
            let x = [s.model_position(tri[0]), s.model_position(tri[1]), s.model_position(tri[2])];
            let td = triangle_derivatives(x, guard, true)?;
            let mut blocks = Vec::new();
            for p in 0..3 {
                let vp = layout.var[tri[p]];
                if vp == usize::MAX {
                    continue;
                }
                for q in 0..3 {
                    let vq = layout.var[tri[q]];
                    if vq == usize::MAX {
                        continue;
                    }
                    let c = scales[tri[p]] * scales[tri[q]];
                    let w = DMatrix::from_fn(fd, fd, |a, b| c * td.hess[(p * d + 2 + a) * 3 * d + q * d + 2 + b]);
                    let r = bases[vp].transpose() * w * &bases[vq];
                    let mut data = vec![0.0; bs * bs];
                    for a in 0..bs {
                        for b in 0..bs {
                            data[a * bs + b] = -r[(a, b)];
                        }
                    }
                    blocks.push((vp, vq, data));
                }
            }
            Some(blocks)
        })
        .collect();
    let mut h = BlockCsr::from_pattern(&layout.pattern, bs);
    for (t, l) in local.into_iter().enumerate() {
        let l = l.ok_or_else(|| Error::solver(format!("triangle {t} fails the spacelike guard")))?;
        for (r, c, data) in l {
            h.add_block(r, c, &data);
        }
    }
    if !s.is_flat() {
        // Curvature of the sphere: -(f · ∇f) on each diagonal block, negated.
        let g = position_gradient(s)?;
        for (k, &i) in layout.interior.iter().enumerate() {
            let gi = &g[i];
            let f = s.fiber(i);
            let mut fg = 0.0;
            for a in 0..fd {
                fg += f[a] * gi[2 + a];
            }
            fg *= scales[i];
            let mut data = vec![0.0; bs * bs];
            for a in 0..bs {
                data[a * bs + a] = fg;
            }
            h.add_block(k, k, &data);
        }
    }
    Ok(h)
}

/// Fiber values after moving along `dir` (free variables) by `alpha`.
pub(crate) fn retract(s: &DiscreteSurface, layout: &Layout, dir: &[f64], alpha: f64) -> Vec<DVector<f64>> {
    let bs = layout.bs;
    let mut fibers = s.fibers().to_vec();
    let updates: Vec<(usize, DVector<f64>)> = layout
        .interior
        .par_iter()
        .enumerate()
        .map(|(k, &i)| {
            let t = fiber_basis(s, i);
            let step = t * DVector::from_column_slice(&dir[k * bs..(k + 1) * bs]) * alpha;
            let f = s.fiber(i) + step;
            (i, if s.is_flat() { f } else { f.normalize() })
        })
        .collect();
    for (i, f) in updates {
        fibers[i] = f;
    }
    fibers
}

/// Smallest spacelike margin over triangles.
pub(crate) fn margin(s: &DiscreteSurface) -> f64 {
    s.mesh()
        .triangles()
        .par_iter()
        .map(|tri| {
            let (a, b, c) = crate::surfaces::geometry::edge_gram(
                s.model_position(tri[0]),
                s.model_position(tri[1]),
                s.model_position(tri[2]),
            );
            gram_margin(a, b, c)
        })
        .reduce(|| f64::INFINITY, f64::min)
}

/// Area, stationarity residual and margin of a surface, or `None` when some triangle fails
/// the guard.
pub(crate) fn evaluate(s: &DiscreteSurface, guard: f64) -> Option<(f64, f64, f64)> {
    let m = margin(s);
    if !(m >= guard) {
        return None;
    }
    let area = crate::surfaces::total_area(s).ok()?;
    let res = mean_curvature_residual(s).ok()?.max_norm;
    Some((area, res, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambient::PointedPlane;
    use crate::surfaces::{DiskMesh, MeshOptions};
    use std::sync::Arc;

    fn surface(flat: bool) -> DiscreteSurface {
        let mesh = Arc::new(DiskMesh::disk(0.5, 18, &MeshOptions { rings: 3, ..Default::default() }).unwrap());
        if flat {
            let vals = mesh
                .nodes()
                .iter()
                .map(|z| DVector::from_vec(vec![0.2 * z[0] * z[1], 0.1 * (2.0 * z[0]).sin()]))
                .collect();
            DiscreteSurface::flat(mesh, 2, vals).unwrap()
        } else {
            let f = mesh
                .nodes()
                .iter()
                .map(|z| DVector::from_vec(vec![1.0, 0.15 * (3.0 * z[1]).sin(), 0.1 * z[0]]).normalize())
                .collect();
            DiscreteSurface::curved(mesh, PointedPlane::standard(2).unwrap(), f, 2.0).unwrap()
        }
    }

    #[test]
    fn tangent_basis_is_orthonormal_complement() {
        for f in [vec![1.0, 0.0, 0.0], vec![-0.6, 0.8, 0.0], vec![0.0, 0.0, 1.0]] {
            let f = DVector::from_vec(f);
            let t = tangent_basis(&f);
            assert!((t.transpose() * &t - DMatrix::identity(2, 2)).norm() < 1e-14);
            assert!((t.transpose() * &f).norm() < 1e-14);
        }
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        for flat in [false, true] {
            let s = surface(flat);
            let layout = Layout::new(&s);
            let h = neg_hessian(&s, &layout, 0.0).unwrap().to_dense();
            let eps = 1e-6;
            // Riemannian Hessian at a point where the gradient is not zero: compare against
            // differences of the pulled-back gradient along retraction curves.
            for col in [0usize, 3, layout.dim() - 1] {
                let mut dir = vec![0.0; layout.dim()];
                dir[col] = 1.0;
                let pull = |a: f64| {
                    let fibers = retract(&s, &layout, &dir, a);
                    let mut t = s.clone();
                    t.set_fibers(fibers);
                    // Express the gradient at the moved point in the original bases.
                    let gm = crate::surfaces::area_gradient(&t).unwrap();
                    let mut out = vec![0.0; layout.dim()];
                    for (k, &i) in layout.interior.iter().enumerate() {
                        let b = fiber_basis(&s, i);
                        let r = b.transpose() * &gm[i];
                        out[k * layout.bs..(k + 1) * layout.bs].copy_from_slice(r.as_slice());
                    }
                    out
                };
                let (gp, gm) = (pull(eps), pull(-eps));
                for row in 0..layout.dim() {
                    let fd = (gp[row] - gm[row]) / (2.0 * eps);
                    let an = -h[(row, col)];
                    assert!((fd - an).abs() < 1e-5 * (1.0 + an.abs()), "flat={flat} ({row},{col}): {fd} vs {an}");
                }
            }
        }
    }
}
