//! Structured polar triangulations of star-shaped disks.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Radial placement of the interior rings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Grading {
    /// Ring `k` sits at the fraction `k / rings` of the way from the centre to the boundary.
    Uniform,
    /// Rings are circles about the origin of the Poincaré disk; the hyperbolic distance
    /// between ring `j` and `j + 1` is `min(spacing · growth^j, max_spacing)`, and angular
    /// counts keep the triangles roughly isotropic in the hyperbolic metric. An outer band
    /// of evenly spread rings follows the boundary shape. `rings` is unused.
    Hyperbolic { spacing: f64, growth: f64, max_spacing: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshOptions {
    /// Number of rings between the centre and the boundary (uniform grading).
    pub rings: usize,
    /// Rotational symmetry of the angular node counts.
    pub sectors: usize,
    pub grading: Grading,
}

impl Default for MeshOptions {
    fn default() -> Self {
        Self {
            rings: 16,
            sectors: 6,
            grading: Grading::Uniform,
        }
    }
}

/// A triangulated disk in the parameter plane.
#[derive(Debug, Clone, PartialEq)]
pub struct DiskMesh {
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<usize>,
    is_boundary: Vec<bool>,
    neighbors: Vec<Vec<usize>>,
    node_triangles: Vec<Vec<usize>>,
    rings: Vec<Vec<usize>>,
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Node count of a ring that should hold roughly `target` nodes, as `sectors · 2^k`.
fn ring_count(target: f64, sectors: usize, cap: usize) -> usize {
    let ratio = (target / sectors as f64).max(1.0);
    let k = ratio.log2().round() as u32;
    (sectors << k.min(40)).min(cap).max(3)
}

impl DiskMesh {
    /// Builds adjacency from explicit parts. Triangles must be counter-clockwise and
    /// `boundary` must list the boundary cycle in order.
    pub fn from_parts(nodes: Vec<[f64; 2]>, triangles: Vec<[usize; 3]>, boundary: Vec<usize>) -> Result<Self> {
        let nn = nodes.len();
        let mut is_boundary = vec![false; nn];
        for &b in &boundary {
            if b >= nn {
                return Err(Error::surface("boundary index out of range"));
            }
            is_boundary[b] = true;
        }
        let mut neighbors = vec![Vec::new(); nn];
        let mut node_triangles = vec![Vec::new(); nn];
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nn) {
                return Err(Error::surface("triangle index out of range"));
            }
            let a = cross(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
            if !(a > 0.0) {
                return Err(Error::surface(format!("triangle {t} is degenerate or clockwise")));
            }
            for k in 0..3 {
                let v = tri[k];
                node_triangles[v].push(t);
                for l in 0..3 {
                    if l != k {
                        neighbors[v].push(tri[l]);
                    }
                }
            }
        }
        for nb in neighbors.iter_mut() {
            nb.sort_unstable();
            nb.dedup();
        }
        if neighbors.iter().any(|nb| nb.is_empty()) {
            return Err(Error::surface("mesh has isolated nodes"));
        }
        Ok(Self {
            nodes,
            triangles,
            boundary,
            is_boundary,
            neighbors,
            node_triangles,
            rings: Vec::new(),
        })
    }

    /// Square grid on `[-1, 1]²` split along one diagonal family and mapped onto the disk of
    /// radius `radius` by `(x, y) ↦ (x √(1 - y²/2), y √(1 - x²/2))`. Every interior node has
    /// valence 6 and a centrally symmetric stencil, which keeps pointwise quantities such as
    /// fitted curvatures free of mesh artefacts. `k` is the number of cells per half side.
    pub fn mapped_grid(radius: f64, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::surface("mapped grid needs at least 2 cells per half side"));
        }
        if !(radius > 0.0 && radius < 1.0) {
            return Err(Error::surface("disk radius must lie in (0, 1)"));
        }
        let side = 2 * k + 1;
        let idx = |i: usize, j: usize| j * side + i;
        let mut nodes = Vec::with_capacity(side * side);
        for j in 0..side {
            for i in 0..side {
                let x = (i as f64 - k as f64) / k as f64;
                let y = (j as f64 - k as f64) / k as f64;
                nodes.push([
                    radius * x * (1.0 - y * y / 2.0).sqrt(),
                    radius * y * (1.0 - x * x / 2.0).sqrt(),
                ]);
            }
        }
        let mut triangles = Vec::with_capacity(2 * (side - 1) * (side - 1));
        for j in 0..side - 1 {
            for i in 0..side - 1 {
                triangles.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
                triangles.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
            }
        }
        // Counter-clockwise from the midpoint of the right edge.
        let last = side - 1;
        let mut boundary = Vec::with_capacity(4 * (side - 1));
        boundary.extend((k..last).map(|j| idx(last, j)));
        boundary.extend((1..=last).rev().map(|i| idx(i, last)));
        boundary.extend((1..=last).rev().map(|j| idx(0, j)));
        boundary.extend((0..last).map(|i| idx(i, 0)));
        boundary.extend((0..k).map(|j| idx(last, j)));
        Self::from_parts(nodes, triangles, boundary)
    }

    /// Polar mesh between `center` and a boundary polygon that is star-shaped about it.
    /// The boundary nodes of the mesh are exactly `boundary`, listed counter-clockwise.
    pub fn polar(center: [f64; 2], boundary: &[[f64; 2]], opts: &MeshOptions) -> Result<Self> {
        let m = boundary.len();
        if m < 3 {
            return Err(Error::surface("boundary needs at least 3 nodes"));
        }
        if opts.sectors < 3 {
            return Err(Error::surface("at least 3 sectors are required"));
        }
        // Polar description of the boundary about the centre, angles unwrapped.
        let mut phi = Vec::with_capacity(m + 1);
        let mut rad = Vec::with_capacity(m + 1);
        for b in boundary {
            let dx = b[0] - center[0];
            let dy = b[1] - center[1];
            rad.push((dx * dx + dy * dy).sqrt());
            phi.push(dy.atan2(dx));
        }
        for j in 1..m {
            let mut d = phi[j] - phi[j - 1];
            while d <= -PI {
                d += 2.0 * PI;
            }
            while d > PI {
                d -= 2.0 * PI;
            }
            if !(d > 0.0) {
                return Err(Error::surface(format!(
                    "boundary is not star-shaped about the centre (node {j})"
                )));
            }
            phi[j] = phi[j - 1] + d;
        }
        let closing = phi[0] + 2.0 * PI - phi[m - 1];
        if !(closing > 0.0 && closing < PI) || rad.iter().any(|&r| !(r > 0.0)) {
            return Err(Error::surface("boundary is not star-shaped about the centre"));
        }
        phi.push(phi[0] + 2.0 * PI);
        rad.push(rad[0]);
        let polar_at = |t: f64| -> (f64, f64) {
            let t = t.rem_euclid(m as f64);
            let j = (t.floor() as usize).min(m - 1);
            let f = t - j as f64;
            (phi[j] + f * (phi[j + 1] - phi[j]), rad[j] + f * (rad[j + 1] - rad[j]))
        };

        // Ring radii as functions of the boundary radius.
        enum Profile {
            Uniform(usize),
            /// Core rings `(distance, spacing)`, then `outer` rings spread evenly between the
            /// last core ring and the boundary.
            Hyper {
                core: Vec<(f64, f64)>,
                outer: usize,
                d_core: f64,
                d_max: f64,
                step: f64,
            },
        }
        let profile = match opts.grading {
            Grading::Uniform => {
                if opts.rings < 1 {
                    return Err(Error::surface("at least one ring is required"));
                }
                Profile::Uniform(opts.rings)
            }
            Grading::Hyperbolic {
                spacing,
                growth,
                max_spacing,
            } => {
                if center != [0.0, 0.0] {
                    return Err(Error::surface("hyperbolic grading needs the disk origin as centre"));
                }
                if !(spacing > 0.0) || !(growth >= 1.0) || !(max_spacing >= spacing) {
                    return Err(Error::surface("invalid hyperbolic grading parameters"));
                }
                if rad.iter().any(|&r| r >= 1.0) {
                    return Err(Error::surface("boundary leaves the unit disk"));
                }
                let dist = |r: f64| 2.0 * r.atanh();
                let dmin = dist(rad.iter().copied().fold(f64::INFINITY, f64::min));
                let dmax = dist(rad.iter().copied().fold(0.0, f64::max));
                let step_at = |j: usize| (spacing * growth.powi(j as i32)).min(max_spacing);
                let mut core = Vec::new();
                let mut d = 0.0;
                loop {
                    let next = d + step_at(core.len());
                    let after = step_at(core.len() + 1);
                    if next + 0.5 * after > dmin {
                        break;
                    }
                    d = next;
                    core.push((d, step_at(core.len())));
                }
                let step = step_at(core.len());
                let outer = ((dmax - d) / step).ceil().max(1.0) as usize;
                Profile::Hyper {
                    core,
                    outer,
                    d_core: d,
                    d_max: dmax,
                    step,
                }
            }
        };

        let nrings = match &profile {
            Profile::Uniform(k) => *k,
            Profile::Hyper { core, outer, .. } => core.len() + outer,
        };
        let mut counts = Vec::with_capacity(nrings + 1);
        counts.push(1usize);
        for k in 1..nrings {
            let target = match &profile {
                Profile::Uniform(_) => 2.0 * PI * k as f64,
                Profile::Hyper {
                    core,
                    outer,
                    d_core,
                    d_max,
                    step,
                } => {
                    if k <= core.len() {
                        let (d, s) = core[k - 1];
                        2.0 * PI * d.sinh() / s
                    } else {
                        let f = (k - core.len()) as f64 / *outer as f64;
                        let d = d_core + f * (d_max - d_core);
                        2.0 * PI * d.sinh() / step
                    }
                }
            };
            let c = ring_count(target, opts.sectors, m);
            let prev = *counts.last().unwrap();
            counts.push(c.max(if prev == 1 { 3 } else { prev }));
        }
        counts.push(m);

        let mut nodes: Vec<[f64; 2]> = vec![center];
        let mut rings: Vec<Vec<usize>> = vec![vec![0]];
        for k in 1..=nrings {
            let nk = counts[k];
            let mut ring = Vec::with_capacity(nk);
            for i in 0..nk {
                if k == nrings {
                    ring.push(nodes.len());
                    nodes.push(boundary[i]);
                    continue;
                }
                let t = i as f64 * m as f64 / nk as f64;
                let (ang, rb) = polar_at(t);
                let r = match &profile {
                    Profile::Uniform(kk) => rb * k as f64 / *kk as f64,
                    Profile::Hyper {
                        core, outer, d_core, ..
                    } => {
                        let d = if k <= core.len() {
                            core[k - 1].0
                        } else {
                            let db = 2.0 * rb.atanh();
                            d_core + (k - core.len()) as f64 / *outer as f64 * (db - d_core)
                        };
                        (d / 2.0).tanh()
                    }
                };
                ring.push(nodes.len());
                nodes.push([center[0] + r * ang.cos(), center[1] + r * ang.sin()]);
            }
            rings.push(ring);
        }

        let mut triangles = Vec::new();
        let r1 = &rings[1];
        for i in 0..r1.len() {
            triangles.push([0, r1[i], r1[(i + 1) % r1.len()]]);
        }
        for k in 1..nrings {
            let a = &rings[k];
            let b = &rings[k + 1];
            let (na, nb) = (a.len(), b.len());
            let (mut i, mut j) = (0usize, 0usize);
            while i < na || j < nb {
                let pa = (i + 1) as f64 / na as f64;
                let pb = (j + 1) as f64 / nb as f64;
                if j >= nb || (i < na && pa < pb - 1e-12) {
                    triangles.push([a[i % na], b[j % nb], a[(i + 1) % na]]);
                    i += 1;
                } else {
                    triangles.push([a[i % na], b[j % nb], b[(j + 1) % nb]]);
                    j += 1;
                }
            }
        }
        let boundary_idx = rings[nrings].clone();
        let mut mesh = Self::from_parts(nodes, triangles, boundary_idx)?;
        mesh.rings = rings;
        Ok(mesh)
    }

    /// Uniform polar mesh of the disk of radius `radius` with `m` boundary nodes.
    pub fn disk(radius: f64, m: usize, opts: &MeshOptions) -> Result<Self> {
        let b: Vec<[f64; 2]> = (0..m)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / m as f64;
                [radius * t.cos(), radius * t.sin()]
            })
            .collect();
        Self::polar([0.0, 0.0], &b, opts)
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> [f64; 2] {
        self.nodes[i]
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.is_boundary[i]
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn node_triangles(&self, i: usize) -> &[usize] {
        &self.node_triangles[i]
    }

    /// Ring structure of polar meshes (ring 0 is the centre); empty otherwise.
    pub fn rings(&self) -> &[Vec<usize>] {
        &self.rings
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| !self.is_boundary[i]).collect()
    }

    /// Nodes within two edges of `i`, excluding `i`.
    pub fn two_ring(&self, i: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.neighbors[i].clone();
        for &j in &self.neighbors[i] {
            out.extend_from_slice(&self.neighbors[j]);
        }
        out.sort_unstable();
        out.dedup();
        out.retain(|&j| j != i);
        out
    }

    /// Longest edge in the parameter plane.
    pub fn mesh_size(&self) -> f64 {
        let mut h = 0.0f64;
        for t in &self.triangles {
            for k in 0..3 {
                let a = self.nodes[t[k]];
                let b = self.nodes[t[(k + 1) % 3]];
                h = h.max(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt());
            }
        }
        h
    }

    /// Same connectivity with moved nodes.
    pub fn with_nodes(&self, nodes: Vec<[f64; 2]>) -> Result<Self> {
        if nodes.len() != self.nodes.len() {
            return Err(Error::surface("node count changed"));
        }
        let mut m = Self::from_parts(nodes, self.triangles.clone(), self.boundary.clone())?;
        m.rings = self.rings.clone();
        Ok(m)
    }

    /// Triangle containing `z` and its barycentric coordinates.
    pub fn locate(&self, z: [f64; 2]) -> Option<(usize, [f64; 3])> {
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for (t, tri) in self.triangles.iter().enumerate() {
            let (a, b, c) = (self.nodes[tri[0]], self.nodes[tri[1]], self.nodes[tri[2]]);
            let area = cross(a, b, c);
            let l0 = cross(z, b, c) / area;
            let l1 = cross(a, z, c) / area;
            let l2 = 1.0 - l0 - l1;
            let worst = l0.min(l1).min(l2);
            if worst >= -1e-12 {
                return Some((t, [l0, l1, l2]));
            }
            if best.as_ref().map_or(true, |b| worst > b.2) {
                best = Some((t, [l0, l1, l2], worst));
            }
        }
        best.filter(|b| b.2 > -1e-9).map(|b| (b.0, b.1))
    }

    /// Like [`locate`](Self::locate), but points outside the mesh are snapped to the
    /// nearest boundary edge (barycentric coordinates clamped to the edge).
    pub fn locate_clamped(&self, z: [f64; 2]) -> (usize, [f64; 3]) {
        if let Some(hit) = self.locate(z) {
            return hit;
        }
        let mut best = (0usize, [1.0, 0.0, 0.0], f64::INFINITY);
        for (t, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (self.nodes[tri[k]], self.nodes[tri[(k + 1) % 3]]);
                let e = [b[0] - a[0], b[1] - a[1]];
                let l2 = e[0] * e[0] + e[1] * e[1];
                let s = (((z[0] - a[0]) * e[0] + (z[1] - a[1]) * e[1]) / l2).clamp(0.0, 1.0);
                let p = [a[0] + s * e[0] - z[0], a[1] + s * e[1] - z[1]];
                let dist = p[0] * p[0] + p[1] * p[1];
                if dist < best.2 {
                    let mut bary = [0.0; 3];
                    bary[k] = 1.0 - s;
                    bary[(k + 1) % 3] = s;
                    best = (t, bary, dist);
                }
            }
        }
        (best.0, best.1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn total_area(m: &DiskMesh) -> f64 {
        m.triangles()
            .iter()
            .map(|t| 0.5 * cross(m.node(t[0]), m.node(t[1]), m.node(t[2])))
            .sum()
    }

    #[test]
    fn polar_disk_is_valid() {
        let m = DiskMesh::disk(0.6, 96, &MeshOptions { rings: 12, ..Default::default() }).unwrap();
        // Euler characteristic of a disk.
        let mut edges = std::collections::BTreeSet::new();
        for t in m.triangles() {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                edges.insert((a.min(b), a.max(b)));
            }
        }
        let chi = m.num_nodes() as i64 - edges.len() as i64 + m.triangles().len() as i64;
        assert_eq!(chi, 1);
        assert_eq!(m.boundary().len(), 96);
        // Area of the inscribed polygon.
        let poly = 0.5 * 96.0 * 0.36 * (2.0 * PI / 96.0).sin();
        assert!((total_area(&m) - poly).abs() < 1e-12);
        for i in m.interior_nodes() {
            assert!(m.neighbors(i).len() >= 3);
        }
    }

    #[test]
    fn mapped_grid_is_regular() {
        let m = DiskMesh::mapped_grid(0.6, 8).unwrap();
        assert_eq!(m.boundary().len(), 64);
        for &b in m.boundary() {
            let z = m.node(b);
            assert!(((z[0] * z[0] + z[1] * z[1]).sqrt() - 0.6).abs() < 1e-15);
        }
        for i in m.interior_nodes() {
            assert_eq!(m.neighbors(i).len(), 6);
        }
        // The boundary cycle turns once counter-clockwise.
        let b = m.boundary();
        let mut turn = 0.0;
        for k in 0..b.len() {
            let (p, q) = (m.node(b[k]), m.node(b[(k + 1) % b.len()]));
            turn += (p[0] * q[1] - p[1] * q[0]).atan2(p[0] * q[0] + p[1] * q[1]);
        }
        assert!((turn - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_star_shaped() {
        let b = [[1.0, 0.0], [0.0, 1.0], [0.5, 0.1], [-1.0, 0.0], [0.0, -1.0]];
        assert!(DiskMesh::polar([0.0, 0.0], &b, &MeshOptions::default()).is_err());
    }

    #[test]
    fn hyperbolic_grading_core_is_shape_independent() {
        let circle: Vec<[f64; 2]> = (0..64)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / 64.0;
                [0.9 * t.cos(), 0.9 * t.sin()]
            })
            .collect();
        let wobbly: Vec<[f64; 2]> = (0..64)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / 64.0;
                let r = 0.95 + 0.03 * (3.0 * t).cos();
                [r * t.cos(), r * t.sin()]
            })
            .collect();
        let g = MeshOptions {
            rings: 0,
            sectors: 6,
            grading: Grading::Hyperbolic {
                spacing: 0.2,
                growth: 1.1,
                max_spacing: 1.0,
            },
        };
        let a = DiskMesh::polar([0.0, 0.0], &circle, &g).unwrap();
        let b = DiskMesh::polar([0.0, 0.0], &wobbly, &g).unwrap();
        // Rings well inside both boundaries coincide.
        for k in 1..=6 {
            for (&i, &j) in a.rings()[k].iter().zip(&b.rings()[k]) {
                let (p, q) = (a.node(i), b.node(j));
                assert!((p[0] - q[0]).abs() < 1e-12 && (p[1] - q[1]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn locate_returns_barycentric() {
        let m = DiskMesh::disk(0.5, 24, &MeshOptions { rings: 4, ..Default::default() }).unwrap();
        let z = [0.1, -0.2];
        let (t, l) = m.locate(z).unwrap();
        let tri = m.triangles()[t];
        let p = [0, 1].map(|c| (0..3).map(|k| l[k] * m.node(tri[k])[c]).sum::<f64>());
        assert!((p[0] - z[0]).abs() < 1e-14 && (p[1] - z[1]).abs() < 1e-14);
        assert!(m.locate([0.9, 0.0]).is_none());
    }
}
