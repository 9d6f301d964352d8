//! Sparse block matrices, preconditioned conjugate gradients and non-negative least squares.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

/// Square block-sparse matrix with dense `bs × bs` row-major blocks.
#[derive(Debug, Clone)]
pub(crate) struct BlockCsr {
    pub bs: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub blocks: Vec<f64>,
}

impl BlockCsr {
    /// Zero matrix with the given sparsity pattern; each row list must be sorted.
    pub fn from_pattern(rows: &[Vec<usize>], bs: usize) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for r in rows {
            col_idx.extend_from_slice(r);
            row_ptr.push(col_idx.len());
        }
        let blocks = vec![0.0; col_idx.len() * bs * bs];
        Self {
            bs,
            row_ptr,
            col_idx,
            blocks,
        }
    }

    pub fn nrows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.nrows() * self.bs
    }

    fn slot(&self, r: usize, c: usize) -> Option<usize> {
        let lo = self.row_ptr[r];
        let hi = self.row_ptr[r + 1];
        self.col_idx[lo..hi].binary_search(&c).ok().map(|k| lo + k)
    }

    /// Adds `data` (row-major `bs × bs`) to block `(r, c)`; panics outside the pattern.
    pub fn add_block(&mut self, r: usize, c: usize, data: &[f64]) {
        let k = self.slot(r, c).expect("block outside sparsity pattern");
        let bb = self.bs * self.bs;
        for (dst, src) in self.blocks[k * bb..(k + 1) * bb].iter_mut().zip(data) {
            *dst += src;
        }
    }

    pub fn diag_block(&self, r: usize) -> DMatrix<f64> {
        let k = self.slot(r, r).expect("missing diagonal block");
        let bb = self.bs * self.bs;
        DMatrix::from_row_slice(self.bs, self.bs, &self.blocks[k * bb..(k + 1) * bb])
    }

    #[cfg(test)]
    pub fn scale(&mut self, s: f64) {
        self.blocks.iter_mut().for_each(|v| *v *= s);
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let bs = self.bs;
        let bb = bs * bs;
        y.par_chunks_mut(bs).enumerate().for_each(|(r, yr)| {
            yr.iter_mut().for_each(|v| *v = 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k];
                let blk = &self.blocks[k * bb..(k + 1) * bb];
                let xc = &x[c * bs..(c + 1) * bs];
                for i in 0..bs {
                    let mut s = 0.0;
                    for j in 0..bs {
                        s += blk[i * bs + j] * xc[j];
                    }
                    yr[i] += s;
                }
            }
        });
    }

    /// Dense copy, for tests and small problems.
    #[allow(dead_code)]
    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let bs = self.bs;
        let bb = bs * bs;
        let mut m = DMatrix::zeros(n, n);
        for r in 0..self.nrows() {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.col_idx[k];
                for i in 0..bs {
                    for j in 0..bs {
                        m[(r * bs + i, c * bs + j)] = self.blocks[k * bb + i * bs + j];
                    }
                }
            }
        }
        m
    }
}

/// Inverses of the diagonal blocks; blocks that are not positive definite are shifted.
pub(crate) struct BlockJacobi {
    bs: usize,
    inv: Vec<DMatrix<f64>>,
}

impl BlockJacobi {
    pub fn new(a: &BlockCsr) -> Self {
        let inv = (0..a.nrows())
            .map(|r| {
                let d = a.diag_block(r);
                spd_inverse(&d)
            })
            .collect();
        Self { bs: a.bs, inv }
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let bs = self.bs;
        y.par_chunks_mut(bs).enumerate().for_each(|(r, yr)| {
            let m = &self.inv[r];
            for i in 0..bs {
                let mut s = 0.0;
                for j in 0..bs {
                    s += m[(i, j)] * x[r * bs + j];
                }
                yr[i] = s;
            }
        });
    }
}

/// Inverse of a symmetric block, replacing eigenvalues by their absolute values with a floor.
pub(crate) fn spd_inverse(d: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(ch) = d.clone().cholesky() {
        return ch.inverse();
    }
    let eig = d.clone().symmetric_eigen();
    let top = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let vals = eig.eigenvalues.map(|l| 1.0 / l.abs().max(1e-8 * top));
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

#[derive(Debug, Clone)]
pub(crate) struct CgOutcome {
    pub x: Vec<f64>,
    /// Set when a search direction with non-positive curvature was met.
    pub negative_curvature: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned CG for `A x = b` with `A` expected symmetric positive definite.
pub(crate) fn pcg(a: &BlockCsr, b: &[f64], pre: &BlockJacobi, tol: f64, max_iter: usize) -> CgOutcome {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    pre.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let bnorm = dot(b, b).sqrt();
    let mut ap = vec![0.0; n];
    if bnorm == 0.0 {
        return CgOutcome {
            x,
            negative_curvature: false,
        };
    }
    let mut it = 0;
    while it < max_iter {
        a.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return CgOutcome {
                x,
                negative_curvature: true,
            };
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        it += 1;
        let rel = dot(&r, &r).sqrt() / bnorm;
        if rel <= tol {
            break;
        }
        pre.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    CgOutcome {
        x,
        negative_curvature: false,
    }
}

/// Lawson-Hanson non-negative least squares: minimise `|A x - b|` over `x >= 0`.
/// Returns `None` when the iteration cap is reached.
pub(crate) fn nnls(a: &DMatrix<f64>, b: &DVector<f64>, max_iter: usize) -> Option<(DVector<f64>, f64)> {
    let m = a.ncols();
    let mut x = DVector::zeros(m);
    let mut passive = vec![false; m];
    let scale = a.iter().fold(0.0f64, |s, v| s.max(v.abs())) * b.norm().max(1.0);
    let tol = 1e-12 * scale.max(1e-300);
    let mut iter = 0;
    loop {
        let resid = b - a * &x;
        let w = a.transpose() * &resid;
        let mut best: Option<(usize, f64)> = None;
        for j in 0..m {
            if !passive[j] && w[j] > tol && best.map_or(true, |(_, bw)| w[j] > bw) {
                best = Some((j, w[j]));
            }
        }
        let Some((j, _)) = best else {
            return Some((x, resid.norm()));
        };
        passive[j] = true;
        loop {
            iter += 1;
            if iter > max_iter {
                return None;
            }
            let idx: Vec<usize> = (0..m).filter(|&k| passive[k]).collect();
            let ap = DMatrix::from_fn(a.nrows(), idx.len(), |r, c| a[(r, idx[c])]);
            let s = ap.clone().svd(true, true).solve(b, 1e-13).ok()?;
            if s.iter().all(|&v| v > 0.0) {
                x.fill(0.0);
                for (c, &k) in idx.iter().enumerate() {
                    x[k] = s[c];
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (c, &k) in idx.iter().enumerate() {
                if s[c] <= 0.0 {
                    let den = x[k] - s[c];
                    if den > 0.0 {
                        alpha = alpha.min(x[k] / den);
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            for (c, &k) in idx.iter().enumerate() {
                x[k] += alpha * (s[c] - x[k]);
            }
            for &k in &idx {
                if x[k] <= 1e-15 * scale.max(1.0) {
                    x[k] = 0.0;
                    passive[k] = false;
                }
            }
            if passive.iter().all(|p| !p) {
                break;
            }
        }
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> BlockCsr {
        let rows: Vec<Vec<usize>> = (0..n)
            .map(|i| {
                let mut r = vec![i];
                if i > 0 {
                    r.insert(0, i - 1);
                }
                if i + 1 < n {
                    r.push(i + 1);
                }
                r
            })
            .collect();
        let mut a = BlockCsr::from_pattern(&rows, 1);
        for i in 0..n {
            a.add_block(i, i, &[2.0]);
            if i > 0 {
                a.add_block(i, i - 1, &[-1.0]);
            }
            if i + 1 < n {
                a.add_block(i, i + 1, &[-1.0]);
            }
        }
        a
    }

    #[test]
    fn cg_solves_laplacian() {
        let n = 50;
        let a = laplacian_1d(n);
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let pre = BlockJacobi::new(&a);
        let out = pcg(&a, &b, &pre, 1e-12, 500);
        assert!(!out.negative_curvature);
        let dense = a.to_dense();
        let r = &dense * DVector::from_vec(out.x.clone()) - DVector::from_vec(b);
        assert!(r.norm() < 1e-9);
    }

    #[test]
    fn cg_flags_indefinite() {
        let mut a = laplacian_1d(4);
        a.scale(-1.0);
        let pre = BlockJacobi::new(&a);
        let out = pcg(&a, &[1.0, 0.0, 0.0, 0.0], &pre, 1e-12, 50);
        assert!(out.negative_curvature);
    }

    #[test]
    fn nnls_matches_brute_force() {
        // Oracle: enumerate all active sets of a small problem.
        let a = DMatrix::from_row_slice(3, 4, &[1.0, 0.5, -0.3, 0.2, 0.1, 1.0, 0.4, -0.6, 0.3, -0.2, 1.0, 0.8]);
        let b = DVector::from_column_slice(&[0.4, -0.9, 0.5]);
        let (x, res) = nnls(&a, &b, 100).unwrap();
        let mut best = f64::INFINITY;
        for mask in 0u32..16 {
            let idx: Vec<usize> = (0..4).filter(|k| mask & (1 << k) != 0).collect();
            if idx.is_empty() {
                best = best.min(b.norm());
                continue;
            }
            let ap = DMatrix::from_fn(3, idx.len(), |r, c| a[(r, idx[c])]);
            let s = ap.clone().svd(true, true).solve(&b, 1e-14).unwrap();
            if s.iter().all(|&v| v >= 0.0) {
                best = best.min((&ap * s - &b).norm());
            }
        }
        assert!((res - best).abs() < 1e-12, "{res} vs {best}");
        assert!(x.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn slope_of_power_law() {
        let x = [0.1, 0.05, 0.025];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.7)).collect();
        assert!((loglog_slope(&x, &y) - 1.7).abs() < 1e-12);
    }
}
