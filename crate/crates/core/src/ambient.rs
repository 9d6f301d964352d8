//! The quadratic space `E = R^{2,n+1}`, the quadric `H^{2,n}` and the warped chart.
//!
//! Coordinates: the first two are positive, the remaining `n + 1` negative,
//! so `<x, y> = x1 y1 + x2 y2 - x3 y3 - ... - x_{n+3} y_{n+3}`.

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen};

use crate::error::{Error, Result};

/// Band around `|<x,y>| = 1` treated as lightlike.
pub const TOL_CLASSIFY: f64 = 1e-9;
/// Relative tolerance for membership in the quadric.
pub const TOL_QUADRIC: f64 = 1e-12;
/// Pivots below this are rejected when building frames.
pub const TOL_PIVOT: f64 = 1e-8;

/// Pairing of two coordinate slices with two positive directions.
#[inline]
pub fn pair(a: &[f64], b: &[f64]) -> f64 {
    let mut s = a[0] * b[0] + a[1] * b[1];
    for k in 2..a.len() {
        s -= a[k] * b[k];
    }
    s
}

#[inline]
pub fn qform(a: &[f64]) -> f64 {
    pair(a, a)
}

#[inline]
fn euclid_sq(a: &[f64]) -> f64 {
    a.iter().map(|v| v * v).sum()
}

/// `E` for a given fiber dimension `n`; vectors have `n + 3` coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AmbientSpace {
    n: usize,
}

impl AmbientSpace {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::geometry("fiber dimension must be at least 1"));
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.n + 3
    }

    /// Standard basis vector `e_{k+1}`.
    pub fn basis(&self, k: usize) -> AmbientVector {
        let mut v = DVector::zeros(self.dim());
        v[k] = 1.0;
        AmbientVector(v)
    }
}

/// A vector of `E`, stored in standard coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct AmbientVector(pub DVector<f64>);

impl AmbientVector {
    pub fn from_slice(v: &[f64]) -> Self {
        Self(DVector::from_column_slice(v))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DVector::zeros(dim))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Fiber dimension `n` such that this vector lives in `R^{n+3}`.
    pub fn fiber_dim(&self) -> usize {
        self.0.len().saturating_sub(3)
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn pairing(&self, other: &AmbientVector) -> Result<f64> {
        pairing(self, other)
    }

    pub fn q(&self) -> f64 {
        qform(self.as_slice())
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self(&self.0 * s)
    }

    pub fn add(&self, other: &AmbientVector) -> Self {
        Self(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &AmbientVector) -> Self {
        Self(&self.0 - &other.0)
    }

    pub fn norm_euclid(&self) -> f64 {
        self.0.norm()
    }

    /// Applies a linear map given in standard coordinates.
    pub fn transformed(&self, g: &DMatrix<f64>) -> Self {
        Self(g * &self.0)
    }
}

/// Bilinear form of signature `(2, n+1)`.
pub fn pairing(x: &AmbientVector, y: &AmbientVector) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            got: y.dim(),
        });
    }
    if x.dim() < 4 {
        return Err(Error::geometry("ambient vectors need at least 4 coordinates"));
    }
    Ok(pair(x.as_slice(), y.as_slice()))
}

/// A point of `H^{2,n}`: `q(x) = -1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointH(AmbientVector);

impl PointH {
    /// Accepts `x` if `q(x) = -1` up to a tolerance relative to its size.
    pub fn new(x: AmbientVector) -> Result<Self> {
        if x.dim() < 4 {
            return Err(Error::geometry("point needs at least 4 coordinates"));
        }
        let q = x.q();
        let scale = euclid_sq(x.as_slice()).max(1.0);
        if (q + 1.0).abs() > TOL_QUADRIC * scale {
            return Err(Error::geometry(format!("q(x) = {q}, expected -1")));
        }
        Ok(Self(x))
    }

    /// Rescales a negative vector onto the quadric.
    pub fn normalize(x: AmbientVector) -> Result<Self> {
        let q = x.q();
        let scale = euclid_sq(x.as_slice());
        if !(q < -1e-14 * scale.max(1e-300)) || !q.is_finite() {
            return Err(Error::geometry(format!("cannot normalize vector with q = {q}")));
        }
        Ok(Self(x.scaled(1.0 / (-q).sqrt())))
    }

    pub(crate) fn from_unchecked(x: DVector<f64>) -> Self {
        Self(AmbientVector(x))
    }

    pub fn vector(&self) -> &AmbientVector {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn n(&self) -> usize {
        self.0.fiber_dim()
    }

    pub fn pairing(&self, other: &PointH) -> Result<f64> {
        pairing(&self.0, &other.0)
    }

    pub fn transformed(&self, g: &DMatrix<f64>) -> Self {
        Self(self.0.transformed(g))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeodesicType {
    Spacelike,
    Lightlike,
    Timelike,
}

fn check_same_dim(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(())
}

fn rays_coincide(a: &[f64], b: &[f64]) -> bool {
    let na = euclid_sq(a).sqrt();
    let nb = euclid_sq(b).sqrt();
    let (mut dm, mut dp) = (0.0, 0.0);
    for k in 0..a.len() {
        let (x, y) = (a[k] / na, b[k] / nb);
        dm += (x - y) * (x - y);
        dp += (x + y) * (x + y);
    }
    dm.min(dp).sqrt() <= 1e-12
}

/// Type of the geodesic through two distinct points.
pub fn classify_geodesic(x: &PointH, y: &PointH) -> Result<GeodesicType> {
    check_same_dim(x.as_slice(), y.as_slice())?;
    if rays_coincide(x.as_slice(), y.as_slice()) {
        return Err(Error::geometry("points coincide up to sign"));
    }
    let b = pair(x.as_slice(), y.as_slice()).abs();
    Ok(if b > 1.0 + TOL_CLASSIFY {
        GeodesicType::Spacelike
    } else if b < 1.0 - TOL_CLASSIFY {
        GeodesicType::Timelike
    } else {
        GeodesicType::Lightlike
    })
}

/// `arccosh(-<x,y>)` evaluated through `q(x - y)` so that nearby points keep precision.
/// The caller guarantees `<x,y> <= -1`.
#[inline]
pub(crate) fn spatial_distance_raw(x: &[f64], y: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..x.len() {
        let d = x[k] - y[k];
        s += if k < 2 { d * d } else { -d * d };
    }
    2.0 * (s.max(0.0).sqrt() / 2.0).asinh()
}

/// Length of the spacelike geodesic between two acausal points.
pub fn spatial_distance(x: &PointH, y: &PointH) -> Result<f64> {
    check_same_dim(x.as_slice(), y.as_slice())?;
    if x.as_slice() == y.as_slice() {
        return Ok(0.0);
    }
    let b = pair(x.as_slice(), y.as_slice());
    match classify_geodesic(x, y)? {
        GeodesicType::Spacelike if b < 0.0 => Ok(spatial_distance_raw(x.as_slice(), y.as_slice())),
        GeodesicType::Spacelike => Err(Error::geometry(
            "points are spacelike separated but not joined by a geodesic (<x,y> > 1)",
        )),
        t => Err(Error::geometry(format!("spatial distance undefined for a {t:?} pair"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TripleClass {
    Positive,
    Negative,
    Degenerate,
}

/// Gram matrix of a triple together with its eigen-signature.
#[derive(Debug, Clone, PartialEq)]
pub struct TripleGram {
    pub gram: Matrix3<f64>,
    pub det: f64,
    pub eigenvalues: [f64; 3],
    /// (positive, zero, negative) eigenvalue counts.
    pub signature: (usize, usize, usize),
    pub class: TripleClass,
}

/// Gram matrix of three vectors of `E`; the vectors must be pairwise independent.
pub fn triple_gram(x1: &AmbientVector, x2: &AmbientVector, x3: &AmbientVector) -> Result<TripleGram> {
    let xs = [x1.as_slice(), x2.as_slice(), x3.as_slice()];
    check_same_dim(xs[0], xs[1])?;
    check_same_dim(xs[0], xs[2])?;
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        if rays_coincide(xs[i], xs[j]) {
            return Err(Error::geometry(format!("triple entries {i} and {j} are dependent")));
        }
    }
    let mut g = Matrix3::zeros();
    for i in 0..3 {
        for j in i..3 {
            let v = pair(xs[i], xs[j]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    let eig = SymmetricEigen::new(g);
    let mut ev = [eig.eigenvalues[0], eig.eigenvalues[1], eig.eigenvalues[2]];
    ev.sort_by(|a, b| b.total_cmp(a));
    // Relative to the Euclidean size of the vectors, not of the Gram: three points of a
    // photon have a Gram that is pure roundoff.
    let scale = xs
        .iter()
        .map(|x| x.iter().map(|v| v * v).sum::<f64>())
        .fold(0.0f64, f64::max)
        .max(1e-300);
    let zero = 1e-10 * scale;
    let pos = ev.iter().filter(|&&l| l > zero).count();
    let neg = ev.iter().filter(|&&l| l < -zero).count();
    let signature = (pos, 3 - pos - neg, neg);
    let class = match signature {
        (2, 0, 1) => TripleClass::Positive,
        (1, 0, 2) => TripleClass::Negative,
        _ => TripleClass::Degenerate,
    };
    Ok(TripleGram {
        gram: g,
        det: g.determinant(),
        eigenvalues: ev,
        signature,
        class,
    })
}

pub fn classify_triple(x1: &AmbientVector, x2: &AmbientVector, x3: &AmbientVector) -> Result<TripleClass> {
    Ok(triple_gram(x1, x2, x3)?.class)
}

/// A point `q0` of `H^{2,n}` with a splitting `E = U ⊕ W`, `W = L ⊕ V`, `L = R q0`.
///
/// Columns of `basis` are `u1, u2, q0, v1, ..., vn`. Frame coordinates of a vector are
/// its coefficients in this basis; the pairing in frame coordinates is the standard one.
#[derive(Debug, Clone, PartialEq)]
pub struct PointedPlane {
    basis: DMatrix<f64>,
}

impl PointedPlane {
    /// `q0 = e3`, `U = span(e1, e2)`, `V = span(e4, ...)`.
    pub fn standard(n: usize) -> Result<Self> {
        let d = AmbientSpace::new(n)?.dim();
        Ok(Self {
            basis: DMatrix::identity(d, d),
        })
    }

    /// Builds a frame from explicit columns `u1, u2, q0, v1..vn`.
    pub fn from_basis(basis: DMatrix<f64>) -> Result<Self> {
        let d = basis.nrows();
        if basis.ncols() != d || d < 4 {
            return Err(Error::geometry("frame basis must be square of size n + 3"));
        }
        for i in 0..d {
            for j in 0..d {
                let want = if i != j {
                    0.0
                } else if i < 2 {
                    1.0
                } else {
                    -1.0
                };
                let got = pair(basis.column(i).as_slice(), basis.column(j).as_slice());
                let scale = (basis.column(i).norm() * basis.column(j).norm()).max(1.0);
                if (got - want).abs() > 1e-10 * scale {
                    return Err(Error::geometry(format!(
                        "frame columns {i},{j} pair to {got}, expected {want}"
                    )));
                }
            }
        }
        Ok(Self { basis })
    }

    /// Frame with `q0 = p`, obtained by modified Gram-Schmidt with pivoting on the
    /// standard basis.
    pub fn through(p: &PointH) -> Result<Self> {
        let d = p.dim();
        let n = d - 3;
        let mut chosen: Vec<(DVector<f64>, f64)> = vec![(p.vector().0.clone(), -1.0)];
        let mut cands: Vec<DVector<f64>> = (0..d)
            .map(|k| {
                let mut e = DVector::zeros(d);
                e[k] = 1.0;
                e
            })
            .collect();
        let mut need_pos = 2usize;
        let mut need_neg = n;
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        while need_pos + need_neg > 0 {
            // Project candidates against the last chosen vector.
            let (b, s) = chosen.last().unwrap().clone();
            for c in cands.iter_mut() {
                let coef = pair(c.as_slice(), b.as_slice()) / s;
                *c -= &b * coef;
            }
            let mut best: Option<(usize, f64)> = None;
            for (i, c) in cands.iter().enumerate() {
                let qc = qform(c.as_slice());
                let ok = (qc > 0.0 && need_pos > 0) || (qc < 0.0 && need_neg > 0);
                if ok && best.map_or(true, |(_, bq)| qc.abs() > bq) {
                    best = Some((i, qc.abs()));
                }
            }
            let (i, bq) = best.ok_or_else(|| Error::geometry("frame construction ran out of pivots"))?;
            if bq < TOL_PIVOT {
                return Err(Error::geometry(format!("frame pivot {bq:.3e} below threshold")));
            }
            let c = cands.remove(i);
            let qc = qform(c.as_slice());
            let v = &c / qc.abs().sqrt();
            if qc > 0.0 {
                need_pos -= 1;
                pos.push(v.clone());
                chosen.push((v, 1.0));
            } else {
                need_neg -= 1;
                neg.push(v.clone());
                chosen.push((v, -1.0));
            }
        }
        let mut basis = DMatrix::zeros(d, d);
        basis.set_column(0, &pos[0]);
        basis.set_column(1, &pos[1]);
        basis.set_column(2, &p.vector().0);
        for (k, v) in neg.iter().enumerate() {
            basis.set_column(3 + k, v);
        }
        Self::from_basis(basis)
    }

    pub fn n(&self) -> usize {
        self.basis.nrows() - 3
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn q0(&self) -> PointH {
        PointH::from_unchecked(self.basis.column(2).into_owned())
    }

    /// Frame coordinates of an ambient vector.
    pub fn to_frame(&self, x: &[f64]) -> DVector<f64> {
        let d = self.dim();
        DVector::from_fn(d, |k, _| {
            let s = if k < 2 { 1.0 } else { -1.0 };
            s * pair(x, self.basis.column(k).as_slice())
        })
    }

    /// Ambient vector with the given frame coordinates.
    pub fn from_frame(&self, c: &[f64]) -> DVector<f64> {
        &self.basis * DVector::from_column_slice(c)
    }

    /// Fiber coordinates of `q0`: the basepoint of `S^n` in `W`.
    pub fn basepoint_fiber(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.n() + 1);
        v[0] = 1.0;
        v
    }

    /// Applies an isometry of `E` to the whole frame.
    pub fn transformed(&self, g: &DMatrix<f64>) -> Result<Self> {
        Self::from_basis(g * &self.basis)
    }
}

/// Frame coordinates `(2u/(1-|u|^2), (1+|u|^2)/(1-|u|^2) w)` of `psi(u, w)`.
pub(crate) fn psi_frame_coords(u: [f64; 2], w: &[f64], out: &mut [f64]) {
    let r2 = u[0] * u[0] + u[1] * u[1];
    let den = 1.0 - r2;
    out[0] = 2.0 * u[0] / den;
    out[1] = 2.0 * u[1] / den;
    let beta = (1.0 + r2) / den;
    for (k, wk) in w.iter().enumerate() {
        out[2 + k] = beta * wk;
    }
}

fn check_fiber(frame: &PointedPlane, w: &[f64]) -> Result<()> {
    if w.len() != frame.n() + 1 {
        return Err(Error::DimensionMismatch {
            expected: frame.n() + 1,
            got: w.len(),
        });
    }
    let nw = euclid_sq(w).sqrt();
    if (nw - 1.0).abs() > 1e-12 {
        return Err(Error::geometry(format!("fiber value has norm {nw}, expected 1")));
    }
    Ok(())
}

/// Warped-product chart `D × S^n → H^{2,n}` relative to `frame`.
pub fn psi(frame: &PointedPlane, u: [f64; 2], w: &[f64]) -> Result<PointH> {
    check_fiber(frame, w)?;
    let r2 = u[0] * u[0] + u[1] * u[1];
    if !(r2 < 1.0) {
        return Err(Error::geometry(format!("disk coordinate has |u| = {} >= 1", r2.sqrt())));
    }
    let mut c = vec![0.0; frame.dim()];
    psi_frame_coords(u, w, &mut c);
    Ok(PointH::from_unchecked(frame.from_frame(&c)))
}

/// Inverse of [`psi`]: returns `(u, w)`.
pub fn psi_inv(frame: &PointedPlane, x: &PointH) -> Result<([f64; 2], DVector<f64>)> {
    if x.dim() != frame.dim() {
        return Err(Error::DimensionMismatch {
            expected: frame.dim(),
            got: x.dim(),
        });
    }
    let c = frame.to_frame(x.as_slice());
    psi_inv_frame(c.as_slice())
}

pub(crate) fn psi_inv_frame(c: &[f64]) -> Result<([f64; 2], DVector<f64>)> {
    let a = [c[0], c[1]];
    let b = DVector::from_column_slice(&c[2..]);
    let nb = b.norm();
    if !(nb > 0.0) {
        return Err(Error::geometry("point has vanishing W-component"));
    }
    let a2 = a[0] * a[0] + a[1] * a[1];
    let den = 1.0 + (1.0 + a2).sqrt();
    Ok(([a[0] / den, a[1] / den], b / nb))
}

/// Projection of `H^{2,n}` onto the disk factor.
pub fn warped_projection(frame: &PointedPlane, x: &PointH) -> Result<[f64; 2]> {
    Ok(psi_inv(frame, x)?.0)
}

/// `cosh(ρ) p + sinh(ρ) v` for spacelike unit `v`, `cos(ρ) p + sin(ρ) v` for timelike unit `v`.
pub fn exp_point(p: &PointH, v: &AmbientVector, rho: f64) -> Result<PointH> {
    check_same_dim(p.as_slice(), v.as_slice())?;
    let pv = pair(p.as_slice(), v.as_slice());
    let scale = v.norm_euclid() * p.vector().norm_euclid();
    if pv.abs() > 1e-10 * scale.max(1.0) {
        return Err(Error::geometry("direction is not tangent at p"));
    }
    let qv = v.q();
    let out = if (qv - 1.0).abs() <= 1e-10 * v.norm_euclid().powi(2).max(1.0) {
        &p.vector().0 * rho.cosh() + &v.0 * rho.sinh()
    } else if (qv + 1.0).abs() <= 1e-10 * v.norm_euclid().powi(2).max(1.0) {
        &p.vector().0 * rho.cos() + &v.0 * rho.sin()
    } else {
        return Err(Error::geometry(format!("direction has q = {qv}, expected ±1")));
    };
    Ok(PointH::from_unchecked(out))
}

/// Exponential map at `x` for an arbitrary tangent vector `v` (slices in any q-orthonormal
/// coordinates).
pub(crate) fn exp_map_raw(x: &[f64], v: &[f64], out: &mut [f64]) {
    let qv = qform(v);
    let (c, s) = if qv > 0.0 {
        let t = qv.sqrt();
        (t.cosh(), if t < 1e-8 { 1.0 + t * t / 6.0 } else { t.sinh() / t })
    } else if qv < 0.0 {
        let t = (-qv).sqrt();
        (t.cos(), if t < 1e-8 { 1.0 - t * t / 6.0 } else { t.sin() / t })
    } else {
        (1.0, 1.0)
    };
    for k in 0..x.len() {
        out[k] = c * x[k] + s * v[k];
    }
}

/// Logarithm at `x` of an acausal point `y` (`<x,y> <= -1`), computed stably for
/// nearby points. Returns `None` if the pair is not spacelike-connected.
pub(crate) fn log_map_raw(x: &[f64], y: &[f64], out: &mut [f64]) -> Option<f64> {
    // u = y + <x,y> x = (y - x) + (1 + <x,y>) x and 1 + <x,y> = -q(y - x)/2.
    let mut qd = 0.0;
    for k in 0..x.len() {
        let d = y[k] - x[k];
        qd += if k < 2 { d * d } else { -d * d };
    }
    if qd < 0.0 {
        return None;
    }
    let c = -qd / 2.0;
    for k in 0..x.len() {
        out[k] = (y[k] - x[k]) + c * x[k];
    }
    let dist = 2.0 * (qd.sqrt() / 2.0).asinh();
    let sh = dist.sinh();
    let f = if dist < 1e-8 { 1.0 } else { dist / sh };
    for o in out.iter_mut() {
        *o *= f;
    }
    Some(dist)
}

/// Isometries of `E` used to test equivariance.
pub mod isometry {
    use nalgebra::DMatrix;

    /// Rotation by `theta` in the plane of coordinates `i, j` (same sign).
    pub fn rotation(d: usize, i: usize, j: usize, theta: f64) -> DMatrix<f64> {
        let mut g = DMatrix::identity(d, d);
        let (c, s) = (theta.cos(), theta.sin());
        g[(i, i)] = c;
        g[(j, j)] = c;
        g[(i, j)] = -s;
        g[(j, i)] = s;
        g
    }

    /// Boost by `t` mixing a positive coordinate `i` with a negative coordinate `j`.
    pub fn boost(d: usize, i: usize, j: usize, t: f64) -> DMatrix<f64> {
        let mut g = DMatrix::identity(d, d);
        let (c, s) = (t.cosh(), t.sinh());
        g[(i, i)] = c;
        g[(j, j)] = c;
        g[(i, j)] = s;
        g[(j, i)] = s;
        g
    }

    /// Composition of rotations and boosts driven by the given angles.
    pub fn compose(d: usize, params: &[f64]) -> DMatrix<f64> {
        let mut g = DMatrix::identity(d, d);
        let mut it = params.iter().copied().cycle();
        for i in 0..d {
            for j in (i + 1)..d {
                let p = it.next().unwrap_or(0.0);
                let step = if (i < 2) == (j < 2) {
                    rotation(d, i, j, p)
                } else {
                    boost(d, i, j, 0.5 * p)
                };
                g = step * g;
            }
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pt(v: &[f64]) -> PointH {
        PointH::new(AmbientVector::from_slice(v)).unwrap()
    }

    fn e3(n: usize) -> PointH {
        let mut v = vec![0.0; n + 3];
        v[2] = 1.0;
        pt(&v)
    }

    #[test]
    fn pairing_signature() {
        let sp = AmbientSpace::new(2).unwrap();
        let e1 = sp.basis(0);
        let e3 = sp.basis(2);
        assert_eq!(e1.q(), 1.0);
        assert_eq!(e3.q(), -1.0);
        let bad = AmbientVector::from_slice(&[1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(pairing(&e1, &bad), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn geodesic_types() {
        let x = e3(1);
        let t: f64 = 0.7;
        let y = pt(&[t.sinh(), 0.0, t.cosh(), 0.0]);
        assert_eq!(classify_geodesic(&x, &y).unwrap(), GeodesicType::Spacelike);
        let z = pt(&[0.0, 0.0, 0.5f64.cos(), 0.5f64.sin()]);
        assert_eq!(classify_geodesic(&x, &z).unwrap(), GeodesicType::Timelike);
        // x + lightlike displacement stays on the quadric and pairs to -1.
        let w = pt(&[0.3, 0.0, 1.0, 0.3]);
        assert_eq!(classify_geodesic(&x, &w).unwrap(), GeodesicType::Lightlike);
        assert!(classify_geodesic(&x, &x).is_err());
    }

    #[test]
    fn distance_closed_form() {
        let x = e3(1);
        let y = pt(&[2f64.sinh(), 0.0, 2f64.cosh(), 0.0]);
        assert_abs_diff_eq!(spatial_distance(&x, &y).unwrap(), 2.0, epsilon = 1e-12);
        assert_eq!(spatial_distance(&x, &x).unwrap(), 0.0);
        let z = pt(&[0.0, 0.0, 0.5f64.cos(), 0.5f64.sin()]);
        assert!(spatial_distance(&x, &z).is_err());
    }

    /// Independent check: integrate sqrt(q(γ')) along the projective line from x to y.
    #[test]
    fn distance_matches_integrated_length() {
        let p = e3(2);
        let frame = PointedPlane::standard(2).unwrap();
        let a = psi(&frame, [0.3, -0.2], &[0.8, 0.6, 0.0]).unwrap();
        let b = psi(&frame, [-0.5, 0.4], &[0.9, 0.0, (1.0f64 - 0.81).sqrt()]).unwrap();
        for (x, y) in [(&p, &a), (&a, &b), (&p, &b)] {
            let nseg = 20000;
            let f = |t: f64| {
                let v: Vec<f64> = x
                    .as_slice()
                    .iter()
                    .zip(y.as_slice())
                    .map(|(a, b)| (1.0 - t) * a + t * b)
                    .collect();
                let s = (-qform(&v)).sqrt();
                v.iter().map(|c| c / s).collect::<Vec<f64>>()
            };
            let mut len = 0.0;
            let h = 1.0 / nseg as f64;
            for k in 0..nseg {
                // midpoint rule on the speed, derivative by central difference
                let t = (k as f64 + 0.5) * h;
                let dt = 1e-6;
                let g1 = f(t + dt);
                let g0 = f(t - dt);
                let d: Vec<f64> = g1.iter().zip(&g0).map(|(a, b)| (a - b) / (2.0 * dt)).collect();
                len += qform(&d).sqrt() * h;
            }
            let closed = spatial_distance(x, y).unwrap();
            assert!((len - closed).abs() < 1e-6 * closed.max(1.0), "{len} vs {closed}");
        }
    }

    #[test]
    fn triples_at_infinity() {
        let l = |t: f64| AmbientVector::from_slice(&[t.cos(), t.sin(), 1.0, 0.0]);
        let g = triple_gram(&l(0.0), &l(2.0), &l(4.0)).unwrap();
        assert_eq!(g.class, TripleClass::Positive);
        assert!(g.det < 0.0);
        // Two entries on a common photon.
        let a = AmbientVector::from_slice(&[1.0, 0.0, 1.0, 0.0]);
        let b = AmbientVector::from_slice(&[1.0, 0.0, 0.0, 1.0]);
        let c = AmbientVector::from_slice(&[0.0, 1.0, 1.0, 0.0]);
        let g = triple_gram(&a, &b, &c).unwrap();
        assert_eq!(g.class, TripleClass::Degenerate);
        assert!(g.det.abs() < 1e-12);
        assert!(triple_gram(&a, &a.scaled(2.0), &c).is_err());
        // Three points of one photon: the Gram vanishes up to roundoff.
        let p = |t: f64| AmbientVector::from_slice(&[t.cos(), t.sin(), t.cos(), t.sin(), 0.0]);
        for (s, t, u) in [(0.1, 0.2, 0.4), (0.13, 0.5, 1.4), (1.0, 2.0, 3.0)] {
            assert_eq!(triple_gram(&p(s), &p(t), &p(u)).unwrap().class, TripleClass::Degenerate);
        }
    }

    #[test]
    fn standard_frame_and_chart() {
        let frame = PointedPlane::standard(1).unwrap();
        let x = psi(&frame, [0.0, 0.0], &[1.0, 0.0]).unwrap();
        assert_eq!(x.as_slice(), &[0.0, 0.0, 1.0, 0.0]);
        let (u, w) = psi_inv(&frame, &x).unwrap();
        assert_eq!(u, [0.0, 0.0]);
        assert_eq!(w.as_slice(), &[1.0, 0.0]);
        assert!(psi(&frame, [1.0, 0.0], &[1.0, 0.0]).is_err());
        assert!(psi(&frame, [0.1, 0.0], &[1.0, 0.1]).is_err());
    }

    #[test]
    fn chart_round_trip_and_radius() {
        let frame = PointedPlane::standard(2).unwrap();
        let w = [0.6, 0.0, 0.8];
        let x = psi(&frame, [0.3, 0.4], &w).unwrap();
        assert!((x.vector().q() + 1.0).abs() < 1e-14);
        let (u, w2) = psi_inv(&frame, &x).unwrap();
        assert_abs_diff_eq!(u[0], 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(u[1], 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(w2[2], 0.8, epsilon = 1e-15);
        // Distance from q0 along the totally geodesic plane is 2 artanh(|u|).
        let o = psi(&frame, [0.0, 0.0], &[1.0, 0.0, 0.0]).unwrap();
        let y = psi(&frame, [0.5, 0.0], &[1.0, 0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(spatial_distance(&o, &y).unwrap(), 2.0 * 0.5f64.atanh(), epsilon = 1e-14);
    }

    #[test]
    fn frame_through_point() {
        let frame0 = PointedPlane::standard(2).unwrap();
        let p = psi(&frame0, [0.4, -0.3], &[0.8, 0.6, 0.0]).unwrap();
        let fr = PointedPlane::through(&p).unwrap();
        assert_eq!(fr.q0().as_slice(), p.as_slice());
        let c = fr.to_frame(p.as_slice());
        assert_abs_diff_eq!(c[2], 1.0, epsilon = 1e-12);
        let back = fr.from_frame(c.as_slice());
        for k in 0..5 {
            assert_abs_diff_eq!(back[k], p.as_slice()[k], epsilon = 1e-12);
        }
        let std = PointedPlane::through(&e3(2)).unwrap();
        assert_eq!(std.basis(), frame0.basis());
    }

    #[test]
    fn exp_point_cases() {
        let p = e3(1);
        let v = AmbientVector::from_slice(&[1.0, 0.0, 0.0, 0.0]);
        let x = exp_point(&p, &v, 1.5).unwrap();
        assert_abs_diff_eq!(x.as_slice()[0], 1.5f64.sinh(), epsilon = 1e-14);
        let t = AmbientVector::from_slice(&[0.0, 0.0, 0.0, 1.0]);
        let y = exp_point(&p, &t, 0.5).unwrap();
        assert_abs_diff_eq!(y.as_slice()[3], 0.5f64.sin(), epsilon = 1e-14);
        let null = AmbientVector::from_slice(&[1.0, 0.0, 0.0, 1.0]);
        assert!(exp_point(&p, &null, 1.0).is_err());
    }

    #[test]
    fn log_inverts_exp() {
        let x = e3(2);
        let v = [0.3, -0.2, 0.0, 0.1, 0.05];
        let mut y = [0.0; 5];
        exp_map_raw(x.as_slice(), &v, &mut y);
        let mut l = [0.0; 5];
        log_map_raw(x.as_slice(), &y, &mut l).unwrap();
        for k in 0..5 {
            assert_abs_diff_eq!(l[k], v[k], epsilon = 1e-14);
        }
    }

    #[test]
    fn isometries_preserve_pairing() {
        let g = isometry::compose(5, &[0.3, -0.7, 1.1, 0.2]);
        let a = [0.1, 0.2, 1.3, -0.4, 0.5];
        let b = [-0.7, 0.2, 0.9, 0.4, 0.1];
        let ga = &g * DVector::from_column_slice(&a);
        let gb = &g * DVector::from_column_slice(&b);
        assert_abs_diff_eq!(pair(ga.as_slice(), gb.as_slice()), pair(&a, &b), epsilon = 1e-12);
    }
}
