//! Loops in the Einstein universe, finite curves in `H^{2,n}` and their positivity.
//!
//! A loop is stored as the graph of `f: S^1 → S^n` sampled at `θ_j = 2π j / m`; its lift
//! at `θ_j` is `(cos θ_j, sin θ_j, f(θ_j))` in standard coordinates.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Matrix3};

use crate::ambient::{pair, qform, spatial_distance_raw, AmbientVector, PointH};
use crate::error::{Error, Result};
use crate::linalg::nnls;

/// Tolerance used when deciding whether a pair of samples is isometric.
pub const TOL_ISOMETRIC: f64 = 1e-9;

fn sphere_angle(a: &[f64], b: &[f64]) -> f64 {
    let mut dm = 0.0;
    let mut dp = 0.0;
    for k in 0..a.len() {
        dm += (a[k] - b[k]) * (a[k] - b[k]);
        dp += (a[k] + b[k]) * (a[k] + b[k]);
    }
    2.0 * dm.sqrt().atan2(dp.sqrt())
}

/// Point at fraction `t` of the minimizing arc from `a` to `b`.
pub(crate) fn slerp(a: &DVector<f64>, b: &DVector<f64>, t: f64) -> DVector<f64> {
    let om = sphere_angle(a.as_slice(), b.as_slice());
    if om < 1e-12 {
        let v = a * (1.0 - t) + b * t;
        return v.normalize();
    }
    let s = om.sin();
    a * (((1.0 - t) * om).sin() / s) + b * ((t * om).sin() / s)
}

/// Exponential map of the round sphere at `p` applied to a tangent vector `v`.
pub fn sphere_exp(p: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    let t = v.norm();
    if t < 1e-300 {
        return p.clone();
    }
    (p * t.cos() + v * (t.sin() / t)).normalize()
}

/// Logarithm of the round sphere at `p`.
pub fn sphere_log(p: &DVector<f64>, q: &DVector<f64>) -> DVector<f64> {
    let om = sphere_angle(p.as_slice(), q.as_slice());
    let perp = q - p * p.dot(q);
    let pn = perp.norm();
    if pn < 1e-300 {
        return DVector::zeros(p.len());
    }
    perp * (om / pn)
}

/// A point of `∂H^{2,n}` given by its unit `U` and `W` components.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryPoint {
    pub u: [f64; 2],
    pub w: DVector<f64>,
}

impl BoundaryPoint {
    pub fn new(u: [f64; 2], w: DVector<f64>) -> Result<Self> {
        let nu = (u[0] * u[0] + u[1] * u[1]).sqrt();
        let nw = w.norm();
        if (nu - 1.0).abs() > 1e-12 || (nw - 1.0).abs() > 1e-12 {
            return Err(Error::looperr("boundary point components must be unit vectors"));
        }
        Ok(Self { u, w })
    }

    /// Normalizes an isotropic vector of `E` to unit components.
    pub fn from_isotropic(v: &AmbientVector) -> Result<Self> {
        let s = v.as_slice();
        let nu = (s[0] * s[0] + s[1] * s[1]).sqrt();
        let nw = s[2..].iter().map(|x| x * x).sum::<f64>().sqrt();
        if nu == 0.0 || (nu - nw).abs() > 1e-10 * nu.max(nw) {
            return Err(Error::looperr("vector is not isotropic"));
        }
        Ok(Self {
            u: [s[0] / nu, s[1] / nu],
            w: DVector::from_column_slice(&s[2..]) / nw,
        })
    }

    /// Isotropic representative `(u, w)` in standard coordinates.
    pub fn lift(&self) -> AmbientVector {
        let mut v = DVector::zeros(self.w.len() + 2);
        v[0] = self.u[0];
        v[1] = self.u[1];
        v.rows_mut(2, self.w.len()).copy_from(&self.w);
        AmbientVector(v)
    }
}

/// Samples `w_j = f(θ_j)` of a loop graph.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopSpec {
    samples: Vec<DVector<f64>>,
}

impl LoopSpec {
    pub fn new(samples: Vec<DVector<f64>>) -> Result<Self> {
        let m = samples.len();
        if m < 3 {
            return Err(Error::looperr("a loop needs at least 3 samples"));
        }
        let dim = samples[0].len();
        if dim < 2 {
            return Err(Error::looperr("fiber sphere must have dimension at least 1"));
        }
        for (j, w) in samples.iter().enumerate() {
            if w.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: w.len(),
                });
            }
            if (w.norm() - 1.0).abs() > 1e-12 {
                return Err(Error::looperr(format!("sample {j} is not a unit vector")));
            }
        }
        for j in 0..m {
            let gap = sphere_angle(samples[j].as_slice(), samples[(j + 1) % m].as_slice());
            if gap >= PI - 1e-6 {
                return Err(Error::looperr(format!("samples {j} and {} are antipodal", (j + 1) % m)));
            }
        }
        Ok(Self { samples })
    }

    /// Samples a function of `θ`, normalizing each value.
    pub fn from_fn(m: usize, f: impl Fn(f64) -> DVector<f64>) -> Result<Self> {
        let samples = (0..m).map(|j| f(theta(j, m)).normalize()).collect();
        Self::new(samples)
    }

    /// The constant loop `f ≡ e0`: the boundary of the standard hyperbolic plane.
    pub fn circle(n: usize, m: usize) -> Result<Self> {
        Self::from_fn(m, |_| {
            let mut v = DVector::zeros(n + 1);
            v[0] = 1.0;
            v
        })
    }

    pub fn m(&self) -> usize {
        self.samples.len()
    }

    pub fn n(&self) -> usize {
        self.samples[0].len() - 1
    }

    pub fn samples(&self) -> &[DVector<f64>] {
        &self.samples
    }

    pub fn theta(&self, j: usize) -> f64 {
        theta(j, self.m())
    }

    /// Geodesic interpolation between neighbouring samples.
    pub fn value_at(&self, th: f64) -> DVector<f64> {
        let m = self.m();
        let s = th.rem_euclid(2.0 * PI) / (2.0 * PI) * m as f64;
        let j = (s.floor() as usize) % m;
        let frac = s - s.floor();
        slerp(&self.samples[j], &self.samples[(j + 1) % m], frac)
    }

    pub fn boundary_point(&self, j: usize) -> BoundaryPoint {
        let t = self.theta(j);
        BoundaryPoint {
            u: [t.cos(), t.sin()],
            w: self.samples[j].clone(),
        }
    }

    pub fn lift(&self, j: usize) -> AmbientVector {
        self.boundary_point(j).lift()
    }

    pub fn lifts(&self) -> Vec<AmbientVector> {
        (0..self.m()).map(|j| self.lift(j)).collect()
    }

    /// Same loop sampled at `m` equally spaced angles.
    pub fn resampled(&self, m: usize) -> Result<Self> {
        Self::new((0..m).map(|j| self.value_at(theta(j, m))).collect())
    }

    /// Same loop sampled at `m` equally spaced angles by trigonometric interpolation of the
    /// samples, renormalized onto the sphere. Smooth loops stay smooth.
    pub fn resampled_smooth(&self, m: usize) -> Result<Self> {
        let m0 = self.m();
        let dim = self.samples[0].len();
        let half = m0 / 2;
        // Cosine and sine coefficients per frequency and component.
        let mut cs = vec![vec![0.0; dim]; half + 1];
        let mut sn = vec![vec![0.0; dim]; half + 1];
        for (j, w) in self.samples.iter().enumerate() {
            let t = theta(j, m0);
            for k in 0..=half {
                let (s, c) = (k as f64 * t).sin_cos();
                for d in 0..dim {
                    cs[k][d] += w[d] * c / m0 as f64;
                    sn[k][d] += w[d] * s / m0 as f64;
                }
            }
        }
        let samples = (0..m)
            .map(|j| {
                let t = theta(j, m);
                let mut v = DVector::from_column_slice(&cs[0]);
                for k in 1..=half {
                    // The Nyquist term of an even sample count carries half weight.
                    let wgt = if 2 * k == m0 { 1.0 } else { 2.0 };
                    let (s, c) = (k as f64 * t).sin_cos();
                    for d in 0..dim {
                        v[d] += wgt * (cs[k][d] * c + sn[k][d] * s);
                    }
                }
                v.normalize()
            })
            .collect();
        Self::new(samples)
    }

    /// Applies an orthogonal map of the fiber sphere.
    pub fn rotated_fiber(&self, g: &DMatrix<f64>) -> Result<Self> {
        Self::new(self.samples.iter().map(|w| (g * w).normalize()).collect())
    }
}

pub(crate) fn theta(j: usize, m: usize) -> f64 {
    2.0 * PI * j as f64 / m as f64
}

fn circle_dist(j: usize, k: usize, m: usize) -> f64 {
    let d = if j > k { j - k } else { k - j };
    2.0 * PI * d.min(m - d) as f64 / m as f64
}

/// Pairwise Lipschitz ratios `d_{S^n}(w_j, w_k) / d_{S^1}(θ_j, θ_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzProfile {
    /// Largest pairwise ratio.
    pub l_global: f64,
    /// Largest ratio over adjacent samples (speed of the geodesic interpolant).
    pub segment_speed: f64,
    /// Smallest pairwise ratio.
    pub min_ratio: f64,
}

pub fn lipschitz_profile(l: &LoopSpec) -> LipschitzProfile {
    let m = l.m();
    let mut lg = 0.0f64;
    let mut lmin = f64::INFINITY;
    let mut seg = 0.0f64;
    for j in 0..m {
        for k in (j + 1)..m {
            let r = sphere_angle(l.samples[j].as_slice(), l.samples[k].as_slice()) / circle_dist(j, k, m);
            lg = lg.max(r);
            lmin = lmin.min(r);
            if k == j + 1 || (j == 0 && k == m - 1) {
                seg = seg.max(r);
            }
        }
    }
    LipschitzProfile {
        l_global: lg,
        segment_speed: seg,
        min_ratio: lmin,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoopClass {
    /// Strictly contracting.
    Positive,
    /// 1-Lipschitz, not an isometry.
    SemiPositive,
    /// Isometric: a lightlike (photon) loop.
    Photon,
    NotPositive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopClassification {
    pub class: LoopClass,
    pub l_global: f64,
}

pub fn classify_loop(l: &LoopSpec) -> LoopClassification {
    let p = lipschitz_profile(l);
    let lg = p.l_global.max(p.segment_speed);
    let class = if (p.min_ratio - 1.0).abs() <= TOL_ISOMETRIC && (lg - 1.0).abs() <= TOL_ISOMETRIC {
        LoopClass::Photon
    } else if lg < 1.0 - TOL_ISOMETRIC {
        LoopClass::Positive
    } else if lg <= 1.0 + TOL_ISOMETRIC {
        LoopClass::SemiPositive
    } else {
        LoopClass::NotPositive
    };
    LoopClassification { class, l_global: lg }
}

/// Centre of a closed hemisphere containing all samples.
fn hemisphere_center(l: &LoopSpec) -> Result<DVector<f64>> {
    let dim = l.n() + 1;
    let mut c = DVector::zeros(dim);
    for w in l.samples() {
        c += w;
    }
    let center = if c.norm() > 1e-6 * l.m() as f64 {
        c.normalize()
    } else {
        let mut s = DMatrix::zeros(dim, dim);
        for w in l.samples() {
            s += w * w.transpose();
        }
        let eig = s.symmetric_eigen();
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        if dim < 2 || eig.eigenvalues[order[1]] - eig.eigenvalues[order[0]] < 1e-9 * l.m() as f64 {
            return Err(Error::looperr("loop is not contained in a unique closed hemisphere"));
        }
        let mut v = eig.eigenvectors.column(order[0]).into_owned();
        let lead = v.iter().copied().find(|x| x.abs() > 1e-12).unwrap_or(1.0);
        if lead < 0.0 {
            v = -v;
        }
        v
    };
    if l.samples().iter().any(|w| w.dot(&center) < -1e-9) {
        return Err(Error::looperr("loop is not contained in a closed hemisphere"));
    }
    Ok(center)
}

/// Positive loop within `eps` of a semi-positive one: contract toward the hemisphere
/// centre, then smooth with a short periodic kernel when that keeps the loop positive.
pub fn approximate_positive(l: &LoopSpec, eps: f64) -> Result<LoopSpec> {
    let cls = classify_loop(l);
    if eps == 0.0 {
        return if cls.class == LoopClass::Positive {
            Ok(l.clone())
        } else {
            Err(Error::looperr("eps = 0 requires a positive loop"))
        };
    }
    if !(eps > 0.0) {
        return Err(Error::looperr("eps must be non-negative"));
    }
    if cls.class == LoopClass::NotPositive {
        return Err(Error::looperr("loop is not semi-positive"));
    }
    let c = hemisphere_center(l)?;
    let t = (eps / PI).min(0.5);
    let contracted: Vec<DVector<f64>> = l.samples().iter().map(|w| slerp(w, &c, t)).collect();
    let base = LoopSpec::new(contracted)?;
    let m = base.m();
    let smooth: Vec<DVector<f64>> = (0..m)
        .map(|j| {
            let v = &base.samples[(j + m - 1) % m] * 0.25 + &base.samples[j] * 0.5 + &base.samples[(j + 1) % m] * 0.25;
            v.normalize()
        })
        .collect();
    let within = |cand: &LoopSpec| {
        cand.samples()
            .iter()
            .zip(l.samples())
            .all(|(a, b)| sphere_angle(a.as_slice(), b.as_slice()) <= eps)
    };
    if let Ok(s) = LoopSpec::new(smooth) {
        if classify_loop(&s).class == LoopClass::Positive && within(&s) {
            return Ok(s);
        }
    }
    if classify_loop(&base).class == LoopClass::Positive && within(&base) {
        return Ok(base);
    }
    Err(Error::looperr("contraction did not produce a positive loop within eps"))
}

/// Rescales three lifts so that their mutual pairings are all negative.
fn consistent_signs(v: [&[f64]; 3]) -> [f64; 3] {
    let a12 = pair(v[0], v[1]);
    let a13 = pair(v[0], v[2]);
    let a23 = pair(v[1], v[2]);
    match (a12 < 0.0, a13 < 0.0, a23 < 0.0) {
        (true, true, true) => [1.0, 1.0, 1.0],
        (true, false, false) => [1.0, 1.0, -1.0],
        (false, true, false) => [1.0, -1.0, 1.0],
        (false, false, true) => [-1.0, 1.0, 1.0],
        _ => [1.0, 1.0, 1.0],
    }
}

/// Symmetric barycentre of a positive triple of boundary points.
pub fn barycenter(l1: &BoundaryPoint, l2: &BoundaryPoint, l3: &BoundaryPoint) -> Result<PointH> {
    let v = [l1.lift(), l2.lift(), l3.lift()];
    let g = crate::ambient::triple_gram(&v[0], &v[1], &v[2])?;
    if g.class != crate::ambient::TripleClass::Positive {
        return Err(Error::looperr(format!("barycentre needs a positive triple, got {:?}", g.class)));
    }
    let s = consistent_signs([v[0].as_slice(), v[1].as_slice(), v[2].as_slice()]);
    let z: Vec<DVector<f64>> = (0..3).map(|i| &v[i].0 * s[i]).collect();
    let a12 = pair(z[0].as_slice(), z[1].as_slice());
    let a13 = pair(z[0].as_slice(), z[2].as_slice());
    let a23 = pair(z[1].as_slice(), z[2].as_slice());
    let c1 = (-a23 / (a12 * a13)).sqrt();
    let c2 = (-a13 / (a12 * a23)).sqrt();
    let c3 = (-a12 / (a13 * a23)).sqrt();
    let b = (&z[0] * c1 + &z[1] * c2 + &z[2] * c3) / 6f64.sqrt();
    PointH::normalize(AmbientVector(b))
}

/// A point in the convex hull of a positive loop: the normalized mean of barycentres
/// over a fan of evenly spread sample triples.
pub fn interior_point(l: &LoopSpec) -> Result<PointH> {
    let cls = classify_loop(l);
    match cls.class {
        LoopClass::Positive | LoopClass::SemiPositive => {}
        c => return Err(Error::looperr(format!("interior point needs a positive loop, got {c:?}"))),
    }
    let m = l.m();
    let dim = l.n() + 3;
    let mut acc = DVector::zeros(dim);
    let mut used = 0;
    for j in 0..m {
        let k = (j + (m + 1) / 3) % m;
        let i = (j + (2 * m + 1) / 3) % m;
        if let Ok(b) = barycenter(&l.boundary_point(j), &l.boundary_point(k), &l.boundary_point(i)) {
            acc += &b.vector().0;
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::looperr("no positive triple found for the interior point"));
    }
    let p = PointH::normalize(AmbientVector(acc))?;
    for j in 0..m {
        let lj = l.lift(j);
        if pair(p.as_slice(), lj.as_slice()) > -1e-8 {
            return Err(Error::looperr("interior point is not strictly inside the hull"));
        }
    }
    Ok(p)
}

/// Result of a convex-hull membership test.
#[derive(Debug, Clone, PartialEq)]
pub struct HullTest {
    pub contained: bool,
    /// Distance from the normalized target to the cone spanned by the normalized generators.
    pub residual: f64,
}

/// Tests whether `x` lies in the closed cone spanned by `generators` (Euclidean-normalized),
/// via non-negative least squares.
pub fn hull_contains(generators: &[AmbientVector], x: &AmbientVector, tol: f64) -> Result<HullTest> {
    if generators.is_empty() {
        return Err(Error::looperr("hull test needs generators"));
    }
    let d = x.dim();
    if generators.iter().any(|g| g.dim() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: generators.iter().find(|g| g.dim() != d).unwrap().dim(),
        });
    }
    let a = DMatrix::from_fn(d, generators.len(), |r, c| generators[c].0[r] / generators[c].0.norm());
    let b = &x.0 / x.0.norm();
    let (_, res) = nnls(&a, &b, 50 * generators.len() + 100)
        .ok_or_else(|| Error::looperr("hull solver did not converge"))?;
    Ok(HullTest {
        contained: res <= tol,
        residual: res,
    })
}

/// A closed polygonal curve in `H^{2,n}`, sampled at equally spaced parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteCurve {
    points: Vec<PointH>,
}

impl FiniteCurve {
    pub fn new(points: Vec<PointH>) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::looperr("a finite curve needs at least 3 samples"));
        }
        let d = points[0].dim();
        if points.iter().any(|p| p.dim() != d) {
            return Err(Error::looperr("curve samples have mixed dimensions"));
        }
        Ok(Self { points })
    }

    pub fn m(&self) -> usize {
        self.points.len()
    }

    pub fn n(&self) -> usize {
        self.points[0].n()
    }

    pub fn points(&self) -> &[PointH] {
        &self.points
    }

    pub fn point(&self, j: usize) -> &PointH {
        &self.points[j % self.m()]
    }

    fn require_fd(&self) -> Result<()> {
        if self.m() < 16 {
            return Err(Error::looperr("derivative estimates need at least 16 samples"));
        }
        Ok(())
    }

    fn at(&self, j: isize) -> &[f64] {
        let m = self.m() as isize;
        self.points[j.rem_euclid(m) as usize].as_slice()
    }

    /// Velocity with respect to `θ = 2π j / m`, five-point periodic stencil, projected
    /// to the tangent space.
    pub fn velocity(&self, j: usize) -> Result<DVector<f64>> {
        self.require_fd()?;
        let h = 2.0 * PI / self.m() as f64;
        let j = j as isize;
        let (a, b, c, d) = (self.at(j - 2), self.at(j - 1), self.at(j + 1), self.at(j + 2));
        let x = self.at(j);
        let mut v = DVector::from_fn(x.len(), |k, _| (a[k] - 8.0 * b[k] + 8.0 * c[k] - d[k]) / (12.0 * h));
        let s = pair(v.as_slice(), x);
        for k in 0..x.len() {
            v[k] += s * x[k];
        }
        Ok(v)
    }

    /// Covariant acceleration (second derivative projected onto `x^⊥`).
    pub fn acceleration(&self, j: usize) -> Result<DVector<f64>> {
        self.require_fd()?;
        let h = 2.0 * PI / self.m() as f64;
        let j = j as isize;
        let (a, b, c, d) = (self.at(j - 2), self.at(j - 1), self.at(j + 1), self.at(j + 2));
        let x = self.at(j);
        let mut v = DVector::from_fn(x.len(), |k, _| {
            (-a[k] + 16.0 * b[k] - 30.0 * x[k] + 16.0 * c[k] - d[k]) / (12.0 * h * h)
        });
        let s = pair(v.as_slice(), x);
        for k in 0..x.len() {
            v[k] += s * x[k];
        }
        Ok(v)
    }

    /// Spatial lengths of the polygon edges `x_j x_{j+1}`.
    pub fn segment_lengths(&self) -> Vec<f64> {
        let m = self.m();
        (0..m)
            .map(|j| spatial_distance_raw(self.points[j].as_slice(), self.points[(j + 1) % m].as_slice()))
            .collect()
    }

    pub fn transformed(&self, g: &DMatrix<f64>) -> Self {
        Self {
            points: self.points.iter().map(|p| p.transformed(g)).collect(),
        }
    }
}

/// The curve `ρ ↦ exp_p(ρ v_j)` toward the normalized lifts of the loop samples.
pub fn exhaustion_curve(l: &LoopSpec, p: &PointH, rho: f64) -> Result<FiniteCurve> {
    if p.dim() != l.n() + 3 {
        return Err(Error::DimensionMismatch {
            expected: l.n() + 3,
            got: p.dim(),
        });
    }
    if !(rho > 0.0) {
        return Err(Error::looperr("exhaustion radius must be positive"));
    }
    let e = (-rho).exp();
    let sh = rho.sinh();
    let mut pts = Vec::with_capacity(l.m());
    for j in 0..l.m() {
        let lj = l.lift(j);
        let c = pair(p.as_slice(), lj.as_slice());
        if !(c < 0.0) {
            return Err(Error::looperr(format!("sample {j} is not in the half-space of p")));
        }
        let lhat = &lj.0 / (-c);
        // cosh ρ p + sinh ρ (l̂ - p) = e^{-ρ} p + sinh ρ l̂
        let x = &p.vector().0 * e + lhat * sh;
        pts.push(PointH::from_unchecked(x));
    }
    FiniteCurve::new(pts)
}

fn det3(g: &Matrix3<f64>) -> f64 {
    g.determinant()
}

/// Outcome of the three sampled strong-positivity conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct StrongPositivityReport {
    /// Every sampled triple spans a positive (signature (2,1)) subspace.
    pub triples_ok: bool,
    pub worst_triple_det: f64,
    /// Osculating planes are spacelike.
    pub osculating_ok: bool,
    /// Smallest `λ_min / trace` of the normalized osculating Gram.
    pub worst_osculating_margin: f64,
    /// `span{x, y, γ'(y)}` is positive for all sample pairs.
    pub mixed_ok: bool,
    pub worst_mixed_det: f64,
    pub passed: bool,
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let q = qform(v).abs().sqrt().max(1e-300);
    v.iter().map(|x| x / q).collect()
}

pub fn strongly_positive_check(c: &FiniteCurve) -> Result<StrongPositivityReport> {
    let m = c.m();
    let pts: Vec<&[f64]> = c.points.iter().map(|p| p.as_slice()).collect();
    let mut g = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            g[i * m + j] = pair(pts[i], pts[j]);
        }
    }
    let mut triples_ok = true;
    let mut worst_triple = f64::NEG_INFINITY;
    for i in 0..m {
        for j in (i + 1)..m {
            let a = g[i * m + j];
            for k in (j + 1)..m {
                let b = g[i * m + k];
                let cc = g[j * m + k];
                let scale = (a * b * cc).abs().max(1.0);
                let det = (-1.0 + a * a + b * b + cc * cc + 2.0 * a * b * cc) / scale;
                let positive = det < 0.0 && a.abs() >= 1.0;
                if !positive {
                    triples_ok = false;
                }
                worst_triple = worst_triple.max(det);
            }
        }
    }
    let vel: Vec<Vec<f64>> = (0..m).map(|j| c.velocity(j).map(|v| normalized(v.as_slice()))).collect::<Result<_>>()?;
    let mut osc_ok = true;
    let mut worst_osc = f64::INFINITY;
    for j in 0..m {
        let t = &vel[j];
        let a = c.acceleration(j)?;
        let an = normalized(a.as_slice());
        let g11 = qform(t);
        let g12 = pair(t, &an);
        let g22 = qform(&an);
        let tr = g11 + g22;
        let det = g11 * g22 - g12 * g12;
        let lmin = tr / 2.0 - ((g11 - g22).powi(2) / 4.0 + g12 * g12).sqrt();
        let margin = if tr > 0.0 { lmin / tr } else { -1.0 };
        if !(det > 0.0 && tr > 0.0 && margin > 1e-12) {
            osc_ok = false;
        }
        worst_osc = worst_osc.min(margin);
    }
    let mut mixed_ok = true;
    let mut worst_mixed = f64::NEG_INFINITY;
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            let t = &vel[j];
            let b = g[i * m + j];
            let xt = pair(pts[i], t);
            let yt = pair(pts[j], t);
            let gm = Matrix3::new(-1.0, b, xt, b, -1.0, yt, xt, yt, qform(t));
            let det = det3(&gm) / b.abs().max(1.0).powi(2);
            if !(det < 0.0) {
                mixed_ok = false;
            }
            worst_mixed = worst_mixed.max(det);
        }
    }
    Ok(StrongPositivityReport {
        triples_ok,
        worst_triple_det: worst_triple,
        osculating_ok: osc_ok,
        worst_osculating_margin: worst_osc,
        mixed_ok,
        worst_mixed_det: worst_mixed,
        passed: triples_ok && osc_ok && mixed_ok,
    })
}

/// Largest diameter of the projections of the curve from one of its points, measured in
/// the hyperbolic space `(x0 ⊕ T_{x0}γ)^⊥`.
pub fn angular_width(c: &FiniteCurve) -> Result<f64> {
    let m = c.m();
    let mut width = 0.0f64;
    for i in 0..m {
        let x0 = c.points[i].as_slice();
        let t = c.velocity(i)?;
        let qt = qform(t.as_slice());
        if !(qt > 0.0) {
            return Err(Error::looperr("curve tangent is not spacelike"));
        }
        let th: Vec<f64> = t.iter().map(|v| v / qt.sqrt()).collect();
        let mut proj: Vec<Vec<f64>> = Vec::with_capacity(m - 1);
        for j in 0..m {
            if j == i {
                continue;
            }
            let y = c.points[j].as_slice();
            let a = pair(y, x0);
            let b = pair(y, &th);
            let v: Vec<f64> = (0..y.len()).map(|k| y[k] + a * x0[k] - b * th[k]).collect();
            let qv = qform(&v);
            if !(qv > 0.0) {
                return Err(Error::looperr("projection is not positive: curve is not strongly positive"));
            }
            let s = qv.sqrt();
            proj.push(v.iter().map(|x| x / s).collect());
        }
        for a in 0..proj.len() {
            for b in (a + 1)..proj.len() {
                let ch = pair(&proj[a], &proj[b]).abs().max(1.0);
                width = width.max(ch.acosh());
            }
        }
    }
    Ok(width)
}

/// Smallest spatial distance between samples whose distance is at most half of their
/// distance along the curve; infinite when no pair qualifies.
pub fn unpinched_delta(c: &FiniteCurve) -> Result<f64> {
    let m = c.m();
    if m < 3 {
        return Err(Error::looperr("unpinched delta needs at least 3 samples"));
    }
    let seg = c.segment_lengths();
    let total: f64 = seg.iter().sum();
    let mut cum = vec![0.0; m + 1];
    for j in 0..m {
        cum[j + 1] = cum[j] + seg[j];
    }
    let mut delta = f64::INFINITY;
    for i in 0..m {
        for j in (i + 1)..m {
            let along = cum[j] - cum[i];
            let dg = along.min(total - along);
            let d = spatial_distance_raw(c.points[i].as_slice(), c.points[j].as_slice());
            if d <= 0.5 * dg {
                delta = delta.min(d);
            }
        }
    }
    Ok(delta)
}
