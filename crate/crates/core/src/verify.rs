//! Post-hoc checks of structural properties on solver outputs.
//!
//! Every check produces [`CheckOutcome`]s carrying the measured value, the threshold it is
//! compared against and the location of the worst case. Checks implement [`Check`] and are
//! looked up by name in a [`CheckRegistry`], so front ends select them at runtime.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, Matrix2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::ambient::{pair, qform, warped_projection, AmbientVector, PointH};
use crate::error::{Error, Result};
use crate::loops::{angular_width, hull_contains, FiniteCurve, LoopSpec};
use crate::surfaces::{
    acausality_check, gauss_curvature, gauss_lift_defect, local_fit, local_fit_any, mean_curvature_residual,
    DiscreteSurface, LocalFit,
};

/// How a value is compared with its threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    AtMost,
    AtLeast,
}

impl Relation {
    pub fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Relation::AtMost => value <= threshold,
            Relation::AtLeast => value >= threshold,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Relation::AtMost => "<=",
            Relation::AtLeast => ">=",
        }
    }
}

/// One measured quantity against its threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    /// NaN when the check could not be evaluated.
    pub value: f64,
    pub threshold: f64,
    pub relation: Relation,
    pub pass: bool,
    /// Where the worst value was attained, e.g. `node 17` or `pair (3, 41)`.
    pub location: Option<String>,
    pub note: Option<String>,
}

impl CheckOutcome {
    pub fn new(name: impl Into<String>, value: f64, threshold: f64, relation: Relation) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            relation,
            pass: relation.holds(value, threshold),
            location: None,
            note: None,
        }
    }

    pub fn at(mut self, location: impl Into<String>) -> Self {
        self.location = Some(location.into());
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    fn failed(name: &str, threshold: f64, relation: Relation, err: &Error) -> Self {
        Self {
            name: name.to_string(),
            value: f64::NAN,
            threshold,
            relation,
            pass: false,
            location: None,
            note: Some(err.to_string()),
        }
    }
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {:.3e} {} {:.3e}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.relation.symbol(),
            self.threshold
        )?;
        if let Some(l) = &self.location {
            write!(f, " at {l}")?;
        }
        if let Some(n) = &self.note {
            write!(f, " ({n})")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<CheckOutcome>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn get(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Thresholds and sampling parameters of the checks.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub residual_tol: f64,
    /// Pass iff `sup B ≤ -1 + sup_b_tol`.
    pub sup_b_tol: f64,
    pub hausdorff_tol: f64,
    /// Pass iff the Hessian margin is at least `-hessian_tol`.
    pub hessian_tol: f64,
    pub hessian_samples: usize,
    /// Finite-difference step along the product geodesics.
    pub hessian_step: f64,
    /// Angular resolution of the direction search, per half turn.
    pub direction_grid: usize,
    pub hull_tol: f64,
    pub angle_tol: f64,
    /// The discrete curvature bound is `-κ - curvature_slack · h`.
    pub curvature_slack: f64,
    pub gauss_lift_tol: f64,
    /// Restricts the pointwise curvature and Gauss-lift checks to interior nodes with
    /// parameter radius at most this value.
    pub compact_radius: Option<f64>,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            residual_tol: 1e-8,
            sup_b_tol: 1e-5,
            hausdorff_tol: 1e-4,
            hessian_tol: 1e-4,
            hessian_samples: 32,
            hessian_step: 1e-3,
            direction_grid: 24,
            hull_tol: 1e-6,
            angle_tol: 1e-3,
            curvature_slack: 5.0,
            gauss_lift_tol: 0.1,
            compact_radius: None,
            seed: 0,
        }
    }
}

/// What a check may look at. Checks whose inputs are missing are not applicable.
#[derive(Clone, Copy)]
pub struct VerifyInput<'a> {
    pub surface: &'a DiscreteSurface,
    /// Second surface for the pairwise checks.
    pub other: Option<&'a DiscreteSurface>,
    pub loop_spec: Option<&'a LoopSpec>,
    /// Boundary curve of a finite solve.
    pub curve: Option<&'a FiniteCurve>,
}

impl<'a> VerifyInput<'a> {
    pub fn new(surface: &'a DiscreteSurface) -> Self {
        Self {
            surface,
            other: None,
            loop_spec: None,
            curve: None,
        }
    }
}

pub trait Check: Send + Sync {
    fn name(&self) -> &str;
    fn applies(&self, input: &VerifyInput<'_>) -> bool;
    fn run(&self, input: &VerifyInput<'_>, opts: &VerifyOptions) -> Result<Vec<CheckOutcome>>;
}

/// Named checks, iterated in name order.
#[derive(Clone)]
pub struct CheckRegistry {
    checks: BTreeMap<String, Arc<dyn Check>>,
}

impl fmt::Debug for CheckRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.checks.keys()).finish()
    }
}

impl Default for CheckRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(MeanCurvatureCheck));
        r.register(Arc::new(AcausalityCheck));
        r.register(Arc::new(CurvatureBoundCheck));
        r.register(Arc::new(GaussLiftCheck));
        r.register(Arc::new(UniquenessCheck));
        r.register(Arc::new(HessianBoundCheck));
        r.register(Arc::new(HullCheck));
        r.register(Arc::new(BoundaryAngleCheck));
        r
    }
}

impl CheckRegistry {
    pub fn empty() -> Self {
        Self { checks: BTreeMap::new() }
    }

    pub fn register(&mut self, c: Arc<dyn Check>) {
        self.checks.insert(c.name().to_string(), c);
    }

    pub fn get(&self, name: &str) -> Option<Arc<dyn Check>> {
        self.checks.get(name).cloned()
    }

    pub fn names(&self) -> Vec<String> {
        self.checks.keys().cloned().collect()
    }

    /// Runs the named checks, or every applicable one when `names` is empty. A requested
    /// check that is not applicable, or that errors, is reported as failed.
    pub fn run(&self, input: &VerifyInput<'_>, opts: &VerifyOptions, names: &[String]) -> Result<VerifyReport> {
        let selected: Vec<(Arc<dyn Check>, bool)> = if names.is_empty() {
            self.checks.values().map(|c| (c.clone(), false)).collect()
        } else {
            names
                .iter()
                .map(|n| {
                    self.get(n)
                        .map(|c| (c, true))
                        .ok_or_else(|| Error::verify(format!("unknown check {n:?}; known: {:?}", self.names())))
                })
                .collect::<Result<_>>()?
        };
        let mut report = VerifyReport::default();
        for (c, requested) in selected {
            if !c.applies(input) {
                if requested {
                    report.checks.push(CheckOutcome::failed(
                        c.name(),
                        f64::NAN,
                        Relation::AtMost,
                        &Error::verify("inputs for this check are missing"),
                    ));
                }
                continue;
            }
            match c.run(input, opts) {
                Ok(out) => report.checks.extend(out),
                Err(e) => report
                    .checks
                    .push(CheckOutcome::failed(c.name(), f64::NAN, Relation::AtMost, &e)),
            }
        }
        Ok(report)
    }
}

/// Runs every applicable check of the default registry.
pub fn verify(input: &VerifyInput<'_>, opts: &VerifyOptions) -> Result<VerifyReport> {
    CheckRegistry::default().run(input, opts, &[])
}

// ---------------------------------------------------------------------------------------
// Uniqueness functional

#[derive(Debug, Clone, PartialEq)]
pub struct UniquenessGap {
    /// `max ⟨x, y⟩` over node pairs.
    pub sup_b: f64,
    pub argmax: (usize, usize),
    /// Symmetric distance between each node set and the other surface interpolated at the
    /// node's projection, in standard ambient coordinates.
    pub hausdorff: f64,
    pub hausdorff_at: (usize, usize),
}

fn require_curved(s: &DiscreteSurface) -> Result<()> {
    if s.is_flat() {
        return Err(Error::verify("check needs a surface in H^{2,n}"));
    }
    Ok(())
}

fn ambient_nodes(s: &DiscreteSurface) -> Vec<DVector<f64>> {
    s.ambient_positions()
}

/// Sign putting `b` on the lift of `a` (pairings negative).
fn lift_sign(a: &[DVector<f64>], b: &[DVector<f64>]) -> f64 {
    if pair(a[0].as_slice(), b[0].as_slice()) > 0.0 {
        -1.0
    } else {
        1.0
    }
}

pub fn uniqueness_gap(s1: &DiscreteSurface, s2: &DiscreteSurface) -> Result<UniquenessGap> {
    require_curved(s1)?;
    require_curved(s2)?;
    if s1.n() != s2.n() {
        return Err(Error::DimensionMismatch {
            expected: s1.n(),
            got: s2.n(),
        });
    }
    let x = ambient_nodes(s1);
    let mut y = ambient_nodes(s2);
    let sg = lift_sign(&x, &y);
    y.iter_mut().for_each(|v| *v *= sg);

    let (sup_b, argmax) = x
        .par_iter()
        .enumerate()
        .map(|(i, xi)| {
            let mut best = (f64::NEG_INFINITY, (i, 0));
            for (j, yj) in y.iter().enumerate() {
                let b = pair(xi.as_slice(), yj.as_slice());
                if b > best.0 {
                    best = (b, (i, j));
                }
            }
            best
        })
        .reduce(|| (f64::NEG_INFINITY, (0, 0)), |a, b| if b.0 > a.0 { b } else { a });

    let one_sided = |pts: &[DVector<f64>], target: &DiscreteSurface, sign: f64| -> Result<(f64, usize)> {
        let d: Vec<Result<f64>> = pts
            .par_iter()
            .map(|p| {
                let ph = PointH::from_unchecked(p * sign);
                let z = warped_projection(target.frame(), &ph)?;
                let q = target.position_at_clamped(z) * sign;
                Ok((p - q).norm())
            })
            .collect();
        let mut worst = (0.0f64, 0usize);
        for (i, v) in d.into_iter().enumerate() {
            let v = v?;
            if v > worst.0 {
                worst = (v, i);
            }
        }
        Ok(worst)
    };
    let (h12, i12) = one_sided(&x, s2, sg)?;
    let (h21, i21) = one_sided(&y, s1, sg)?;
    let (hausdorff, hausdorff_at) = if h12 >= h21 { (h12, (i12, usize::MAX)) } else { (h21, (usize::MAX, i21)) };
    Ok(UniquenessGap {
        sup_b,
        argmax,
        hausdorff,
        hausdorff_at,
    })
}

// ---------------------------------------------------------------------------------------
// Hessian of B along product geodesics

/// Second-order geodesic germ of a surface at a node, in standard ambient coordinates.
#[derive(Debug, Clone)]
struct Germ {
    x: DVector<f64>,
    t: [DVector<f64>; 2],
    /// `II(e_a, e_b)` for `(a, b) = (0,0), (0,1), (1,1)`.
    ii: [DVector<f64>; 3],
}

impl Germ {
    fn from_fit(s: &DiscreteSurface, fit: &LocalFit, sign: f64) -> Self {
        let sl = s.lambda().sqrt();
        let frame = s.frame();
        let amb = |v: &[f64], scale: f64| frame.from_frame(v) * (scale * sign);
        let x = amb(&fit.point, sl);
        // Model lengths scale by 1/√λ relative to the ambient quadric, curvatures by √λ.
        let t = [amb(&fit.tangent[0], 1.0), amb(&fit.tangent[1], 1.0)];
        let ii = [
            amb(&fit.ii(0, 0), 1.0 / sl),
            amb(&fit.ii(0, 1), 1.0 / sl),
            amb(&fit.ii(1, 1), 1.0 / sl),
        ];
        Self { x, t, ii }
    }

    fn direction(&self, angle: f64) -> (DVector<f64>, DVector<f64>) {
        let (s, c) = angle.sin_cos();
        let u = &self.t[0] * c + &self.t[1] * s;
        let n = &self.ii[0] * (c * c) + &self.ii[1] * (2.0 * c * s) + &self.ii[2] * (s * s);
        (u, n)
    }

    /// `exp_x(σ u + σ²/2 n)`: agrees with the surface geodesic through second order, and the
    /// symmetric difference below cancels the third-order term.
    fn point(&self, u: &DVector<f64>, n: &DVector<f64>, sigma: f64) -> DVector<f64> {
        let v = u * sigma + n * (0.5 * sigma * sigma);
        let r = qform(v.as_slice()).max(0.0).sqrt();
        let shc = if r < 1e-8 { 1.0 + r * r / 6.0 } else { r.sinh() / r };
        &self.x * r.cosh() + v * shc
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HessianSample {
    pub i: usize,
    pub j: usize,
    pub b: f64,
    /// Largest second derivative found over unit directions `w = (u, v)`.
    pub best_hessian: f64,
    pub best_angles: (f64, f64),
    /// `best_hessian - (2B + 2)`.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HessianReport {
    pub samples: Vec<HessianSample>,
    /// Pairs whose local fit failed.
    pub skipped: usize,
    pub worst_margin: f64,
}

impl HessianReport {
    /// Smallest margin over the pairs with `B > b_min`.
    pub fn worst_margin_above(&self, b_min: f64) -> Option<f64> {
        self.samples
            .iter()
            .filter(|s| s.b > b_min)
            .map(|s| s.margin)
            .fold(None, |a, m| Some(a.map_or(m, |a: f64| a.min(m))))
    }
}

fn hessian_along(g1: &Germ, g2: &Germ, a: f64, b: f64, h: f64) -> f64 {
    let (u1, n1) = g1.direction(a);
    let (u2, n2) = g2.direction(b);
    let bval = |s: f64| pair(g1.point(&u1, &n1, s).as_slice(), g2.point(&u2, &n2, s).as_slice());
    let b0 = pair(g1.x.as_slice(), g2.x.as_slice());
    let d2 = |s: f64| (bval(s) + bval(-s) - 2.0 * b0) / (s * s);
    // Richardson on the h² error term.
    (4.0 * d2(h / 2.0) - d2(h)) / 3.0
}

fn best_direction(g1: &Germ, g2: &Germ, opts: &VerifyOptions) -> (f64, (f64, f64)) {
    use std::f64::consts::PI;
    let n = opts.direction_grid.max(4);
    let h = opts.hessian_step;
    // (u, v) and (-u, -v) give the same value, so v ranges over half a turn.
    let mut best = (f64::NEG_INFINITY, (0.0, 0.0));
    for ia in 0..2 * n {
        let a = PI * ia as f64 / n as f64;
        for ib in 0..n {
            let b = PI * ib as f64 / n as f64;
            let v = hessian_along(g1, g2, a, b, h);
            if v > best.0 {
                best = (v, (a, b));
            }
        }
    }
    // Compass search from the best grid direction.
    let mut step = PI / n as f64;
    while step > 1e-9 {
        let mut improved = false;
        let (a, b) = best.1;
        for (da, db) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
            let v = hessian_along(g1, g2, a + da, b + db, h);
            if v > best.0 {
                best = (v, (a + da, b + db));
                improved = true;
            }
        }
        if !improved {
            step /= 2.0;
        }
    }
    best
}

/// Samples node pairs of `s1 × s2` (half uniformly, half pairing a node with its best
/// partner for `B`) and searches for the direction maximizing the finite-difference Hessian
/// of `B(x, y) = ⟨x, y⟩` along product geodesics.
pub fn hessian_bound_check(s1: &DiscreteSurface, s2: &DiscreteSurface, opts: &VerifyOptions) -> Result<HessianReport> {
    require_curved(s1)?;
    require_curved(s2)?;
    let xs = ambient_nodes(s1);
    let ys = ambient_nodes(s2);
    let sg = lift_sign(&xs, &ys);
    let i1 = s1.mesh().interior_nodes();
    let i2 = s2.mesh().interior_nodes();
    if i1.is_empty() || i2.is_empty() {
        return Err(Error::verify("surfaces have no interior nodes"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut pairs = Vec::with_capacity(opts.hessian_samples);
    for k in 0..opts.hessian_samples {
        let i = i1[rng.random_range(0..i1.len())];
        let j = if k % 2 == 0 {
            i2[rng.random_range(0..i2.len())]
        } else {
            *i2.iter()
                .max_by(|&&a, &&b| {
                    let ba = sg * pair(xs[i].as_slice(), ys[a].as_slice());
                    let bb = sg * pair(xs[i].as_slice(), ys[b].as_slice());
                    ba.total_cmp(&bb)
                })
                .unwrap()
        };
        if !pairs.contains(&(i, j)) {
            pairs.push((i, j));
        }
    }
    let results: Vec<Option<HessianSample>> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let f1 = local_fit(s1, i).ok()?;
            let f2 = local_fit(s2, j).ok()?;
            let g1 = Germ::from_fit(s1, &f1, 1.0);
            let g2 = Germ::from_fit(s2, &f2, sg);
            let b = pair(g1.x.as_slice(), g2.x.as_slice());
            let (best, angles) = best_direction(&g1, &g2, opts);
            Some(HessianSample {
                i,
                j,
                b,
                best_hessian: best,
                best_angles: angles,
                margin: best - (2.0 * b + 2.0),
            })
        })
        .collect();
    let skipped = results.iter().filter(|r| r.is_none()).count();
    let samples: Vec<HessianSample> = results.into_iter().flatten().collect();
    let worst_margin = samples.iter().map(|s| s.margin).fold(f64::INFINITY, f64::min);
    Ok(HessianReport {
        samples,
        skipped,
        worst_margin,
    })
}

// ---------------------------------------------------------------------------------------
// Convex hull

#[derive(Debug, Clone, PartialEq)]
pub struct HullReport {
    pub worst_residual: f64,
    pub worst_node: usize,
}

fn hull_of(generators: &[AmbientVector], s: &DiscreteSurface, tol: f64) -> Result<HullReport> {
    require_curved(s)?;
    let pts = ambient_nodes(s);
    // Put the nodes on the side of the generators' cone.
    let sg = if pts.len() > 0 && pair(pts[0].as_slice(), generators[0].as_slice()) > 0.0 {
        -1.0
    } else {
        1.0
    };
    let res: Vec<Result<f64>> = pts
        .par_iter()
        .map(|p| Ok(hull_contains(generators, &AmbientVector(p * sg), tol)?.residual))
        .collect();
    let mut worst = HullReport {
        worst_residual: 0.0,
        worst_node: 0,
    };
    for (i, r) in res.into_iter().enumerate() {
        let r = r?;
        if r > worst.worst_residual {
            worst = HullReport {
                worst_residual: r,
                worst_node: i,
            };
        }
    }
    Ok(worst)
}

/// Largest hull-membership residual of the nodes against the lifted loop samples.
pub fn hull_containment(s: &DiscreteSurface, l: &LoopSpec) -> Result<HullReport> {
    if l.n() != s.n() {
        return Err(Error::DimensionMismatch {
            expected: s.n(),
            got: l.n(),
        });
    }
    hull_of(&l.lifts(), s, 1e-6)
}

/// As [`hull_containment`] with the points of a finite curve as generators.
pub fn hull_containment_curve(s: &DiscreteSurface, c: &FiniteCurve) -> Result<HullReport> {
    let g: Vec<AmbientVector> = c.points().iter().map(|p| p.vector().clone()).collect();
    hull_of(&g, s, 1e-6)
}

// ---------------------------------------------------------------------------------------
// Grassmannian of spacelike planes

/// A spacelike 2-plane tangent to `H^{2,n}` at a point, with a q-orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SpacelikePlane {
    point: PointH,
    basis: [DVector<f64>; 2],
}

impl SpacelikePlane {
    /// Plane spanned by `a` and `b`, which must be tangent at `point` and span a positive
    /// definite plane.
    pub fn new(point: PointH, a: &[f64], b: &[f64]) -> Result<Self> {
        let x = point.as_slice();
        if a.len() != x.len() || b.len() != x.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: a.len().min(b.len()),
            });
        }
        let scale = a.iter().chain(b).map(|v| v.abs()).fold(0.0, f64::max) * x.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if pair(a, x).abs() > 1e-9 * scale.max(1.0) || pair(b, x).abs() > 1e-9 * scale.max(1.0) {
            return Err(Error::verify("plane is not tangent at its point"));
        }
        let qa = qform(a);
        if !(qa > 0.0) {
            return Err(Error::verify("plane is not spacelike"));
        }
        let e1 = DVector::from_column_slice(a) / qa.sqrt();
        let e2 = DVector::from_column_slice(b) - &e1 * pair(b, e1.as_slice());
        let q2 = qform(e2.as_slice());
        if !(q2 > 1e-14 * qform(b).abs().max(qa)) {
            return Err(Error::verify("plane is not spacelike"));
        }
        Ok(Self {
            point,
            basis: [e1, e2 / q2.sqrt()],
        })
    }

    pub fn point(&self) -> &PointH {
        &self.point
    }

    pub fn basis(&self) -> &[DVector<f64>; 2] {
        &self.basis
    }

    pub fn transformed(&self, g: &DMatrix<f64>) -> Self {
        Self {
            point: self.point.transformed(g),
            basis: [g * &self.basis[0], g * &self.basis[1]],
        }
    }
}

/// Parallel transport of a tangent vector at `from` to `to` along the connecting geodesic:
/// the composition of the reflections in `from` and `from + to`, which fixes the orthogonal
/// of `span(from, to)`.
pub fn parallel_transport(from: &PointH, to: &PointH, v: &[f64]) -> Result<DVector<f64>> {
    let (y, x) = (from.as_slice(), to.as_slice());
    let c = pair(x, y);
    let dist = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    if dist == 0.0 {
        return Ok(DVector::from_column_slice(v));
    }
    let scale = x.iter().chain(y).map(|v| v * v).sum::<f64>();
    // q(x - y) = -2(c + 1); distinct points with q(x - y) ≈ 0 lie on a light ray.
    if dist > 1e-10 * scale.sqrt() && (2.0 * (c + 1.0)).abs() <= 1e-10 * dist * dist {
        return Err(Error::verify("points are joined by a lightlike geodesic"));
    }
    if c >= 1.0 - 1e-12 * scale {
        return Err(Error::verify("points are not joined by a geodesic"));
    }
    // σ_y(v) = v for v ⟂ y; then σ_{x+y}(v) = v - 2⟨v, x+y⟩/q(x+y) (x+y).
    let k = pair(v, x) / (c - 1.0);
    Ok(DVector::from_fn(v.len(), |i, _| v[i] - k * (x[i] + y[i])))
}

/// Symmetric-space distance `√Σ θ_i²` between spacelike planes, where `cosh θ_i` are the
/// singular values of the q-orthogonal projection between them. `q` is first transported
/// to the point of `p`.
pub fn grassmann_distance(p: &SpacelikePlane, q: &SpacelikePlane) -> Result<f64> {
    if p.point.dim() != q.point.dim() {
        return Err(Error::DimensionMismatch {
            expected: p.point.dim(),
            got: q.point.dim(),
        });
    }
    let qb = [
        parallel_transport(&q.point, &p.point, q.basis[0].as_slice())?,
        parallel_transport(&q.point, &p.point, q.basis[1].as_slice())?,
    ];
    // Split q's basis into its projection on p and the part r_j orthogonal to p. Then
    // MᵀM = I - Gram(r) and -Gram(r) has eigenvalues sinh² θ_i, which is stable near 0.
    let mut r: Vec<DVector<f64>> = Vec::with_capacity(2);
    for qj in &qb {
        let mut v = qj.clone();
        for pi in &p.basis {
            v -= pi * pair(qj.as_slice(), pi.as_slice());
        }
        r.push(v);
    }
    let g = Matrix2::new(
        -pair(r[0].as_slice(), r[0].as_slice()),
        -pair(r[0].as_slice(), r[1].as_slice()),
        -pair(r[1].as_slice(), r[0].as_slice()),
        -pair(r[1].as_slice(), r[1].as_slice()),
    );
    let eig = g.symmetric_eigenvalues();
    Ok(eig.iter().map(|&e| e.max(0.0).sqrt().asinh().powi(2)).sum::<f64>().sqrt())
}

// ---------------------------------------------------------------------------------------
// Boundary angle

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryAngleReport {
    /// `max_y d(T_yΣ, T⁽²⁾_yγ)`.
    pub max_distance: f64,
    pub worst_node: usize,
    pub width: f64,
    /// `max_distance - width`.
    pub margin: f64,
    /// Hull residual of the precondition.
    pub hull_residual: f64,
}

fn tangent_plane_at(s: &DiscreteSurface, node: usize) -> Result<SpacelikePlane> {
    let fit = local_fit_any(s, node)?;
    let frame = s.frame();
    let sl = s.lambda().sqrt();
    let x = PointH::normalize(AmbientVector(frame.from_frame(&fit.point) * sl))?;
    let a = frame.from_frame(&fit.tangent[0]);
    let b = frame.from_frame(&fit.tangent[1]);
    SpacelikePlane::new(x, a.as_slice(), b.as_slice())
}

/// Compares the tangent planes of `s` at its boundary nodes with the osculating planes of
/// `c` at the same points, against the angular width of `c`.
///
/// The hull precondition is checked first at `hull_tol`; a violation is an error.
pub fn boundary_angle_check(s: &DiscreteSurface, c: &FiniteCurve, hull_tol: f64) -> Result<BoundaryAngleReport> {
    require_curved(s)?;
    let hull = hull_containment_curve(s, c)?;
    if hull.worst_residual > hull_tol {
        return Err(Error::verify(format!(
            "surface leaves the hull of the curve (residual {:.3e} at node {})",
            hull.worst_residual, hull.worst_node
        )));
    }
    let width = angular_width(c)?;
    let pts = c.points();
    let mut out = BoundaryAngleReport {
        max_distance: 0.0,
        worst_node: 0,
        width,
        margin: -width,
        hull_residual: hull.worst_residual,
    };
    for &node in s.mesh().boundary() {
        let y = s.ambient_point(node)?;
        let (j, dmin) = pts
            .iter()
            .enumerate()
            .map(|(j, p)| (j, (p.vector().0.clone() - &y.vector().0).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if dmin > 1e-8 * y.vector().norm_euclid() {
            return Err(Error::verify(format!("boundary node {node} is not a point of the curve")));
        }
        let t = c.velocity(j)?;
        let a = c.acceleration(j)?;
        let osc = SpacelikePlane::new(pts[j].clone(), t.as_slice(), a.as_slice())
            .map_err(|_| Error::verify(format!("osculating plane at curve sample {j} is degenerate")))?;
        let tp = tangent_plane_at(s, node)?;
        let d = grassmann_distance(&tp, &osc)?;
        if d > out.max_distance {
            out.max_distance = d;
            out.worst_node = node;
        }
    }
    out.margin = out.max_distance - width;
    Ok(out)
}

// ---------------------------------------------------------------------------------------
// Registered checks

struct MeanCurvatureCheck;

impl Check for MeanCurvatureCheck {
    fn name(&self) -> &str {
        "mean_curvature"
    }
    fn applies(&self, _: &VerifyInput<'_>) -> bool {
        true
    }
    fn run(&self, input: &VerifyInput<'_>, opts: &VerifyOptions) -> Result<Vec<CheckOutcome>> {
        let r = mean_curvature_residual(input.surface)?;
        let (node, _) = r
            .per_node
            .iter()
            .enumerate()
            .fold((0, 0.0), |acc, (i, v)| if v.norm() > acc.1 { (i, v.norm()) } else { acc });
        Ok(vec![CheckOutcome::new(self.name(), r.max_norm, opts.residual_tol, Relation::AtMost)
            .at(format!("node {node}"))])
    }
}

struct AcausalityCheck;

impl Check for AcausalityCheck {
    fn name(&self) -> &str {
        "acausality"
    }
    fn applies(&self, _: &VerifyInput<'_>) -> bool {
        true
    }
    fn run(&self, input: &VerifyInput<'_>, _: &VerifyOptions) -> Result<Vec<CheckOutcome>> {
        let r = acausality_check(input.surface);
        let mut c = CheckOutcome::new(self.name(), r.worst_pairing, 0.0, Relation::AtMost)
            .with_note("largest normalized pairing of node pairs; positive means causally related");
        c.pass = r.ok;
        Ok(vec![c])
    }
}

struct CurvatureBoundCheck;

impl Check for CurvatureBoundCheck {
    fn name(&self) -> &str {
        "curvature_bound"
    }
    fn applies(&self, _: &VerifyInput<'_>) -> bool {
        true
    }
    fn run(&self, input: &VerifyInput<'_>, opts: &VerifyOptions) -> Result<Vec<CheckOutcome>> {
        let (k, node) = min_interior_curvature(input.surface, opts.compact_radius)?;
        let h = input.surface.mesh().mesh_size();
        let thr = -input.surface.kappa() - opts.curvature_slack * h;
        Ok(vec![CheckOutcome::new(self.name(), k, thr, Relation::AtLeast).at(format!("node {node}"))])
    }
}

fn interior_within(s: &DiscreteSurface, radius: Option<f64>) -> Vec<usize> {
    let mesh = s.mesh();
    mesh.interior_nodes()
        .into_iter()
        .filter(|&i| {
            let z = mesh.node(i);
            radius.map_or(true, |r| z[0].hypot(z[1]) <= r)
        })
        .collect()
}

/// Smallest angle-defect curvature over interior nodes (within `radius`, if given) and
/// where it occurs.
pub fn min_interior_curvature(s: &DiscreteSurface, radius: Option<f64>) -> Result<(f64, usize)> {
    let nodes = interior_within(s, radius);
    let vals: Vec<Result<f64>> = nodes.par_iter().map(|&i| gauss_curvature(s, i)).collect();
    let mut best = (f64::INFINITY, 0);
    for (v, &i) in vals.into_iter().zip(&nodes) {
        let v = v?;
        if v < best.0 {
            best = (v, i);
        }
    }
    Ok(best)
}

/// Largest Gauss-lift defect over interior nodes (within `radius`, if given) and where it
/// occurs.
pub fn gauss_lift_within(s: &DiscreteSurface, radius: Option<f64>) -> Result<(f64, usize)> {
    let nodes = interior_within(s, radius);
    let vals: Vec<Result<f64>> = nodes
        .par_iter()
        .map(|&i| local_fit(s, i).map(|f| gauss_lift_defect(&f)))
        .collect();
    let mut worst = (0.0, 0);
    for (v, &i) in vals.into_iter().zip(&nodes) {
        let v = v?;
        if v > worst.0 {
            worst = (v, i);
        }
    }
    Ok(worst)
}

struct GaussLiftCheck;

impl Check for GaussLiftCheck {
    fn name(&self) -> &str {
        "gauss_lift"
    }
    fn applies(&self, _: &VerifyInput<'_>) -> bool {
        true
    }
    fn run(&self, input: &VerifyInput<'_>, opts: &VerifyOptions) -> Result<Vec<CheckOutcome>> {
        let (r, node) = gauss_lift_within(input.surface, opts.compact_radius)?;
        Ok(vec![CheckOutcome::new(self.name(), r, opts.gauss_lift_tol, Relation::AtMost).at(format!("node {node}"))])
    }
}

struct UniquenessCheck;

impl Check for UniquenessCheck {
    fn name(&self) -> &str {
        "uniqueness"
    }
    fn applies(&self, input: &VerifyInput<'_>) -> bool {
        input.other.is_some() && !input.surface.is_flat()
    }
    fn run(&self, input: &VerifyInput<'_>, opts: &VerifyOptions) -> Result<Vec<CheckOutcome>> {
        let other = input.other.ok_or_else(|| Error::verify("needs a second surface"))?;
        let g = uniqueness_gap(input.surface, other)?;
        let loc_h = match g.hausdorff_at {
            (i, usize::MAX) => format!("first surface node {i}"),
            (_, j) => format!("second surface node {j}"),
        };
        Ok(vec![
            CheckOutcome::new("uniqueness_sup_b", g.sup_b, -1.0 + opts.sup_b_tol, Relation::AtMost)
                .at(format!("pair {:?}", g.argmax)),
            CheckOutcome::new("uniqueness_hausdorff", g.hausdorff, opts.hausdorff_tol, Relation::AtMost).at(loc_h),
        ])
    }
}

struct HessianBoundCheck;

impl Check for HessianBoundCheck {
    fn name(&self) -> &str {
        "hessian_bound"
    }
    fn applies(&self, input: &VerifyInput<'_>) -> bool {
        !input.surface.is_flat()
    }
    fn run(&self, input: &VerifyInput<'_>, opts: &VerifyOptions) -> Result<Vec<CheckOutcome>> {
        let other = input.other.unwrap_or(input.surface);
        let r = hessian_bound_check(input.surface, other, opts)?;
        let worst = r.samples.iter().min_by(|a, b| a.margin.total_cmp(&b.margin));
        let mut c = CheckOutcome::new(self.name(), r.worst_margin, -opts.hessian_tol, Relation::AtLeast);
        if let Some(w) = worst {
            c = c.at(format!("pair ({}, {}) with B = {:.6}", w.i, w.j, w.b));
        }
        if r.samples.is_empty() {
            c.pass = false;
        }
        Ok(vec![c.with_note(format!("{} pairs, {} skipped", r.samples.len(), r.skipped))])
    }
}

struct HullCheck;

impl Check for HullCheck {
    fn name(&self) -> &str {
        "hull_containment"
    }
    fn applies(&self, input: &VerifyInput<'_>) -> bool {
        !input.surface.is_flat() && (input.loop_spec.is_some() || input.curve.is_some())
    }
    fn run(&self, input: &VerifyInput<'_>, opts: &VerifyOptions) -> Result<Vec<CheckOutcome>> {
        let r = match (input.loop_spec, input.curve) {
            (Some(l), _) => hull_containment(input.surface, l)?,
            (None, Some(c)) => hull_containment_curve(input.surface, c)?,
            _ => return Err(Error::verify("needs a loop or a boundary curve")),
        };
        Ok(vec![CheckOutcome::new(self.name(), r.worst_residual, opts.hull_tol, Relation::AtMost)
            .at(format!("node {}", r.worst_node))])
    }
}

struct BoundaryAngleCheck;

impl Check for BoundaryAngleCheck {
    fn name(&self) -> &str {
        "boundary_angle"
    }
    fn applies(&self, input: &VerifyInput<'_>) -> bool {
        !input.surface.is_flat() && input.curve.is_some()
    }
    fn run(&self, input: &VerifyInput<'_>, opts: &VerifyOptions) -> Result<Vec<CheckOutcome>> {
        let c = input.curve.ok_or_else(|| Error::verify("needs the boundary curve"))?;
        let r = boundary_angle_check(input.surface, c, opts.hull_tol)?;
        Ok(vec![CheckOutcome::new(self.name(), r.margin, opts.angle_tol, Relation::AtMost)
            .at(format!("node {}", r.worst_node))
            .with_note(format!(
                "max distance {:.3e}, angular width {:.3e}, hull residual {:.1e}",
                r.max_distance, r.width, r.hull_residual
            ))])
    }
}
