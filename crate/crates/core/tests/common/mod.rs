//! Loop and surface fixtures shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use maxsurf::loops::{sphere_exp, LoopSpec};
use nalgebra::DVector;
use rand::Rng;

pub fn dv(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

/// A random smooth loop `S^1 → S^n` (n = 1 or 2) with Lipschitz constant at most `lip`.
///
/// For n = 1 the loop is `θ ↦ (cos φ, sin φ)` with a trigonometric `φ`; for n = 2 it is
/// `exp_{e0}` of a trigonometric curve in the tangent plane, and `exp` is 1-Lipschitz there.
pub fn random_loop<R: Rng>(rng: &mut R, n: usize, m: usize, lip: f64) -> LoopSpec {
    const MODES: usize = 3;
    match n {
        1 => {
            let c = rng.random_range(-PI..PI);
            let mut a = [0.0f64; MODES];
            let mut b = [0.0; MODES];
            for k in 0..MODES {
                a[k] = rng.random_range(-1.0..1.0);
                b[k] = rng.random_range(0.0..2.0 * PI);
            }
            let speed: f64 = (0..MODES).map(|k| (k + 1) as f64 * a[k].abs()).sum();
            let s = lip / speed;
            LoopSpec::from_fn(m, |t| {
                let phi = c + (0..MODES).map(|k| s * a[k] * ((k + 1) as f64 * t + b[k]).sin()).sum::<f64>();
                dv(&[phi.cos(), phi.sin()])
            })
            .unwrap()
        }
        2 => {
            let mut coef = [[0.0f64; 4]; MODES];
            for row in coef.iter_mut() {
                for c in row.iter_mut() {
                    *c = rng.random_range(-1.0..1.0);
                }
            }
            let speed: f64 = coef
                .iter()
                .enumerate()
                .map(|(k, r)| (k + 1) as f64 * r.iter().map(|c| c * c).sum::<f64>().sqrt())
                .sum();
            let s = lip / speed;
            let e0 = dv(&[1.0, 0.0, 0.0]);
            LoopSpec::from_fn(m, |t| {
                let mut v = dv(&[0.0, 0.0, 0.0]);
                for (k, r) in coef.iter().enumerate() {
                    let (sn, cs) = (((k + 1) as f64) * t).sin_cos();
                    v[1] += s * (r[0] * cs + r[1] * sn);
                    v[2] += s * (r[2] * cs + r[3] * sn);
                }
                sphere_exp(&e0, &v)
            })
            .unwrap()
        }
        _ => panic!("random loops are generated for n = 1, 2 only"),
    }
}

/// Loop moving at unit speed along a great circle for `arc` radians of θ, then returning
/// slowly: 1-Lipschitz, with an isometric arc.
pub fn isometric_arc_loop(n: usize, m: usize, arc: f64) -> LoopSpec {
    LoopSpec::from_fn(m, |t| {
        let a = if t <= arc { t } else { arc * (2.0 * PI - t) / (2.0 * PI - arc) };
        let mut w = vec![0.0; n + 1];
        w[0] = a.cos();
        w[1] = a.sin();
        dv(&w)
    })
    .unwrap()
}

/// The identity `S^1 → S^1` composed with a great-circle embedding into `S^n`.
pub fn photon_loop(n: usize, m: usize) -> LoopSpec {
    LoopSpec::from_fn(m, |t| {
        let mut w = vec![0.0; n + 1];
        w[0] = t.cos();
        w[1] = t.sin();
        dv(&w)
    })
    .unwrap()
}
