//! JSON renderings of the library's reports. Timing is left out so identical jobs give
//! byte-identical files.

use maxsurf::loops::{LipschitzProfile, LoopClassification, StrongPositivityReport};
use maxsurf::plateau::{AsymptoticReport, AsymptoticStage, SolveReport};
use maxsurf::verify::VerifyReport;
use serde_json::{json, Value};

pub fn solve_report(r: &SolveReport) -> Value {
    json!({
        "iterations": r.iterations,
        "final_residual": r.final_residual,
        "residual_floor": r.residual_floor,
        "stages": r.stages.iter().map(|s| json!({
            "t": s.t,
            "start": s.start,
            "iterations": s.iterations,
            "residual": s.residual,
        })).collect::<Vec<_>>(),
        "rejected_steps": r.rejected_steps.iter().map(|s| json!({"t": s.t, "reason": s.reason})).collect::<Vec<_>>(),
        "area_trace": r.area_trace,
        "residual_trace": r.residual_trace,
        "margin_trace": r.margin_trace,
    })
}

pub fn strong_positivity(r: &StrongPositivityReport) -> Value {
    json!({
        "passed": r.passed,
        "triples_ok": r.triples_ok,
        "worst_triple_det": r.worst_triple_det,
        "osculating_ok": r.osculating_ok,
        "worst_osculating_margin": r.worst_osculating_margin,
        "mixed_ok": r.mixed_ok,
        "worst_mixed_det": r.worst_mixed_det,
    })
}

pub fn stage(s: &AsymptoticStage) -> Value {
    json!({
        "rho": s.rho,
        "boundary_samples": s.boundary_loop.m(),
        "nodes": s.surface.mesh().num_nodes(),
        "curve_check": strong_positivity(&s.curve_check),
        "stabilization": s.stabilization,
        "solve": solve_report(&s.report),
    })
}

pub fn asymptotic_report(r: &AsymptoticReport) -> Value {
    json!({
        "p": r.p.as_slice(),
        "stages": r.stages.iter().map(stage).collect::<Vec<_>>(),
        "skipped": r.skipped.iter().map(|(rho, why)| json!({"rho": rho, "reason": why})).collect::<Vec<_>>(),
        "stabilization": r.stabilization(),
    })
}

pub fn verify_report(r: &VerifyReport) -> Value {
    json!({
        "passed": r.passed(),
        "checks": r.checks.iter().map(|c| json!({
            "name": c.name,
            "value": c.value,
            "threshold": c.threshold,
            "relation": c.relation.symbol(),
            "pass": c.pass,
            "location": c.location,
            "note": c.note,
        })).collect::<Vec<_>>(),
    })
}

pub fn loop_check(c: &LoopClassification, p: &LipschitzProfile, m: usize, n: usize) -> Value {
    json!({
        "class": format!("{:?}", c.class),
        "m": m,
        "n": n,
        "l_global": c.l_global,
        "segment_speed": p.segment_speed,
        "min_ratio": p.min_ratio,
        // Distance to the 1-Lipschitz threshold; positive for strictly contracting loops.
        "contraction_margin": 1.0 - c.l_global,
    })
}
