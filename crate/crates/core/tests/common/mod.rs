//! Shared reference values and helpers for the integration tests.
//!
//! The reference numbers here are the converged results of the two worked
//! examples (cubic Ikeda and embedded Mackey–Glass); the pipeline tests and
//! the acceptance suite assert against them.

#![allow(dead_code)]

use std::path::PathBuf;

use tangle::models::{ikeda, mackey_glass, DdeModel};

/// Cubic Ikeda example: delay of the m·tau-periodic orbit.
pub const IKEDA_TAU: f64 = 1.5649592985680902;
pub const IKEDA_M: usize = 8;
pub const IKEDA_DEGREE: usize = 30;
pub const IKEDA_DELTA: f64 = 0.0;
/// Unstable Floquet multiplier of the Ikeda orbit.
pub const IKEDA_MU: f64 = -4.624622928960324;

/// Mackey–Glass example (embedded as a 4-component polynomial system).
pub const MG_A: f64 = 1.0;
pub const MG_B: f64 = 2.0;
pub const MG_RHO: f64 = 9.65;
pub const MG_TAU: f64 = 1.827334864516779;
pub const MG_M: usize = 6;
pub const MG_DEGREE: usize = 45;
pub const MG_DELTA: f64 = 1.0;
pub const MG_MU: f64 = -2.7747991365286633;

pub fn ikeda_model() -> DdeModel {
    ikeda()
}

pub fn mg_model() -> DdeModel {
    mackey_glass(MG_A, MG_B, MG_RHO)
}

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

/// Read a two-column `t,value` CSV (with a one-line header).
pub fn read_series(name: &str) -> Vec<(f64, f64)> {
    let text = std::fs::read_to_string(fixture_path(name))
        .unwrap_or_else(|e| panic!("fixture {name}: {e}"));
    text.lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let mut parts = l.split(',');
            let t = parts.next().unwrap().trim().parse().unwrap();
            let v = parts.next().unwrap().trim().parse().unwrap();
            (t, v)
        })
        .collect()
}

use tangle::periodic::{newton_periodic, orbit_guess_from_series, PeriodicOptions, SegmentedOrbit};

/// Converge the cubic-Ikeda orbit from the committed seed series.
pub fn converged_ikeda_orbit() -> SegmentedOrbit {
    let model = ikeda_model();
    let series = read_series("cubic_ikeda_series.csv");
    let guess =
        orbit_guess_from_series(&series, &model, IKEDA_M, IKEDA_DEGREE, IKEDA_DELTA).unwrap();
    let (orbit, report) = newton_periodic(&guess, &model, &PeriodicOptions::default()).unwrap();
    assert!(report.converged, "ikeda orbit must converge");
    orbit
}

/// Converge the Mackey–Glass orbit from the committed seed series.
pub fn converged_mg_orbit() -> SegmentedOrbit {
    let model = mg_model();
    let series = read_series("mackey_glass_series.csv");
    let guess = orbit_guess_from_series(&series, &model, MG_M, MG_DEGREE, MG_DELTA).unwrap();
    let (orbit, report) = newton_periodic(&guess, &model, &PeriodicOptions::default()).unwrap();
    assert!(report.converged, "mackey-glass orbit must converge");
    orbit
}

/// Re-express an orbit's segments at a different polynomial degree and
/// re-converge the periodic problem there.
pub fn reconverge_at_degree(
    orbit: &SegmentedOrbit,
    model: &DdeModel,
    degree: usize,
) -> SegmentedOrbit {
    use tangle::chebseq::{interpolate, ChebSeq, VecChebSeq};
    let segments: Vec<VecChebSeq<f64>> = orbit
        .segments
        .iter()
        .map(|seg| {
            VecChebSeq::new(
                (0..seg.dim())
                    .map(|i| {
                        let comp: ChebSeq<f64> = interpolate(|t| seg.components[i].eval(t), degree);
                        comp.truncated(degree)
                    })
                    .collect(),
            )
        })
        .collect();
    let guess = SegmentedOrbit {
        tau: orbit.tau,
        segments,
        eta: orbit.eta.clone(),
        delta: orbit.delta,
    };
    let (refined, report) = newton_periodic(&guess, model, &PeriodicOptions::default()).unwrap();
    assert!(report.converged, "re-convergence at degree {degree}");
    refined
}
