//! Browser bindings for the spherical-curve flow simulator.
//!
//! Three operations back the demo page: a full simulation returning animation
//! frames of the curve on its moving sphere, the closed-form Gaussian phase
//! map over (r0, initial area fraction), and the radial profile R(t), t̃(t).
//! All results cross the boundary as JSON strings so the page needs no
//! framework, only `JSON.parse`.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::wasm_bindgen;
use warpflow::composer::{classify_outcome, simulate, SimOptions};
use warpflow::gaussian::{classify_gaussian_case, threshold_fraction, GaussianConfig};
use warpflow::radial::{integrate_radial, RadialOptions};
use warpflow::space::{DensitySpec, WarpedSpace};
use warpflow::sphere_flow::make_latitude_circle;

#[derive(Deserialize)]
struct DemoRequest {
    mu: f64,
    r0: f64,
    /// Initial polar angle of the latitude circle, in (0, π/2].
    theta0: f64,
    #[serde(default = "default_nodes")]
    n_nodes: usize,
    #[serde(default = "default_budget")]
    t_budget: f64,
}

fn default_nodes() -> usize {
    96
}

fn default_budget() -> f64 {
    50.0
}

#[derive(Serialize)]
struct Frame {
    t: f64,
    ttilde: f64,
    r: f64,
    /// Flattened x,y,z triples of the unit-sphere nodes.
    nodes: Vec<f64>,
}

#[derive(Serialize)]
struct RunResponse {
    outcome: String,
    oracle: String,
    fraction0: f64,
    threshold: f64,
    r_max_seen: f64,
    frames: Vec<Frame>,
}

fn err_json(message: &str) -> String {
    serde_json::json!({ "error": message }).to_string()
}

/// Simulate the Gaussian-density flow of a latitude circle and return
/// animation frames plus the classified outcome.
#[wasm_bindgen]
pub fn simulate_run(config_json: &str) -> String {
    let req: DemoRequest = match serde_json::from_str(config_json) {
        Ok(r) => r,
        Err(e) => return err_json(&format!("bad request: {e}")),
    };
    if !(req.mu > 0.0 && req.r0 > 0.0) {
        return err_json("mu and r0 must be positive");
    }
    if !(req.theta0 > 0.0 && req.theta0 <= std::f64::consts::FRAC_PI_2) {
        return err_json("theta0 must lie in (0, pi/2]");
    }
    let space = WarpedSpace::Euclidean;
    let density = DensitySpec::gaussian(req.mu);
    let rho = space.w(req.r0);
    let initial = match make_latitude_circle(req.theta0, req.n_nodes.clamp(32, 256), rho) {
        Ok(c) => c,
        Err(e) => return err_json(&e.to_string()),
    };
    let mut opts = SimOptions::new(req.t_budget);
    opts.flow.diag_every = 50;
    let run = match simulate(&space, &density, req.r0, &initial, &opts) {
        Ok(r) => r,
        Err(e) => return err_json(&e.to_string()),
    };
    let outcome = classify_outcome(&run, &space, &density, &opts);

    // Restore the exact half-area intent of theta0 = pi/2 from the f64
    // rounding of cos(pi/2), as the grid runner does.
    let mut fraction0 = 0.5 * (1.0 - req.theta0.cos());
    if (fraction0 - 0.5).abs() < 1e-12 {
        fraction0 = 0.5;
    }
    let gcfg = GaussianConfig::new(req.mu, req.r0, fraction0.clamp(1e-6, 0.5)).unwrap();

    let max_frames = 240usize;
    let stride = (run.composed.len() / max_frames).max(1);
    let mut frames = Vec::new();
    let mut r_max_seen: f64 = 0.0;
    for (i, c) in run.composed.iter().enumerate() {
        r_max_seen = r_max_seen.max(c.r);
        if i % stride != 0 && i + 1 != run.composed.len() {
            continue;
        }
        let (_, snap) = &run.sphere.snapshots[c.snapshot];
        let mut nodes = Vec::with_capacity(snap.len() * 3);
        for p in snap.nodes() {
            nodes.extend_from_slice(&[p.x, p.y, p.z]);
        }
        frames.push(Frame {
            t: c.t,
            ttilde: c.ttilde,
            r: c.r,
            nodes,
        });
    }
    let response = RunResponse {
        outcome: outcome.tag().to_string(),
        oracle: classify_gaussian_case(&gcfg).to_string(),
        fraction0,
        threshold: threshold_fraction(&gcfg),
        r_max_seen,
        frames,
    };
    serde_json::to_string(&response).unwrap_or_else(|e| err_json(&e.to_string()))
}

/// Closed-form Gaussian phase map: outcome tag index per (r0, fraction) cell.
/// Tag indices: 0 collapse to a spherical round point, 1 collapse to the pole,
/// 2 converge to a ψ-minimal curve, 3 escape to a curve at infinity,
/// 4 escape to a point at infinity.
#[wasm_bindgen]
pub fn gaussian_phase_map(
    mu: f64,
    r0_min: f64,
    r0_max: f64,
    n_r0: usize,
    n_fraction: usize,
) -> String {
    if !(mu > 0.0 && r0_min > 0.0 && r0_max > r0_min) {
        return err_json("need mu > 0 and 0 < r0_min < r0_max");
    }
    let n_r0 = n_r0.clamp(2, 512);
    let n_fraction = n_fraction.clamp(2, 512);
    let r0s: Vec<f64> = (0..n_r0)
        .map(|i| r0_min + (r0_max - r0_min) * i as f64 / (n_r0 - 1) as f64)
        .collect();
    let fractions: Vec<f64> = (0..n_fraction)
        .map(|j| 0.5 * (j as f64 + 0.5) / n_fraction as f64)
        .collect();
    let mut tags = Vec::with_capacity(n_r0);
    let mut thresholds = Vec::with_capacity(n_r0);
    for &r0 in &r0s {
        let cfg = GaussianConfig::new(mu, r0, 0.25).unwrap();
        thresholds.push(threshold_fraction(&cfg));
        let row: Vec<u8> = fractions
            .iter()
            .map(|&f| {
                let cell = GaussianConfig::new(mu, r0, f).unwrap();
                match classify_gaussian_case(&cell).to_string().as_str() {
                    "CollapseSphericalRoundPoint" => 0,
                    "CollapsePole" => 1,
                    "ConvergePsiMinimal" => 2,
                    "EscapeHyperbolicCurveAtInfinity" => 3,
                    _ => 4,
                }
            })
            .collect();
        tags.push(row);
    }
    serde_json::json!({
        "r0s": r0s,
        "fractions": fractions,
        "tags": tags,
        "thresholds": thresholds,
    })
    .to_string()
}

/// Radial profile: numeric R(t) and t̃(t) sampled on a uniform time grid.
#[wasm_bindgen]
pub fn radial_profile(mu: f64, r0: f64, t_max: f64, samples: usize) -> String {
    if !(mu > 0.0 && r0 > 0.0 && t_max > 0.0) {
        return err_json("need mu, r0, t_max > 0");
    }
    let space = WarpedSpace::Euclidean;
    let density = DensitySpec::gaussian(mu);
    let traj = match integrate_radial(&space, &density, r0, t_max, &RadialOptions::default()) {
        Ok(t) => t,
        Err(e) => return err_json(&e.to_string()),
    };
    let samples = samples.clamp(16, 2048);
    let t_end = traj.t_end();
    let mut ts = Vec::with_capacity(samples);
    let mut rs = Vec::with_capacity(samples);
    let mut tts = Vec::with_capacity(samples);
    for i in 0..samples {
        let t = t_end * i as f64 / (samples - 1) as f64;
        ts.push(t);
        rs.push(traj.radius_at(t).unwrap_or(f64::NAN));
        tts.push(traj.time_change_of(t).unwrap_or(f64::NAN));
    }
    serde_json::json!({
        "terminal": format!("{:?}", traj.terminal),
        "t": ts,
        "r": rs,
        "ttilde": tts,
    })
    .to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simulate_run_returns_frames_and_tags() {
        let out = simulate_run(r#"{"mu": 1.0, "r0": 1.0, "theta0": 1.5707963267948966}"#);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["outcome"], "ConvergePsiMinimal");
        assert_eq!(v["oracle"], "ConvergePsiMinimal");
        assert!(v["frames"].as_array().unwrap().len() > 1);
    }

    #[test]
    fn phase_map_marks_the_escape_region() {
        let out = gaussian_phase_map(1.0, 0.25, 3.0, 12, 12);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        let tags = v["tags"].as_array().unwrap();
        assert_eq!(tags.len(), 12);
        // Largest r0, largest fraction: escape to a curve at infinity.
        assert_eq!(tags[11].as_array().unwrap()[11], 3);
        // Smallest r0, smallest fraction: collapse to a round point.
        assert_eq!(tags[0].as_array().unwrap()[0], 0);
    }

    #[test]
    fn radial_profile_reports_escape() {
        let out = radial_profile(1.0, 2.0, 30.0, 64);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert!(v["terminal"].as_str().unwrap().contains("Escape"));
        assert_eq!(v["t"].as_array().unwrap().len(), 64);
    }

    #[test]
    fn bad_requests_produce_error_json() {
        let out = simulate_run("{\"mu\": -1.0, \"r0\": 1.0, \"theta0\": 1.0}");
        assert!(out.contains("error"));
    }
}
