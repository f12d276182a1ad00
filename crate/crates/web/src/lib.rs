//! Browser bindings for the demo page in `www/`.
//!
//! Each export takes a scenario as JSON text and returns JSON text. The plain
//! `*_json` functions hold the logic and are tested natively; the
//! `#[wasm_bindgen]` wrappers only convert errors.

use serde_json::{json, Value};
use softds::geometry::{label_from_gammas, REGION_TOL};
use softds::scenario::{grid_points, parse_scenario, scenario_box, Scenario};
use softds::sim::integrate;
use softds::strategy::total_velocity_detailed;
use softds::{vector, Vector};
use wasm_bindgen::prelude::*;

fn load(scenario_json: &str) -> Result<Scenario, String> {
    parse_scenario(scenario_json).map_err(|e| e.to_string())
}

fn obstacles_json(s: &Scenario) -> Value {
    s.scene
        .obstacles
        .iter()
        .map(|o| {
            json!({
                "center": o.center.as_slice(),
                "hard_semi_axes": o.hard_semi_axes.as_slice(),
                "soft_ratio": o.soft_ratio,
                "orientation_rad": o.orientation,
                "exponent": o.exponent,
                "stiffness": o.stiffness(),
            })
        })
        .collect()
}

/// Velocity field on an `nx × ny` grid over the scenario box.
/// Masked (hard-core) points carry `null` velocities.
pub fn field_json(scenario_json: &str, nx: usize, ny: usize) -> Result<String, String> {
    if nx < 2 || ny < 2 {
        return Err("grid resolution must be at least 2 per axis".into());
    }
    let s = load(scenario_json)?;
    let (lo, hi) = scenario_box(&s.starts, s.scene.ds.attractor(), s.settings.target.as_ref(), &s.scene.obstacles);
    let mut points = Vec::with_capacity(nx * ny);
    for x in grid_points(&lo, &hi, [nx, ny]) {
        let inside = s
            .scene
            .obstacles
            .iter()
            .map(|o| o.gamma(&x))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| e.to_string())?
            .iter()
            .any(|&g| g < 1.0);
        let v = if inside { None } else { s.scene.total_velocity(&x).ok() };
        points.push(json!({
            "x": x[0],
            "y": x[1],
            "v": v.map(|v| [v[0], v[1]]),
        }));
    }
    Ok(json!({
        "min": lo,
        "max": hi,
        "counts": [nx, ny],
        "attractor": s.scene.ds.attractor().as_slice(),
        "obstacles": obstacles_json(&s),
        "points": points,
    })
    .to_string())
}

/// Trajectory from `(x, y)` with the scenario's integration settings.
pub fn simulate_json(scenario_json: &str, x: f64, y: f64) -> Result<String, String> {
    let s = load(scenario_json)?;
    let rec = integrate(&s.scene, &s.scripts, &vector(&[x, y]), &s.settings).map_err(|e| e.to_string())?;
    let path: Vec<[f64; 2]> = rec.steps.iter().map(|st| [st.position[0], st.position[1]]).collect();
    let soft: Vec<bool> = rec.steps.iter().map(|st| st.in_soft_region()).collect();
    let stats = softds::sim::regional_speed_stats(&rec);
    Ok(json!({
        "path": path,
        "soft": soft,
        "converged": rec.converged,
        "steps": rec.step_count,
        "navigation_time": rec.navigation_time,
        "min_gamma": rec.min_gamma.is_finite().then_some(rec.min_gamma),
        "soft_region_mean_speed": stats.soft_region.map(|s| s.mean),
        "failure": rec.failure,
    })
    .to_string())
}

/// Region labels, distances and the velocity breakdown at one point.
pub fn inspect_json(scenario_json: &str, x: f64, y: f64) -> Result<String, String> {
    let s = load(scenario_json)?;
    let p: Vector = vector(&[x, y]);
    let mut per_obstacle = Vec::new();
    for o in &s.scene.obstacles {
        let g = o.gamma(&p).map_err(|e| e.to_string())?;
        let gk = o.gamma_soft(&p).map_err(|e| e.to_string())?;
        per_obstacle.push(json!({
            "gamma": g,
            "gamma_k": gk,
            "region": label_from_gammas(g, gk, REGION_TOL).as_str(),
        }));
    }
    let breakdown = total_velocity_detailed(&s.scene, &p).ok().map(|b| {
        json!({
            "nominal": b.nominal.as_slice(),
            "modulated": b.modulated.as_slice(),
            "soft_term": b.soft_term.as_slice(),
            "intersection_term": b.intersection_term.as_slice(),
            "velocity": b.velocity.as_slice(),
            "theta2": b.theta2,
        })
    });
    Ok(json!({ "obstacles": per_obstacle, "velocity": breakdown }).to_string())
}

#[wasm_bindgen]
pub fn field(scenario_json: &str, nx: usize, ny: usize) -> Result<String, JsValue> {
    field_json(scenario_json, nx, ny).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn simulate(scenario_json: &str, x: f64, y: f64) -> Result<String, JsValue> {
    simulate_json(scenario_json, x, y).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn inspect(scenario_json: &str, x: f64, y: f64) -> Result<String, JsValue> {
    inspect_json(scenario_json, x, y).map_err(|e| JsValue::from_str(&e))
}
