//! Browser bindings: three curves rendered by `www/index.html`.

use serde_json::json;
use wasm_bindgen::prelude::*;

use meanly::cesaro::{cesaro_trace, Backend};
use meanly::literal::{parse_operator, parse_schedule, parse_semigroup, parse_step, parse_vector};
use meanly::semigroup::cesaro_integral;
use meanly::weights::{build_tbilcami, TbilcamiVariant};
use meanly::Error;

fn no_files(path: &str) -> Result<String, Error> {
    Err(Error::Capability(format!("cannot read {path} in the browser")))
}

/// Anchors of the bilateral hill/valley profile up to level `k_max` as
/// `[{"index": "...", "logv": ...}]`.
pub fn profile_points(k_max: u64, flat: bool) -> Result<String, Error> {
    let variant = if flat { TbilcamiVariant::Flattened } else { TbilcamiVariant::Original };
    let p = build_tbilcami(variant, k_max.clamp(1, 12))?;
    Ok(p.materialize().to_json())
}

/// Cesàro means along a schedule as `[{"n", "mean", "log10"}]`.
pub fn cesaro_points(operator: &str, vector: &str, schedule: &str, p: f64) -> Result<String, Error> {
    let op = parse_operator(operator, p, &no_files)?;
    let x = parse_vector(vector)?;
    let sch = parse_schedule(schedule, &op)?;
    let tr = cesaro_trace(&op.orbit_norm_series(&x, sch.last())?, &sch, Backend::Auto)?;
    let rows: Vec<_> = tr
        .points
        .iter()
        .map(|pt| json!({"n": pt.n.to_string(), "log10n": pt.n.ln() / std::f64::consts::LN_10, "mean": pt.mean.to_f64(), "log10": pt.mean.log10()}))
        .collect();
    Ok(serde_json::Value::Array(rows).to_string())
}

/// `(1/b) ∫_0^b ‖T_t f‖ dt` at `points` horizons spread geometrically over
/// `[b_min, b_max]`.
pub fn semigroup_points(family: &str, p: f64, f: &str, b_min: f64, b_max: f64, points: usize) -> Result<String, Error> {
    let fam = parse_semigroup(family, p)?;
    let f = parse_step(f)?;
    if !(b_min > 0.0 && b_max > b_min) || points < 2 {
        return Err(Error::Domain("need 0 < b_min < b_max and at least two points".into()));
    }
    let ratio = (b_max / b_min).powf(1.0 / (points - 1) as f64);
    let mut rows = Vec::new();
    for i in 0..points {
        let b = b_min * ratio.powi(i as i32);
        let r = cesaro_integral(&fam, &f, b, 1e-7)?;
        rows.push(json!({"b": b, "mean": r.value, "error": r.error}));
    }
    Ok(serde_json::Value::Array(rows).to_string())
}

fn js(r: Result<String, Error>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen]
pub fn profile_curve(k_max: u32, flat: bool) -> Result<String, JsValue> {
    js(profile_points(k_max as u64, flat))
}

#[wasm_bindgen]
pub fn cesaro_curve(operator: &str, vector: &str, schedule: &str, p: f64) -> Result<String, JsValue> {
    js(cesaro_points(operator, vector, schedule, p))
}

#[wasm_bindgen]
pub fn semigroup_curve(family: &str, p: f64, f: &str, b_min: f64, b_max: f64, points: u32) -> Result<String, JsValue> {
    js(semigroup_points(family, p, f, b_min, b_max, points as usize))
}
