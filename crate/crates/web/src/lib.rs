//! Browser bindings for the translator lab: asymptotic limits, profiles for
//! plotting, and the verification suites.
//!
//! The plain functions return JSON strings so they can be tested natively;
//! the `#[wasm_bindgen]` wrappers only convert errors.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use translator_lab::translators::{build_bowl, build_catenoid, build_grim_reaper, CatenoidVariant, GrimReaperVariant, Translator};
use translator_lab::verify::{run_suite, Suite, DEFAULT_S0_GRID};
use translator_lab::{solve_l, FamilyKind, FlowParams, StepControl};

/// Points kept per branch when thinning a profile for the canvas.
const PLOT_POINTS: usize = 400;

#[derive(Serialize)]
struct PlotBranch {
    tag: String,
    s: Vec<f64>,
    phi: Vec<f64>,
    theta: Vec<f64>,
}

#[derive(Serialize)]
struct PlotProfile {
    kind: String,
    max_residual: f64,
    min_height: Option<f64>,
    branches: Vec<PlotBranch>,
}

fn params(eps: i32, n: u32, r: u32) -> Result<FlowParams, String> {
    FlowParams::from_epsilon(eps, n, r).map_err(|e| e.to_string())
}

fn family(name: &str) -> Result<FamilyKind, String> {
    match name {
        "rotational" => Ok(FamilyKind::Rotational),
        "parabolic" => Ok(FamilyKind::Parabolic),
        "hyperbolic" => Ok(FamilyKind::Hyperbolic),
        other => Err(format!("unknown family {other:?}")),
    }
}

/// `L`, `θ∞` and the apex curvature as JSON.
pub fn limit_json(eps: i32, n: u32, r: u32) -> Result<String, String> {
    serde_json::to_string(&solve_l(&params(eps, n, r)?)).map_err(|e| e.to_string())
}

/// Builds a translator. `kind` is `bowl`, `odd`, `even1`, `even2` or
/// `grim-reaper`; `lambda` is ignored where it has no meaning.
pub fn build(eps: i32, n: u32, r: u32, kind: &str, fam: &str, lambda: f64, s_max: f64) -> Result<Translator, String> {
    let p = params(eps, n, r)?;
    let ctrl = StepControl { s_max, ..StepControl::default() };
    let out = match kind {
        "bowl" => build_bowl(&p, family(fam)?, &ctrl),
        "odd" => build_catenoid(&p, family(fam)?, lambda, CatenoidVariant::Odd, &ctrl),
        "even1" => build_catenoid(&p, family(fam)?, lambda, CatenoidVariant::Even1, &ctrl),
        "even2" => build_catenoid(&p, family(fam)?, lambda, CatenoidVariant::Even2, &ctrl),
        "grim-reaper" if eps == 0 => build_grim_reaper(&p, GrimReaperVariant::Euclidean, &ctrl),
        "grim-reaper" => build_grim_reaper(&p, GrimReaperVariant::Hyperbolic(lambda), &ctrl),
        other => return Err(format!("unknown translator {other:?}")),
    };
    out.map_err(|e| e.to_string())
}

/// A translator thinned to at most [`PLOT_POINTS`] samples per branch.
pub fn profile_json(eps: i32, n: u32, r: u32, kind: &str, fam: &str, lambda: f64, s_max: f64) -> Result<String, String> {
    let t = build(eps, n, r, kind, fam, lambda, s_max)?;
    let branches = t
        .branches
        .iter()
        .map(|b| {
            let smp = b.profile.samples();
            let stride = smp.len().div_ceil(PLOT_POINTS).max(1);
            let mut picked: Vec<_> = smp.iter().step_by(stride).collect();
            if let Some(last) = smp.last() {
                if picked.last().map(|p| p.s) != Some(last.s) {
                    picked.push(last);
                }
            }
            PlotBranch {
                tag: b.tag.clone(),
                s: picked.iter().map(|p| p.s).collect(),
                phi: picked.iter().map(|p| p.phi).collect(),
                theta: picked.iter().map(|p| p.theta).collect(),
            }
        })
        .collect();
    let plot = PlotProfile {
        kind: format!("{:?}", t.spec.family_kind),
        max_residual: t.max_residual(),
        min_height: t.min_height,
        branches,
    };
    serde_json::to_string(&plot).map_err(|e| e.to_string())
}

/// Runs a verification suite and returns the report as JSON.
pub fn verify_json(eps: i32, n: u32, r: u32, suite: &str) -> Result<String, String> {
    let suite = match suite {
        "propositions" => Suite::Propositions,
        "gluing" => Suite::Gluing,
        "exponent" => Suite::Exponent,
        "all" => Suite::All,
        other => return Err(format!("unknown suite {other:?}")),
    };
    let report = run_suite(suite, &params(eps, n, r)?, &DEFAULT_S0_GRID, &StepControl::default()).map_err(|e| e.to_string())?;
    serde_json::to_string(&report).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn limit(eps: i32, n: u32, r: u32) -> Result<String, JsValue> {
    limit_json(eps, n, r).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn profile(eps: i32, n: u32, r: u32, kind: &str, family: &str, lambda: f64, s_max: f64) -> Result<String, JsValue> {
    profile_json(eps, n, r, kind, family, lambda, s_max).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn verify(eps: i32, n: u32, r: u32, suite: &str) -> Result<String, JsValue> {
    verify_json(eps, n, r, suite).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn limit_is_json() {
        let v: Value = serde_json::from_str(&limit_json(-1, 4, 3).unwrap()).unwrap();
        assert!((v["L"].as_f64().unwrap() - 0.5636).abs() < 1e-4);
        assert!(limit_json(0, 3, 3).is_err());
    }

    #[test]
    fn profiles_are_thinned() {
        let v: Value = serde_json::from_str(&profile_json(0, 4, 3, "odd", "rotational", 0.5, 10.0).unwrap()).unwrap();
        let branches = v["branches"].as_array().unwrap();
        assert_eq!(branches.len(), 2);
        for b in branches {
            let s = b["s"].as_array().unwrap();
            assert!(s.len() <= PLOT_POINTS + 1 && s.len() > 10);
            assert_eq!(s.len(), b["phi"].as_array().unwrap().len());
        }
        assert!(v["max_residual"].as_f64().unwrap() < 1e-8);
    }

    #[test]
    fn bad_requests_are_errors() {
        assert!(profile_json(0, 4, 2, "odd", "rotational", 0.5, 10.0).unwrap_err().contains("parity"));
        assert!(profile_json(0, 4, 3, "torus", "rotational", 0.5, 10.0).is_err());
        assert!(verify_json(0, 4, 3, "everything").is_err());
    }

    #[test]
    fn verify_reports_pass() {
        let v: Value = serde_json::from_str(&verify_json(0, 3, 2, "gluing").unwrap()).unwrap();
        let entries = v["entries"].as_array().unwrap();
        assert!(!entries.is_empty());
        assert!(entries.iter().all(|c| c["passed"].as_bool() == Some(true)));
    }
}
