//! wasm-bindgen entry points for the static demo page in `www/`.
//!
//! Each export returns a JSON string. The `*_json` functions hold the logic
//! and are what the native tests call.

use renewal_pinning::annealed::AnnealedSystem;
use renewal_pinning::homogeneous::solve_free_energy;
use renewal_pinning::renewal_core::{mass_function_of, normalize_power_law, tilt_law};
use serde::Serialize;
use wasm_bindgen::prelude::*;

const HORIZON: u64 = 1_000_000;
const MAX_POINTS: usize = 400;
const MAX_N: u32 = 5000;

#[derive(Serialize)]
pub struct AnnealedCurve {
    pub beta: Vec<f64>,
    pub h_c_a: Vec<f64>,
    pub beta0: f64,
}

#[derive(Serialize)]
pub struct FreeEnergy {
    pub h: Vec<f64>,
    pub f: Vec<f64>,
}

#[derive(Serialize)]
pub struct MassFunction {
    pub u: Vec<f64>,
    pub defect: f64,
}

fn grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>, String> {
    if !(2..=MAX_POINTS).contains(&points) || !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(format!("need lo < hi and 2..={MAX_POINTS} points"));
    }
    Ok((0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect())
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

pub fn annealed_curve_json(alpha: f64, alpha_hat: f64, beta_max: f64, points: usize) -> Result<String, String> {
    let betas = grid(0.0, beta_max, points)?;
    let sys = AnnealedSystem::new(
        &normalize_power_law(alpha, HORIZON).map_err(err)?,
        &normalize_power_law(alpha_hat, HORIZON).map_err(err)?,
    )
    .map_err(err)?;
    let h_c_a = betas.iter().map(|b| sys.critical_point(*b, 1e-10)).collect::<Result<Vec<_>, _>>().map_err(err)?;
    let beta0 = sys.beta_zero().map_err(err)?;
    serde_json::to_string(&AnnealedCurve { beta: betas, h_c_a, beta0 }).map_err(err)
}

pub fn free_energy_json(alpha: f64, h_lo: f64, h_hi: f64, points: usize) -> Result<String, String> {
    let law = normalize_power_law(alpha, HORIZON).map_err(err)?;
    let h = grid(h_lo, h_hi, points)?;
    let f = h.iter().map(|x| solve_free_energy(&law, *x, 1e-14)).collect();
    serde_json::to_string(&FreeEnergy { h, f }).map_err(err)
}

/// u(n) = P(n ∈ τ) for n ≤ n_max under the law tilted by h ≤ 0.
pub fn mass_function_json(alpha: f64, h: f64, n_max: u32) -> Result<String, String> {
    if n_max == 0 || n_max > MAX_N {
        return Err(format!("n_max must be in 1..={MAX_N}"));
    }
    let law = tilt_law(&normalize_power_law(alpha, HORIZON).map_err(err)?, h).map_err(err)?;
    let table = mass_function_of(&law, n_max as u64).map_err(err)?;
    serde_json::to_string(&MassFunction { u: table.values, defect: 0.0 - h.exp_m1() }).map_err(err)
}

fn to_js(r: Result<String, String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = annealedCurve)]
pub fn annealed_curve(alpha: f64, alpha_hat: f64, beta_max: f64, points: usize) -> Result<String, JsValue> {
    to_js(annealed_curve_json(alpha, alpha_hat, beta_max, points))
}

#[wasm_bindgen(js_name = freeEnergy)]
pub fn free_energy(alpha: f64, h_lo: f64, h_hi: f64, points: usize) -> Result<String, JsValue> {
    to_js(free_energy_json(alpha, h_lo, h_hi, points))
}

#[wasm_bindgen(js_name = massFunction)]
pub fn mass_function(alpha: f64, h: f64, n_max: u32) -> Result<String, JsValue> {
    to_js(mass_function_json(alpha, h, n_max))
}
