//! Browser bindings for a few `nsgms` operations. Each export returns JSON text; the
//! `*_json` functions hold the logic so they can be tested natively.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use nsgms::concentration::QuadraticForm;
use nsgms::experiment::{log_grid, run_lemma_check};
use nsgms::regression::{combine_neighborhoods, estimate_all_neighborhoods};
use nsgms::{
    build_block_model, default_lambda, random_cig, sample_factors, verify_assumptions, Cig, CombineRule,
    EstimatorConfig,
};

fn edges(cig: &Cig) -> Value {
    cig.edges().map(|(i, j)| json!([i + 1, j + 1])).collect()
}

/// Tail bound and Monte Carlo tail frequency of `Σ a_j z_j² + b_j z_j` on a log grid of
/// deviations.
pub fn lemma_curve_json(a: Vec<f64>, b: Vec<f64>, eta_lo: f64, eta_hi: f64, points: usize, trials: usize, seed: u64) -> nsgms::Result<Value> {
    if !(eta_lo > 0.0 && eta_hi >= eta_lo) || points == 0 {
        return Err(nsgms::Error::InvalidParameter("need 0 < lo <= hi and at least one point".into()));
    }
    let form = QuadraticForm::new(a, b)?;
    let rows = run_lemma_check(&form, &log_grid(eta_lo, eta_hi, points), trials, seed)?;
    Ok(rows
        .iter()
        .map(|r| json!({ "eta": r.eta, "bound": r.bound, "empirical": r.empirical, "slack": r.slack() }))
        .collect())
}

/// Draws a random graph and block model, samples it, and estimates the graph with the
/// default penalty.
pub fn recovery_json(p: usize, s: usize, blocks: usize, block_len: usize, beta: f64, seed: u64) -> nsgms::Result<Value> {
    let cig = random_cig(p, s, seed)?;
    let model = build_block_model(&cig, blocks, block_len, beta, 0.5, seed)?;
    let rho_min = verify_assumptions(&model, &cig, 0.0, s).rho_min_achieved.unwrap_or(0.1);
    let lambda = default_lambda(rho_min)?;
    let factors = sample_factors(&model, seed)?;
    let all = estimate_all_neighborhoods(&factors, &EstimatorConfig::new(s, lambda)?)?;
    let estimate = combine_neighborhoods(p, &all, CombineRule::Or);
    Ok(json!({
        "p": p,
        "rho_min": rho_min,
        "lambda": lambda,
        "bound_n": nsgms::sample_size_bound(beta, rho_min, p, s, 0.1)?,
        "n": blocks * block_len,
        "true_edges": edges(&cig),
        "estimated_edges": edges(&estimate),
        "exact": estimate == cig,
    }))
}

fn to_js(r: nsgms::Result<Value>) -> Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn lemma_curve(a: Vec<f64>, b: Vec<f64>, eta_lo: f64, eta_hi: f64, points: usize, trials: usize, seed: u64) -> Result<String, JsError> {
    to_js(lemma_curve_json(a, b, eta_lo, eta_hi, points, trials, seed))
}

#[wasm_bindgen]
pub fn recovery(p: usize, s: usize, blocks: usize, block_len: usize, beta: f64, seed: u64) -> Result<String, JsError> {
    to_js(recovery_json(p, s, blocks, block_len, beta, seed))
}

#[wasm_bindgen]
pub fn sample_size_bound(beta: f64, rho_min: f64, p: usize, s: usize, eta: f64) -> Result<f64, JsError> {
    nsgms::sample_size_bound(beta, rho_min, p, s, eta).map_err(|e| JsError::new(&e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lemma_curve_has_one_row_per_point() {
        let v = lemma_curve_json(vec![1.0, -0.5], vec![0.2, 0.0], 0.1, 5.0, 6, 2000, 1).unwrap();
        let rows = v.as_array().unwrap();
        assert_eq!(rows.len(), 6);
        for r in rows {
            assert!(r["empirical"].as_f64().unwrap() <= r["bound"].as_f64().unwrap() + r["slack"].as_f64().unwrap());
        }
        assert!(lemma_curve_json(vec![1.0], vec![0.0], 0.0, 1.0, 3, 10, 1).is_err());
    }

    #[test]
    fn recovery_reports_both_graphs() {
        let v = recovery_json(6, 1, 2, 3000, 2.0, 4).unwrap();
        assert_eq!(v["p"], 6);
        assert!(v["true_edges"].as_array().unwrap().iter().all(|e| e[0].as_u64() < e[1].as_u64()));
        assert_eq!(v["exact"], v["true_edges"] == v["estimated_edges"]);
        assert!(recovery_json(6, 2, 2, 2, 2.0, 4).is_err());
    }

    #[test]
    fn bound_matches_core() {
        let got = nsgms::sample_size_bound(2.0, 0.5, 10, 2, 0.1).unwrap();
        assert!((got - 864.0 * 4.0 * (2400.0f64).ln()).abs() < 1e-9 * got);
    }
}
