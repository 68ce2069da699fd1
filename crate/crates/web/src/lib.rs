//! Browser bindings: bound curves, small simulation sweeps and code syndrome
//! tables, each returned as a JSON string.

use hashdistill::belldiag::IIDWernerSpec;
use hashdistill::bounds::rate_curve;
use hashdistill::codes::DECODER_PRIOR_FIDELITY;
use hashdistill::codes::{analyze, builtin, effective_syndrome_table, first_order_errors, map_decoder, syndrome_text};
use hashdistill::protocol::Variant;
use hashdistill::simulator::{run_experiment, Input, Mode, SimulationConfig, Truncation};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Largest register the page will simulate; the dense state has `4^n` entries.
pub const MAX_WEB_PAIRS: usize = 8;

/// Optimized rate lower bounds for every `(f_in, n)` pair.
pub fn bound_curve_json(f_ins: &[f64], f_out: f64, ns: &[u32]) -> Result<String, String> {
    let ns: Vec<usize> = ns.iter().map(|&n| n as usize).collect();
    let rows = rate_curve(f_ins, f_out, &ns).map_err(|e| e.to_string())?;
    serde_json::to_string(&rows).map_err(|e| e.to_string())
}

/// Exact-branch fidelity after every round count `0..n`.
pub fn simulation_sweep_json(
    n: usize,
    fidelity: f64,
    trials: usize,
    seed: u64,
    variant: &str,
) -> Result<String, String> {
    if n > MAX_WEB_PAIRS {
        return Err(format!("the page simulates at most {MAX_WEB_PAIRS} pairs"));
    }
    let spec = IIDWernerSpec::new(fidelity, n).map_err(|e| e.to_string())?;
    let cfg = SimulationConfig {
        input: Input::werner(&spec),
        rounds: (0..n).collect(),
        trials,
        variant: variant.parse().map_err(|e: hashdistill::Error| e.to_string())?,
        mode: Mode::ExactBranch,
        truncation: Truncation::None,
        seed,
    };
    let result = run_experiment(&cfg).map_err(|e| e.to_string())?;
    serde_json::to_string(&result.rows).map_err(|e| e.to_string())
}

/// Report and per-error syndrome table of a built-in code.
pub fn syndrome_table_json(code: &str, variant: &str) -> Result<String, String> {
    let schedule = builtin(code).map_err(|e| e.to_string())?;
    let v: Variant = variant.parse().map_err(|e: hashdistill::Error| e.to_string())?;
    let report = analyze(&schedule, v).map_err(|e| e.to_string())?;
    let table = effective_syndrome_table(&schedule, v, &first_order_errors(schedule.n())).map_err(|e| e.to_string())?;
    let decoder = map_decoder(&schedule, v, DECODER_PRIOR_FIDELITY).map_err(|e| e.to_string())?;
    let entries: Vec<_> = table
        .iter()
        .map(|e| {
            json!({
                "error": e.error.to_string(),
                "syndrome": syndrome_text(e.syndrome, schedule.rounds().len()),
                "residual": e.residual.to_string(),
                "corrected": decoder[e.syndrome as usize] == e.residual,
            })
        })
        .collect();
    Ok(json!({ "report": report, "entries": entries }).to_string())
}

#[wasm_bindgen]
pub fn bound_curve(f_ins: &[f64], f_out: f64, ns: &[u32]) -> Result<String, JsError> {
    bound_curve_json(f_ins, f_out, ns).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn simulation_sweep(n: usize, fidelity: f64, trials: usize, seed: u32, variant: &str) -> Result<String, JsError> {
    simulation_sweep_json(n, fidelity, trials, u64::from(seed), variant).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn syndrome_table(code: &str, variant: &str) -> Result<String, JsError> {
    syndrome_table_json(code, variant).map_err(|e| JsError::new(&e))
}
