use hashdistill_web::{bound_curve_json, simulation_sweep_json, syndrome_table_json, MAX_WEB_PAIRS};
use serde_json::Value;

#[test]
fn curve_rows_cover_the_grid() {
    let rows: Value = serde_json::from_str(&bound_curve_json(&[0.9, 0.99], 0.99, &[50, 500]).unwrap()).unwrap();
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[3]["n"], 500);
    assert!(bound_curve_json(&[1.2], 0.99, &[10]).is_err());
}

#[test]
fn sweep_has_a_row_per_round_count() {
    let text = simulation_sweep_json(4, 0.9, 16, 9, "cz").unwrap();
    let rows: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 4);
    assert_eq!(rows[0]["reference"], rows[0]["mean_fidelity"]);
    assert_eq!(text, simulation_sweep_json(4, 0.9, 16, 9, "cz").unwrap());
    assert!(simulation_sweep_json(MAX_WEB_PAIRS + 1, 0.9, 1, 0, "cnot").is_err());
    assert!(simulation_sweep_json(4, 0.9, 1, 0, "swap").is_err());
}

#[test]
fn syndrome_table_for_the_correcting_code() {
    let doc: Value = serde_json::from_str(&syndrome_table_json("n5-correct", "cnot").unwrap()).unwrap();
    assert_eq!(doc["report"]["distinct_syndromes"], 16);
    let entries = doc["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 16);
    assert!(entries.iter().all(|e| e["corrected"] == true));
    assert!(syndrome_table_json("n7", "cnot").is_err());
}
