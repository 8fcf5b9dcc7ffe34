use schroreg_web::{closed_loop_json, gain_json, spectrum_json};

#[test]
fn spectrum_lists_modes_in_the_right_half_plane() {
    let v: serde_json::Value = serde_json::from_str(&spectrum_json(1.0, 10).unwrap()).unwrap();
    let modes = v.as_array().unwrap();
    assert_eq!(modes.len(), 10);
    assert!(modes.iter().all(|m| m["re"].as_f64().unwrap() > 0.0));
}

#[test]
fn gain_has_one_weight_per_node() {
    let v: serde_json::Value = serde_json::from_str(&gain_json(1.0, 0.0, 0.0, 50).unwrap()).unwrap();
    assert_eq!(v["x"].as_array().unwrap().len(), 51);
    // k(x,ξ) = -i e^{i(x-ξ)}, so k(1,1) = -i.
    assert!((v["k11"][1].as_f64().unwrap() + 1.0).abs() < 1e-9);
}

#[test]
fn closed_loop_error_shrinks() {
    let v: serde_json::Value = serde_json::from_str(&closed_loop_json(1.0, 0.5, 1.0, 2.0, 10.0).unwrap()).unwrap();
    let e: Vec<f64> = v["abs_e_y"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    let peak = e.iter().copied().fold(0.0, f64::max);
    assert!(*e.last().unwrap() < 0.02 * peak, "{} vs {peak}", e.last().unwrap());
}

#[test]
fn bad_input_is_an_error() {
    assert!(spectrum_json(-1.0, 5).is_err());
    assert!(gain_json(0.0, 0.0, 0.0, 50).is_err());
}
