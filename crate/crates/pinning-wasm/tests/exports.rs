use pinning_wasm::{annealed_curve_json, free_energy_json, mass_function_json};
use serde_json::Value;

fn parse(s: String) -> Value {
    serde_json::from_str(&s).unwrap()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

#[test]
fn annealed_curve_is_flat_then_decreasing() {
    let v = parse(annealed_curve_json(0.3, 0.3, 3.0, 31).unwrap());
    let (beta, h) = (floats(&v["beta"]), floats(&v["h_c_a"]));
    let beta0 = v["beta0"].as_f64().unwrap();
    assert_eq!(beta.len(), 31);
    assert!(beta0 > 1.5 && beta0 < 1.7);
    for (b, hc) in beta.iter().zip(&h) {
        if *b < beta0 - 1e-9 {
            assert_eq!(*hc, 0.0);
        }
    }
    assert!(h[30] < 0.0);
    assert!(h.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn free_energy_vanishes_for_negative_h_and_grows() {
    let v = parse(free_energy_json(0.5, -0.5, 1.0, 4).unwrap());
    let f = floats(&v["f"]);
    assert_eq!(&f[..2], &[0.0, 0.0]);
    assert!(f[2] > 0.0 && f[3] > f[2]);
}

#[test]
fn mass_function_starts_at_one_and_decreases() {
    let v = parse(mass_function_json(0.5, 0.0, 200).unwrap());
    let u = floats(&v["u"]);
    assert_eq!(u.len(), 201);
    assert_eq!(u[0], 1.0);
    assert!(u.windows(2).all(|w| w[1] < w[0]));
    assert_eq!(v["defect"].as_f64(), Some(0.0));
    let tilted = parse(mass_function_json(0.5, -0.1, 10).unwrap());
    assert!((tilted["defect"].as_f64().unwrap() - (1.0 - (-0.1f64).exp())).abs() < 1e-15);
}

#[test]
fn bad_inputs_are_errors() {
    assert!(annealed_curve_json(0.3, 0.3, 3.0, 1).is_err());
    assert!(free_energy_json(0.5, 1.0, 0.0, 10).is_err());
    assert!(mass_function_json(0.5, 0.2, 10).is_err());
    assert!(mass_function_json(0.5, 0.0, 0).is_err());
    assert!(mass_function_json(-1.0, 0.0, 10).is_err());
}
