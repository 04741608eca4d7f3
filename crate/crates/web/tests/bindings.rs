use offload_web::{allocate_json, simulate_json, tau_ratio_curve_json};
use serde_json::Value;

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn allocation_reports_the_enumerated_optimum() {
    let req = r#"{"q":[8,12,5],"y":[50,10,0],"h_scale":[1,0.5,2],"x":[1,0,1]}"#;
    let v = parse(&allocate_json(req).unwrap());
    let tau: f64 = v["tau"].as_array().unwrap().iter().map(|t| t.as_f64().unwrap()).sum();
    assert!(tau <= 1.0 + 1e-9);
    assert_eq!(v["tau"][1], 0.0);
    assert!(v["freq_mhz"][1].as_f64().unwrap() > 0.0);
    assert!(v["best_objective"].as_f64().unwrap() >= v["objective"].as_f64().unwrap() - 1e-9);
    assert_eq!(v["best_x"].as_str().unwrap().len(), 3);
}

#[test]
fn allocation_rejects_bad_shapes() {
    assert!(allocate_json(r#"{"q":[1],"y":[1,2],"h_scale":[1],"x":[0]}"#).is_err());
    assert!(allocate_json(r#"{"q":[-1],"y":[1],"h_scale":[1],"x":[0]}"#).is_err());
    assert!(allocate_json("not json").is_err());
}

#[test]
fn simulation_series_are_sampled_and_deterministic() {
    let req = r#"{"algorithm":"lycd","devices":3,"lambda":2.0,"gamma":0.08,"v":20,"frames":1000,"seed":4}"#;
    let a = simulate_json(req).unwrap();
    assert_eq!(a, simulate_json(req).unwrap());
    let v = parse(&a);
    let t = v["t"].as_array().unwrap();
    assert!(t.len() <= 402);
    assert_eq!(t.last().unwrap(), 1000);
    assert_eq!(v["total_queue"].as_array().unwrap().len(), t.len());
    assert!(v["window_max_power"].as_f64().unwrap() <= 0.0801);
    let too_long = req.replace("1000", "1000000");
    assert!(simulate_json(&too_long).is_err());
}

#[test]
fn ratio_curve_is_monotone_in_price() {
    let req = r#"{"y":100,"h_scale":1,"mu_min":0.01,"mu_max":1000,"points":60}"#;
    let v = parse(&tau_ratio_curve_json(req).unwrap());
    let r: Vec<f64> = v["ratio"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert_eq!(r.len(), 60);
    // a dearer time share never lowers the rate per unit time
    assert!(r.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    let cap = v["max_rate"].as_f64().unwrap();
    assert!(r.iter().all(|x| *x <= cap * (1.0 + 1e-12)));
    assert!(tau_ratio_curve_json(r#"{"y":1,"h_scale":1,"mu_min":2,"mu_max":1,"points":5}"#).is_err());
}
