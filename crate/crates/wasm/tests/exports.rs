use mtdiag_wasm::{chi_squared_table, inject_artifacts, Demo};
use serde_json::Value;

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn chi_squared_matches_closed_form() {
    let v = parse(&chi_squared_table(10, 0, 0, 10));
    assert!((v["statistic"].as_f64().unwrap() - 20.0).abs() < 1e-12);
    assert_eq!(v["significant"], true);
    let v = parse(&chi_squared_table(0, 5, 0, 5));
    assert!(v["statistic"].is_null());
    assert_eq!(v["significant"], false);
}

#[test]
fn artifacts_preview() {
    let v = parse(&inject_artifacts("kein punkt", "He did n't go . She stayed", true, true, true));
    assert_eq!(v["machine"], "He did not go , she stayed .");
    assert_eq!(v["fired"].as_array().unwrap().len(), 3);
    let v = parse(&inject_artifacts("x", "I can go .", true, false, false));
    assert_eq!(v["machine"], "I can go .");
    assert!(v["fired"].as_array().unwrap().is_empty());
}

#[test]
fn demo_trains_and_explains() {
    let demo = Demo::new(1500, 3).unwrap();
    let summary = parse(&demo.summary());
    assert!(summary["test_accuracy"].as_f64().unwrap() > 0.8, "{summary}");
    let src = summary["examples"][0][0].as_str().unwrap().to_owned();
    let human = summary["examples"][0][1].as_str().unwrap().to_owned();
    let machine = summary["examples"][0][2].as_str().unwrap().to_owned();
    for method in ["lrp_epsilon", "pattern_attribution"] {
        let v = parse(&demo.explain(&src, &human, &machine, method));
        assert_eq!(v["method"], method);
        assert!(!v["right"].as_array().unwrap().is_empty());
        let p = v["softmax_machine"].as_f64().unwrap();
        assert!((0.5..=1.0).contains(&p));
    }
    let v = parse(&demo.explain("a", "b", "c", "saliency"));
    assert!(v["error"].as_str().unwrap().contains("unknown method"));
}
