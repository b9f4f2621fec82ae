use fraclab_core::report::{canonical_json, format_float};
use proptest::prelude::*;
use serde_json::Value;

#[test]
fn floats_round_to_twelve_digits() {
    assert_eq!(format_float(0.1 + 0.2), "0.3");
    assert_eq!(format_float(2f64.ln() / 3f64.ln()), "0.630929753571");
    assert_eq!(format_float(3.0), "3.0");
    assert_eq!(format_float(1.5e-7), "1.5e-7");
    assert_eq!(format_float(f64::NAN), "null");
}

#[test]
fn keys_are_sorted() {
    let v = serde_json::json!({"b": 1, "a": [1.0, 2.5], "c": {"z": true, "y": null}});
    let s = canonical_json(&v).unwrap();
    assert_eq!(s, "{\n  \"a\": [1.0, 2.5],\n  \"b\": 1,\n  \"c\": {\n    \"y\": null,\n    \"z\": true\n  }\n}\n");
    let back: Value = serde_json::from_str(&s).unwrap();
    assert_eq!(back["a"][1], 2.5);
}

proptest! {
    #[test]
    fn floats_parse_back_to_twelve_digits(x in prop::num::f64::NORMAL) {
        let back: f64 = format_float(x).parse().unwrap();
        prop_assert!((back - x).abs() <= x.abs() * 1e-11);
        // formatting is idempotent
        prop_assert_eq!(format_float(back), format_float(x));
    }

    #[test]
    fn canonical_text_is_stable(keys in prop::collection::vec("[a-z]{1,6}", 1..8), xs in prop::collection::vec(-1e6..1e6f64, 8)) {
        let map: serde_json::Map<String, Value> = keys.iter().zip(&xs).map(|(k, x)| (k.clone(), Value::from(*x))).collect();
        let s = canonical_json(&Value::Object(map)).unwrap();
        let back: Value = serde_json::from_str(&s).unwrap();
        prop_assert_eq!(canonical_json(&back).unwrap(), s);
    }
}
