//! Feature vectors against the committed oracle output, plus invariants.

use gqlshield_core::features::{osi_features, sqli_features, xss_features, Detector};
use proptest::prelude::*;
use serde::Deserialize;

#[derive(Deserialize)]
struct Expected {
    payload: String,
    sqli: Vec<u64>,
    osi: Vec<u64>,
    xss: Vec<u64>,
}

#[test]
fn matches_oracle_on_payload_corpus() {
    let rows: Vec<Expected> =
        serde_json::from_str(include_str!("../../../fixtures/payloads/features_expected.json")).unwrap();
    assert_eq!(rows.len(), 300);
    let mut mismatches = Vec::new();
    for r in &rows {
        for (got, want, kind) in [
            (sqli_features(&r.payload).values, &r.sqli, "sqli"),
            (osi_features(&r.payload).values, &r.osi, "osi"),
            (xss_features(&r.payload).values, &r.xss, "xss"),
        ] {
            if &got != want {
                mismatches.push(format!("{kind} {:?}: got {got:?} want {want:?}", r.payload));
            }
        }
    }
    assert!(mismatches.is_empty(), "{}", mismatches.join("\n"));
}

#[test]
fn names_are_stable() {
    assert_eq!(Detector::Sqli.feature_names().len(), 11);
    assert_eq!(Detector::Osi.feature_names().len(), 9);
    assert_eq!(Detector::Xss.feature_names().len(), 8);
    assert_eq!(Detector::Sqli.feature_names()[0], "sql_keywords");
    assert_eq!(Detector::Sqli.feature_names()[10], "nested_select");
    assert_eq!(Detector::Xss.feature_names()[7], "external_resources");
}

fn payload() -> impl Strategy<Value = String> {
    let atoms = prop::sample::select(vec![
        "ls", "whoami", "sudo", "|", "||", "&&", ";", "$(", ")", "`", "select", "SELECT", "union", "(", "'", "--",
        "or", "1=1", "<script>", "</script>", "alert(", "http", "%3Cscript", "&lt;script", ".js", "javascript",
        "waitfor", "delay", "sleep", " ", "x", "é", "0x27", "%27", "/*", "*/", "#", "<", "img", "/",
    ]);
    prop::collection::vec(atoms, 0..12).prop_map(|v| v.concat())
}

const LENGTH: [(Detector, usize); 2] = [(Detector::Sqli, 4), (Detector::Xss, 4)];

proptest! {
    #[test]
    fn deterministic(p in payload()) {
        for d in Detector::ALL {
            prop_assert_eq!(d.features(&p), d.features(&p));
        }
    }

    #[test]
    fn additive_under_space_join(a in payload(), b in payload()) {
        let joined = format!("{a} {b}");
        for d in Detector::ALL {
            let (fa, fb, fj) = (d.features(&a), d.features(&b), d.features(&joined));
            let length_index = LENGTH.iter().find(|(k, _)| *k == d).map(|(_, i)| *i);
            for i in 0..fj.values.len() {
                if Some(i) == length_index {
                    prop_assert_eq!(fj.values[i], fa.values[i] + 1 + fb.values[i]);
                } else {
                    prop_assert!(
                        fj.values[i] >= fa.values[i].max(fb.values[i]),
                        "{} {}: {:?} {:?} {:?}", d.as_str(), fj.names[i], fa.values, fb.values, fj.values
                    );
                }
            }
        }
    }
}
