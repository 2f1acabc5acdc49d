use proptest::prelude::*;

use superchem::analytic::fmt_num;
use superchem::config::{RunConfig, Value};
use superchem::io::RunManifest;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn manifest_reproduces_config(
        r in 0.05f64..3.0,
        delta in prop_oneof![-5.0f64..-0.5, 0.5f64..5.0],
        gamma in 0.0f64..2.0,
        chi in -1.0f64..1.0,
        seed in any::<u32>(),
        fermi in any::<bool>(),
    ) {
        let variant = if fermi { "bose-fermi" } else { "bosonic" };
        let entries = vec![
            ("variant".to_string(), Value::Str(variant.into())),
            ("R".to_string(), Value::Float(r)),
            ("delta".to_string(), Value::Float(delta)),
            ("gamma".to_string(), Value::Float(gamma)),
            ("chi.ab.a".to_string(), Value::Float(chi)),
            ("seed".to_string(), Value::Int(seed as i64)),
        ];
        let cfg = RunConfig::from_entries(&entries).unwrap();
        let manifest = RunManifest::new("ensemble", &cfg);
        let back = RunManifest::from_json(&manifest.to_json().unwrap()).unwrap();
        prop_assert_eq!(&back, &manifest);
        let again = back.run_config().unwrap();
        prop_assert_eq!(&again, &cfg);
        prop_assert_eq!(again.params_hash(), manifest.params_hash);
    }

    #[test]
    fn numbers_render_shortest_round_trip(bits in any::<u64>()) {
        let x = f64::from_bits(bits);
        prop_assume!(x.is_finite());
        prop_assert_eq!(fmt_num(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        prop_assert_eq!(superchem::dynamics::sci17(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
    }
}
