use forge_core::lora::{
    lora_params, shipped_specs, ArchitectureSpec, LoraConfig, Projection, TARGET_NAMES,
};
use proptest::prelude::*;

fn arch() -> impl Strategy<Value = ArchitectureSpec> {
    (1u64..64, prop::collection::vec((1u64..8192, 1u64..8192), 7)).prop_map(|(layers, dims)| {
        ArchitectureSpec {
            model_label: "random".into(),
            num_layers: layers,
            projections: TARGET_NAMES
                .iter()
                .zip(dims)
                .map(|(n, (d_in, d_out))| Projection {
                    name: n.to_string(),
                    d_in,
                    d_out,
                })
                .collect(),
        }
    })
}

proptest! {
    #[test]
    fn linear_in_rank(a in arch(), r in 0u64..128, k in 1u64..5) {
        let base = lora_params(&a, &LoraConfig::with_rank(r)).unwrap();
        prop_assert_eq!(lora_params(&a, &LoraConfig::with_rank(r * k)).unwrap(), base * k);
    }

    #[test]
    fn additive_over_layers(a in arch(), r in 1u64..64) {
        let cfg = LoraConfig::with_rank(r);
        let one = ArchitectureSpec { num_layers: 1, ..a.clone() };
        prop_assert_eq!(lora_params(&a, &cfg).unwrap(), a.num_layers * lora_params(&one, &cfg).unwrap());
    }

    #[test]
    fn additive_over_targets_and_strictly_monotone(a in arch(), r in 1u64..64, drop in 0usize..7) {
        let all = LoraConfig::with_rank(r);
        let sum: u64 = TARGET_NAMES
            .iter()
            .map(|t| lora_params(&a, &LoraConfig { targets: vec![t.to_string()], ..all.clone() }).unwrap())
            .sum();
        prop_assert_eq!(lora_params(&a, &all).unwrap(), sum);
        let mut fewer = all.clone();
        fewer.targets.remove(drop);
        prop_assert!(lora_params(&a, &fewer).unwrap() < lora_params(&a, &all).unwrap());
    }
}

#[test]
fn doubling_rank_doubles_every_shipped_model() {
    for spec in shipped_specs() {
        let r16 = lora_params(&spec, &LoraConfig::with_rank(16)).unwrap();
        assert_eq!(
            lora_params(&spec, &LoraConfig::with_rank(32)).unwrap(),
            2 * r16
        );
    }
}

#[test]
fn shipped_spec_shape() {
    for spec in shipped_specs() {
        let names: Vec<&str> = spec.projections.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, TARGET_NAMES);
    }
}
