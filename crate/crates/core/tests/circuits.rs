use std::collections::BTreeSet;

use colcirc::transform::{eliminate_duplicate_vertices, fuse_subcircuit, induced_subcircuit};
use colcirc::{samples, Catalog, Circuit};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn evaluation_strategies_agree(seed in any::<u64>()) {
        let (c, inputs) = samples::random_circuit(&mut ChaCha8Rng::seed_from_u64(seed));
        let want = c.evaluate_reference(&inputs).unwrap();
        prop_assert_eq!(&c.evaluate(&inputs).unwrap(), &want);
        prop_assert_eq!(&c.evaluate_sequential(&inputs).unwrap(), &want);
        let (traced, trace) = c.evaluate_traced(&inputs).unwrap();
        prop_assert_eq!(&traced, &want);
        prop_assert!(trace.len() >= c.vertices.len());
    }

    #[test]
    fn json_roundtrip(seed in any::<u64>()) {
        let (c, inputs) = samples::random_circuit(&mut ChaCha8Rng::seed_from_u64(seed));
        let back = Circuit::from_json_str(&c.to_json_string(), Catalog::global()).unwrap();
        prop_assert_eq!(back.to_json(), c.to_json());
        prop_assert_eq!(back.evaluate(&inputs).unwrap(), c.evaluate(&inputs).unwrap());
    }

    #[test]
    fn dedup_is_idempotent_and_sound(seed in any::<u64>()) {
        let (c, inputs) = samples::random_circuit(&mut ChaCha8Rng::seed_from_u64(seed));
        let d = eliminate_duplicate_vertices(&c);
        prop_assert!(d.vertices.len() <= c.vertices.len());
        prop_assert_eq!(eliminate_duplicate_vertices(&d).to_json(), d.to_json());
        prop_assert_eq!(d.evaluate(&inputs).unwrap(), c.evaluate(&inputs).unwrap());
    }

    #[test]
    fn fusing_a_single_vertex_or_everything(seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        let (c, inputs) = samples::random_circuit(&mut ChaCha8Rng::seed_from_u64(seed));
        let want = c.evaluate(&inputs).unwrap();
        let catalog = Catalog::standard();
        let ids: Vec<String> = c.vertices.keys().cloned().collect();
        let one = BTreeSet::from([pick.get(&ids).clone()]);
        let f = fuse_subcircuit(&c, &one, "single", &catalog).unwrap();
        prop_assert_eq!(f.vertices.len(), c.vertices.len());
        prop_assert_eq!(f.evaluate(&inputs).unwrap(), want.clone());
        let all: BTreeSet<String> = ids.into_iter().collect();
        let g = fuse_subcircuit(&c, &all, "whole", &catalog).unwrap();
        prop_assert_eq!(g.vertices.len(), 1);
        prop_assert_eq!(g.evaluate(&inputs).unwrap(), want);
        prop_assert_eq!(induced_subcircuit(&c, &all).unwrap().to_json(), c.to_json());
    }
}
