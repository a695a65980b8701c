use colcirc::codec::{self, SchemeInstance};
use colcirc::compress::pushdown;
use colcirc::ops::Ports;
use colcirc::{Column, ElementType as T, Value};
use proptest::prelude::*;
use serde_json::json;

fn ports<const N: usize>(cols: [(&str, Column); N]) -> Ports {
    cols.into_iter().map(|(l, c)| (l.to_string(), c)).collect()
}

fn decoded(inst: &SchemeInstance) -> Column {
    codec::decode(inst).unwrap().remove("column").unwrap()
}

/// Columns made of runs: (value, length) pairs.
fn runs() -> impl Strategy<Value = Vec<u64>> {
    prop::collection::vec((0u64..6, 1usize..9), 0..30)
        .prop_map(|rs| rs.into_iter().flat_map(|(v, l)| std::iter::repeat_n(v, l)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rle_and_rpe_convert(v in runs()) {
        let col = Column::u64s(v.clone());
        let rle = codec::encode_column("run.rle", &json!({"type": "u64", "index_type": "u64"}), &col).unwrap();
        let lengths = rle.columns["length"].as_u64().unwrap().to_vec();
        let mut starts = Vec::new();
        let mut acc = 0;
        for l in &lengths {
            starts.push(acc);
            acc += l;
        }
        let rpe = SchemeInstance::new(
            "run.rpe",
            json!({"type": "u64", "index_type": "u64"}),
            ports([
                ("start_position", Column::u64s(starts.clone())),
                ("value", rle.columns["value"].clone()),
                ("overall_length", Column::u64s(vec![v.len() as u64])),
            ]),
        );
        prop_assert!(codec::verify(&rpe), "{:?}", codec::verify_reason(&rpe));
        prop_assert_eq!(decoded(&rpe), col.clone());
        let mut bounds = starts;
        bounds.push(v.len() as u64);
        let back: Vec<u64> = bounds.windows(2).map(|w| w[1] - w[0]).collect();
        prop_assert_eq!(back, lengths);
        prop_assert_eq!(decoded(&rle), col);
    }

    #[test]
    fn capped_runs_are_runs(v in runs(), cap in 1u64..5) {
        let col = Column::u64s(v);
        let capped = codec::encode_column("run.rle.capped", &json!({"type": "u64", "cap": cap}), &col).unwrap();
        prop_assert!(capped.columns["length"].to_i128s().unwrap().iter().all(|l| *l as u64 <= cap));
        let plain = SchemeInstance::new("run.rle", capped.params.clone(), capped.columns.clone());
        prop_assert!(codec::verify(&plain));
        prop_assert_eq!(decoded(&plain), col.clone());
        prop_assert_eq!(decoded(&capped), col);
    }

    #[test]
    fn rle_sum_in_compressed_domain(v in runs()) {
        let col = Column::u64s(v.clone());
        let inst = codec::encode_column("run.rle", &json!({"type": "u64"}), &col).unwrap();
        let c = pushdown::rle_sum(&T::U64, inst.columns["length"].element_type());
        let s = c.evaluate(&inst.columns).unwrap()["sum"].to_i128s().unwrap();
        prop_assert_eq!(s, vec![v.iter().map(|x| *x as i128).sum::<i128>()]);
    }

    #[test]
    fn surrogate_selection(v in prop::collection::vec(0u64..12, 1..80), probe in 0u64..14) {
        let col = Column::u64s(v.clone());
        let inst = codec::encode_column("dict.unique", &json!({"type": "u64"}), &col).unwrap();
        let want: Vec<u64> = (0..v.len() as u64).filter(|&i| v[i as usize] == probe).collect();
        let idx = inst.columns["indices"].clone();
        let got = match pushdown::surrogate(&inst.columns["dictionary"], &Value::UInt(probe)) {
            Some(code) => pushdown::equality_positions(idx.element_type(), Value::UInt(code))
                .evaluate(&ports([("col", idx)]))
                .unwrap()["positions"]
                .clone(),
            None => Column::u64s(vec![]),
        };
        prop_assert_eq!(got, Column::u64s(want));
    }

    #[test]
    fn monotone_surrogates_keep_order(v in prop::collection::vec(0u64..50, 2..60)) {
        let col = Column::u64s(v.clone());
        let inst = codec::encode_column("dict.monotone", &json!({"type": "u64"}), &col).unwrap();
        let idx = inst.columns["indices"].to_i128s().unwrap();
        for i in 1..v.len() {
            prop_assert_eq!(v[i - 1].cmp(&v[i]), idx[i - 1].cmp(&idx[i]));
        }
    }

    #[test]
    fn frame_of_reference_is_a_composition(v in prop::collection::vec(1000u64..1200, 0..120), l in 1u64..20) {
        let col = Column::from_u64s(T::U32, v).unwrap();
        let direct = codec::encode_column("for", &json!({"type": "u32", "segment_length": l}), &col).unwrap();
        let composed = codec::encode_column(
            "elementwise_add(spline.equiknotted,nullsup)",
            &json!({"type": "u32", "a": {"k": 1, "interval_length": l}}),
            &col,
        )
        .unwrap();
        prop_assert_eq!(decoded(&direct), col.clone());
        prop_assert_eq!(decoded(&composed), col);
        prop_assert_eq!(
            direct.columns["reference"].to_i128s().unwrap(),
            composed.columns["a.coefficients"].to_i128s().unwrap()
        );
        prop_assert_eq!(
            direct.columns["offsets"].to_i128s().unwrap(),
            composed.columns["b.data"].to_i128s().unwrap()
        );
    }
}

fn dict(scheme: &str, d: Vec<u64>, i: Vec<u64>) -> SchemeInstance {
    SchemeInstance::new(
        scheme,
        json!({"type": "u64", "index_type": "u8"}),
        ports([("dictionary", Column::u64s(d)), ("indices", Column::from_u64s(T::U8, i).unwrap())]),
    )
}

#[test]
fn dictionary_acceptance_is_strictly_nested() {
    let accepted = |d: &Vec<u64>| {
        ["dict.monotone", "dict.unique", "dict"].map(|s| codec::verify(&dict(s, d.clone(), vec![0, 1, 0])))
    };
    assert_eq!(accepted(&vec![1, 2]), [true, true, true]);
    assert_eq!(accepted(&vec![2, 1]), [false, true, true]);
    assert_eq!(accepted(&vec![1, 1]), [false, false, true]);
    assert_eq!(accepted(&vec![1]), [false, false, false]);
}
