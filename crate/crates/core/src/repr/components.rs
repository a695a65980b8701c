use rand::rngs::StdRng;
use rand::Rng;
use serde_json::{json, Value as Json};

use super::{family, with_types};
use crate::circuit::{Builder, Circuit};
use crate::codec::scheme::{index_ty, json_types, num, rand_data, resize, the_column, ty, ty_or, with_col, FnScheme};
use crate::codec::{ensure, get, index_column, not_encodable, CodecError};
use crate::column::{Column, ElementType as T};
use crate::ops::{Assemble, ComposeSegments, Params, Ports, Zip};

pub(super) fn schemes() -> Vec<FnScheme> {
    vec![
        FnScheme::new("components", zip_decoder, zip_check, zip_encode, mixed_sample).corrupt(zip_corrupt),
        FnScheme::new("components.concatenated", concat_decoder, no_check, concat_encode, uniform_sample)
            .corrupt(tuple_corrupt),
        FnScheme::new("components.shattered", shatter_decoder, no_check, shatter_encode, uniform_sample)
            .corrupt(tuple_corrupt),
    ]
}

fn no_check(_: &Json, _: &Ports) -> Result<(), String> {
    Ok(())
}

fn label(j: usize) -> String {
    format!("component_{}", j + 1)
}

fn tuple_column<'a>(dec: &'a Ports) -> Result<(&'a Column, &'a [Column]), CodecError> {
    let c = the_column(dec)?;
    let parts = c.components().ok_or_else(|| not_encodable("column is not of a product type"))?;
    Ok((c, parts))
}

// Structure of arrays

fn zip_decoder(p: &Json) -> Result<Circuit, CodecError> {
    let types = Params(p).types("types")?;
    let mut b = Builder::new();
    let ins: Vec<_> = types.iter().enumerate().map(|(j, t)| b.input(&label(j), t.clone())).collect();
    let labels: Vec<String> = (0..types.len()).map(label).collect();
    let args: Vec<(&str, &_)> = labels.iter().map(|l| l.as_str()).zip(ins.iter()).collect();
    let z = b.apply1(Zip::new(types.clone()), &args);
    b.output("column", &z);
    Ok(b.finish()?)
}

fn zip_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    let (c, parts) = tuple_column(dec)?;
    let types = c.element_type().components().unwrap();
    let cols = parts.iter().enumerate().map(|(j, col)| (label(j), col.clone())).collect();
    Ok((crate::codec::with(p, json!({"types": json_types(types)})), cols))
}

fn mixed_sample(rng: &mut StdRng) -> (Json, Ports) {
    let n = rand_data::len(rng, 30);
    let k = rng.random_range(2..4);
    let parts = (0..k).map(|_| rand_data::any_column(rng, n)).collect();
    (json!({}), family([("column", Column::zip(parts).unwrap())]))
}

fn zip_corrupt(_: &Json, enc: &Ports, rng: &mut StdRng) -> Option<Ports> {
    if enc.len() < 2 {
        return None;
    }
    let l = label(0);
    Some(with_col(enc, &l, resize(enc.get(&l)?, rng)?))
}

// Concatenated and shattered: all components share one type and sit in a single column.

fn tuple_params(p: &Json) -> Result<(T, usize, T), CodecError> {
    let k = num(p, "k")? as usize;
    Ok((ty(p, "type")?, k, ty_or(p, "index_type", T::U64)?))
}

fn concat_decoder(p: &Json) -> Result<Circuit, CodecError> {
    let (t, k, it) = tuple_params(p)?;
    let mut b = Builder::new();
    let l = b.input("segment_length", it.clone());
    let c = b.input("components", t.clone());
    let out = b.apply1(ComposeSegments::new(t, k, it), &[("segment_length", &l), ("components", &c)]);
    b.output("column", &out);
    Ok(b.finish()?)
}

fn shatter_decoder(p: &Json) -> Result<Circuit, CodecError> {
    let (t, k, it) = tuple_params(p)?;
    let mut b = Builder::new();
    let c = b.input("components", t.clone());
    let l = b.scalar(&it, k as u64);
    let out = b.apply1(Assemble::new(t, k, it), &[("segment_length", &l), ("components", &c)]);
    b.output("column", &out);
    Ok(b.finish()?)
}

fn uniform_parts(dec: &Ports) -> Result<(T, Vec<Column>), CodecError> {
    let (c, parts) = tuple_column(dec)?;
    let t = parts[0].element_type().clone();
    if c.element_type().components().unwrap().iter().any(|x| *x != t) {
        return Err(not_encodable("components differ in type"));
    }
    Ok((t, parts.to_vec()))
}

fn concat_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    let (t, parts) = uniform_parts(dec)?;
    let n = parts[0].len() as u64;
    let it = index_ty(p, "index_type", n)?;
    let all = Column::concat(&parts.iter().collect::<Vec<_>>(), &t)?;
    let cols = family([("segment_length", index_column(&it, vec![n], "segment_length")?), ("components", all)]);
    Ok((with_types(&crate::codec::with(p, json!({"k": parts.len()})), &[("type", &t), ("index_type", &it)]), cols))
}

fn shatter_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    let (t, parts) = uniform_parts(dec)?;
    let (k, n) = (parts.len(), parts[0].len());
    let it = index_ty(p, "index_type", k as u64)?;
    let rows: Vec<_> = (0..n).flat_map(|i| parts.iter().map(move |c| c.value(i))).collect();
    let cols = family([("components", Column::new(t.clone(), rows)?)]);
    Ok((with_types(&crate::codec::with(p, json!({"k": k})), &[("type", &t), ("index_type", &it)]), cols))
}

fn uniform_sample(rng: &mut StdRng) -> (Json, Ports) {
    let n = rand_data::len(rng, 30);
    let k = rng.random_range(1..5);
    let t = rand_data::int_type(rng);
    let parts = (0..k).map(|_| rand_data::any_ints(rng, &t, n)).collect();
    (json!({}), family([("column", Column::zip(parts).unwrap())]))
}

fn tuple_corrupt(p: &Json, enc: &Ports, _: &mut StdRng) -> Option<Ports> {
    if p.get("k")?.as_u64()? < 2 {
        return None;
    }
    let c = enc.get("components")?;
    if c.is_empty() {
        let extra = Column::concat(
            &[c, &Column::new(c.element_type().clone(), vec![crate::codec::scheme::zero_of(c.element_type())]).ok()?],
            c.element_type(),
        )
        .ok()?;
        return Some(with_col(enc, "components", extra));
    }
    Some(with_col(enc, "components", c.slice(0, c.len() - 1)))
}

fn zip_check(p: &Json, enc: &Ports) -> Result<(), String> {
    let k = Params(p).types("types").map_err(|e| e.to_string())?.len();
    components_check(enc, k)
}

fn components_check(enc: &Ports, k: usize) -> Result<(), String> {
    let n = get(enc, &label(0))?.len();
    for j in 1..k {
        let m = get(enc, &label(j))?.len();
        ensure(m == n, || format!("component {} has length {m}, expected {n}", j + 1))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::column::Value;
    use crate::repr::testing::exercise;

    #[test]
    fn sampled_roundtrips() {
        for s in schemes() {
            exercise(&s, 60);
        }
    }

    #[test]
    fn structure_of_arrays() {
        let c = zip_decoder(&json!({"types": ["u64", "i8"]})).unwrap();
        let enc = family([
            ("component_1", Column::u64s(vec![1, 2])),
            ("component_2", Column::from_i128(T::I8, vec![-1, 5]).unwrap()),
        ]);
        let out = c.evaluate(&enc).unwrap();
        assert_eq!(out["column"].value(1), Value::Tuple(vec![Value::UInt(2), Value::Int(5)]));
        assert!(components_check(&enc, 2).is_ok());
    }

    /// Shattering a byte column into its eight bits and assembling it back.
    #[test]
    fn bit_split_shatter() {
        let bytes: Vec<u64> = vec![0, 1, 0xa5, 0xff, 0x80, 0x3c];
        let bits: Vec<bool> = bytes.iter().flat_map(|b| (0..8).map(move |j| (b >> j) & 1 == 1)).collect();
        let c = shatter_decoder(&json!({"type": "bit", "k": 8, "index_type": "u8"})).unwrap();
        let out = c.evaluate(&family([("components", Column::bools(&bits))])).unwrap();
        let back: Vec<u64> = out["column"]
            .iter()
            .map(|v| match v {
                Value::Tuple(bs) => bs.iter().enumerate().map(|(j, b)| (b.as_u64().unwrap()) << j).sum(),
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(back, bytes);
        assert!(c.evaluate(&family([("components", Column::bools(&bits[..12]))])).is_err());
    }
}
