use std::collections::BTreeMap;

use rand::rngs::StdRng;
use rand::Rng;
use serde_json::{json, Value as Json};

use super::{family, nonneg, with_types, MAX_DOMAIN};
use crate::circuit::{Builder, Circuit};
use crate::codec::scheme::{
    index_ty, num, pick_ty, rand_data, resize, set_at, starts_of, ty, ty_or, with_col, zero_of, FnScheme,
};
use crate::codec::{ensure, get, index_column, indices, input, not_encodable, scalar, CodecError};
use crate::column::{Column, ElementType as T};
use crate::ops::{ElementwiseFn as F, Ports};

pub(super) fn schemes() -> Vec<FnScheme> {
    vec![
        FnScheme::new("varwidth.std", std_decoder, std_check, std_encode, strings_sample).corrupt(std_corrupt),
        FnScheme::new("varwidth.capped", capped_decoder, capped_check, capped_encode, strings_sample)
            .corrupt(capped_corrupt),
        FnScheme::new("nullable.complementing", compl_decoder, compl_check, compl_encode, nullable_sample)
            .canon(canon_nullable)
            .corrupt(compl_corrupt),
        FnScheme::new("nullable.patched", patched_decoder, patched_check, patched_encode, nullable_sample)
            .canon(canon_nullable)
            .corrupt(patched_corrupt),
    ]
}

/// Entry lengths and the concatenated entry data.
fn entries(dec: &Ports) -> Result<(Vec<u64>, &Column), CodecError> {
    let l = nonneg(input(dec, "element_lengths")?, "length")?;
    let data = input(dec, "elements")?;
    if l.iter().sum::<u64>() != data.len() as u64 {
        return Err(not_encodable("entry lengths do not add up to the data length"));
    }
    Ok((l, data))
}

fn strings_sample(rng: &mut StdRng) -> (Json, Ports) {
    let m = rand_data::len(rng, 20);
    let words = rand_data::strings(rng, m, 6, 3);
    let lengths = words.iter().map(|w| w.len() as u64).collect();
    let data = words.concat().into_iter().map(u64::from).collect();
    (
        json!({}),
        family([("element_lengths", Column::u64s(lengths)), ("elements", Column::from_u64s(T::U8, data).unwrap())]),
    )
}

// Standard listing: each entry is the data range at its start position.

fn std_decoder(p: &Json) -> Result<Circuit, CodecError> {
    let (t, it) = (ty(p, "type")?, ty_or(p, "index_type", T::U64)?);
    let mut b = Builder::new();
    let start = b.input("start_position", it.clone());
    let length = b.input("length", it);
    let data = b.input("data", t);
    let start = b.cast(&start, &T::U64);
    let (off, r) = b.run_offsets(&length);
    let base = b.gather(&r, &start);
    let at = b.binary(F::Add, &base, &off);
    let out = b.gather(&at, &data);
    let length = b.cast(&length, &T::U64);
    b.output("element_lengths", &length);
    b.output("elements", &out);
    Ok(b.finish()?)
}

fn std_check(_: &Json, enc: &Ports) -> Result<(), String> {
    let (s, l) = (indices(enc, "start_position")?, indices(enc, "length")?);
    ensure(s.len() == l.len(), || format!("{} start positions for {} lengths", s.len(), l.len()))?;
    let total = l.iter().try_fold(0u64, |a, &x| a.checked_add(x)).ok_or("entry lengths overflow")?;
    ensure(total <= MAX_DOMAIN, || format!("{total} decoded elements exceed {MAX_DOMAIN}"))
}

/// Repeated entries share the data range of their first occurrence.
fn std_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    let (lengths, data) = entries(dec)?;
    let t = pick_ty(p, "type", data.element_type().clone())?;
    let offsets = starts_of(&lengths);
    let mut seen: BTreeMap<Vec<crate::column::Value>, u64> = BTreeMap::new();
    let mut keep = Vec::new();
    let mut starts = Vec::with_capacity(lengths.len());
    for (&s, &l) in offsets.iter().zip(&lengths) {
        let entry: Vec<_> = (s..s + l).map(|i| data.value(i as usize)).collect();
        let at = *seen.entry(entry).or_insert_with(|| {
            let at = keep.len() as u64;
            keep.extend(s as usize..(s + l) as usize);
            at
        });
        starts.push(at);
    }
    let max = lengths.iter().chain(&starts).copied().max().unwrap_or(0).max(keep.len() as u64);
    let it = index_ty(p, "index_type", max)?;
    let cols = family([
        ("start_position", index_column(&it, starts, "start_position")?),
        ("length", index_column(&it, lengths, "length")?),
        ("data", data.take(&keep)),
    ]);
    Ok((with_types(p, &[("type", &t), ("index_type", &it)]), cols))
}

fn std_corrupt(_: &Json, enc: &Ports, rng: &mut StdRng) -> Option<Ports> {
    let l = enc.get("length")?.to_i128s()?;
    let n = enc.get("data")?.len() as i128;
    match l.iter().position(|&x| x > 0) {
        Some(j) => Some(with_col(enc, "start_position", set_at(enc.get("start_position")?, j, n)?)),
        None => Some(with_col(enc, "length", resize(enc.get("length")?, rng)?)),
    }
}

// Capped width: every entry gets a slot of `max_length` elements.

fn capped_decoder(p: &Json) -> Result<Circuit, CodecError> {
    let (t, it) = (ty(p, "type")?, ty_or(p, "index_type", T::U64)?);
    let mut b = Builder::new();
    let max = b.input("max_length", it.clone());
    let lengths = b.input("lengths", it);
    let data = b.input("data", t);
    let max = b.cast(&max, &T::U64);
    let (off, r) = b.run_offsets(&lengths);
    let base = b.with_scalar(F::Mul, &r, &max);
    let at = b.binary(F::Add, &base, &off);
    let out = b.gather(&at, &data);
    let lengths = b.cast(&lengths, &T::U64);
    b.output("element_lengths", &lengths);
    b.output("elements", &out);
    Ok(b.finish()?)
}

fn capped_check(_: &Json, enc: &Ports) -> Result<(), String> {
    let max = scalar(enc, "max_length")?;
    let l = indices(enc, "lengths")?;
    ensure(l.iter().all(|&x| x <= max), || format!("an entry exceeds the maximum length {max}"))?;
    let slots = (l.len() as u64).checked_mul(max).ok_or("slot area overflows")?;
    let n = get(enc, "data")?.len() as u64;
    ensure(n == slots, || format!("{n} data elements for {} slots of {max}", l.len()))
}

fn capped_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    let (lengths, data) = entries(dec)?;
    let t = pick_ty(p, "type", data.element_type().clone())?;
    let longest = lengths.iter().copied().max().unwrap_or(0);
    let max = num(p, "max_length").unwrap_or(longest);
    if longest > max || (lengths.len() as u64).saturating_mul(max) > MAX_DOMAIN {
        return Err(not_encodable(format!("entries do not fit slots of {max}")));
    }
    let pad = zero_of(&t);
    let mut slots = Vec::with_capacity(lengths.len() * max as usize);
    for (&s, &l) in starts_of(&lengths).iter().zip(&lengths) {
        slots.extend((s..s + l).map(|i| data.value(i as usize)));
        slots.extend(std::iter::repeat_n(pad.clone(), (max - l) as usize));
    }
    let it = index_ty(p, "index_type", max)?;
    let cols = family([
        ("max_length", index_column(&it, vec![max], "max_length")?),
        ("lengths", index_column(&it, lengths, "lengths")?),
        ("data", Column::new(t.clone(), slots)?),
    ]);
    Ok((with_types(&crate::codec::with(p, json!({"max_length": max})), &[("type", &t), ("index_type", &it)]), cols))
}

fn capped_corrupt(_: &Json, enc: &Ports, rng: &mut StdRng) -> Option<Ports> {
    let max = enc.get("max_length")?.to_i128s()?[0];
    let l = enc.get("lengths")?;
    if !l.is_empty() {
        if let Some(c) = set_at(l, 0, max + 1) {
            return Some(with_col(enc, "lengths", c));
        }
    }
    Some(with_col(enc, "data", resize(enc.get("data")?, rng)?))
}

// Nullable columns: decoded as values plus a null indicator; values at nulls are irrelevant.

fn canon_nullable(_: &Json, dec: &Ports) -> Ports {
    let (Some(d), Some(nulls)) = (dec.get("values"), dec.get("null").and_then(|c| c.as_bits())) else {
        return dec.clone();
    };
    if d.len() != nulls.len() {
        return dec.clone();
    }
    let z = zero_of(d.element_type());
    let v = (0..d.len()).map(|i| if nulls.get(i) { z.clone() } else { d.value(i) }).collect();
    let mut out = dec.clone();
    out.insert("values".into(), Column::new(d.element_type().clone(), v).expect("same type"));
    out
}

fn nullable_input(dec: &Ports) -> Result<(&Column, Vec<bool>), CodecError> {
    let d = input(dec, "values")?;
    let nulls: Vec<bool> =
        input(dec, "null")?.as_bits().ok_or_else(|| not_encodable("`null` must be a bit column"))?.iter().collect();
    if nulls.len() != d.len() {
        return Err(not_encodable("`values` and `null` differ in length"));
    }
    Ok((d, nulls))
}

fn nullable_sample(rng: &mut StdRng) -> (Json, Ports) {
    let n = rand_data::len(rng, 40);
    let p = rng.random_range(0.0..1.0);
    let nulls: Vec<bool> = (0..n).map(|_| rng.random_bool(p)).collect();
    (json!({}), family([("values", rand_data::any_column(rng, n)), ("null", Column::bools(&nulls))]))
}

/// Non-null values as a subcolumn; the nulls are its complement.
fn compl_decoder(p: &Json) -> Result<Circuit, CodecError> {
    let (t, it) = (ty(p, "type")?, ty_or(p, "index_type", T::U64)?);
    let mut b = Builder::new();
    let pos = b.input("pos", it.clone());
    let data = b.input("data", t.clone());
    let n = b.input("length", it);
    let n = b.cast(&n, &T::U64);
    let pos = b.cast(&pos, &T::U64);
    let k = b.length(&pos);
    let none = b.zeros(&T::Bit, &n);
    let ones = b.ones_bits(&k);
    let present = b.scatter(&none, &pos, &ones);
    let null = b.unary(F::Not, &present);
    let fill = b.zeros(&t, &n);
    let full = b.scatter(&fill, &pos, &data);
    b.output("values", &full);
    b.output("null", &null);
    Ok(b.finish()?)
}

fn compl_check(_: &Json, enc: &Ports) -> Result<(), String> {
    let n = scalar(enc, "length")?;
    ensure(n <= MAX_DOMAIN, || format!("length {n} exceeds {MAX_DOMAIN}"))?;
    let (p, d) = (get(enc, "pos")?, get(enc, "data")?);
    ensure(p.len() == d.len(), || format!("{} positions for {} values", p.len(), d.len()))
}

fn compl_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    let (d, nulls) = nullable_input(dec)?;
    let t = pick_ty(p, "type", d.element_type().clone())?;
    let keep: Vec<usize> = (0..d.len()).filter(|&i| !nulls[i]).collect();
    let it = index_ty(p, "index_type", d.len() as u64)?;
    let cols = family([
        ("pos", index_column(&it, keep.iter().map(|&i| i as u64).collect(), "pos")?),
        ("data", d.take(&keep)),
        ("length", index_column(&it, vec![d.len() as u64], "length")?),
    ]);
    Ok((with_types(p, &[("type", &t), ("index_type", &it)]), cols))
}

fn compl_corrupt(_: &Json, enc: &Ports, rng: &mut StdRng) -> Option<Ports> {
    let pos = enc.get("pos")?;
    if pos.is_empty() {
        return Some(with_col(enc, "data", resize(enc.get("data")?, rng)?));
    }
    let n = enc.get("length")?.to_i128s()?[0];
    Some(with_col(enc, "pos", set_at(pos, rng.random_range(0..pos.len()), n)?))
}

/// The values column as is, with the null positions overlaid as a set.
fn patched_decoder(p: &Json) -> Result<Circuit, CodecError> {
    let (t, it) = (ty(p, "type")?, ty_or(p, "index_type", T::U64)?);
    let mut b = Builder::new();
    let data = b.input("data", t);
    let np = b.input("null_pos", it);
    let np = b.cast(&np, &T::U64);
    let n = b.length(&data);
    let k = b.length(&np);
    let none = b.zeros(&T::Bit, &n);
    let ones = b.ones_bits(&k);
    let null = b.scatter(&none, &np, &ones);
    b.output("values", &data);
    b.output("null", &null);
    Ok(b.finish()?)
}

fn patched_check(_: &Json, enc: &Ports) -> Result<(), String> {
    let np = indices(enc, "null_pos")?;
    ensure(crate::codec::scheme::all_distinct(&np), || "repeated null position".into())
}

fn patched_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    let (d, nulls) = nullable_input(dec)?;
    let t = pick_ty(p, "type", d.element_type().clone())?;
    let np: Vec<u64> = (0..d.len() as u64).filter(|&i| nulls[i as usize]).collect();
    let it = index_ty(p, "index_type", d.len() as u64)?;
    let cols = family([("data", d.clone()), ("null_pos", index_column(&it, np, "null_pos")?)]);
    Ok((with_types(p, &[("type", &t), ("index_type", &it)]), cols))
}

fn patched_corrupt(_: &Json, enc: &Ports, rng: &mut StdRng) -> Option<Ports> {
    let np = enc.get("null_pos")?;
    let n = enc.get("data")?.len() as i128;
    if np.is_empty() {
        let extra = index_column(np.element_type(), vec![n as u64], "null_pos").ok()?;
        return Some(with_col(enc, "null_pos", extra));
    }
    Some(with_col(enc, "null_pos", set_at(np, rng.random_range(0..np.len()), n)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::repr::testing::exercise;

    fn bytes(s: &str) -> Column {
        Column::from_u64s(T::U8, s.bytes().map(u64::from).collect()).unwrap()
    }

    #[test]
    fn sampled_roundtrips() {
        for s in schemes() {
            exercise(&s, 60);
        }
    }

    #[test]
    fn overlapping_ranges_expand() {
        let c = std_decoder(&json!({"type": "u8", "index_type": "u8"})).unwrap();
        let idx = |v: Vec<u64>| Column::from_u64s(T::U8, v).unwrap();
        let out = c
            .evaluate(&family([
                ("start_position", idx(vec![0, 1])),
                ("length", idx(vec![2, 1])),
                ("data", bytes("abc")),
            ]))
            .unwrap();
        assert_eq!(out["elements"], bytes("abb"));
        assert_eq!(out["element_lengths"], Column::u64s(vec![2, 1]));
    }

    #[test]
    fn capped_slots_and_shared_entries() {
        let dec = family([("element_lengths", Column::u64s(vec![1, 3, 0, 1])), ("elements", bytes("xabcx"))]);
        let (params, enc) = capped_encode(&json!({"max_length": 4}), &dec).unwrap();
        assert_eq!(enc["data"].len(), 16);
        assert_eq!(capped_decoder(&params).unwrap().evaluate(&enc).unwrap(), dec);
        let (params, enc) = std_encode(&json!({}), &dec).unwrap();
        assert_eq!(enc["data"], bytes("xabc"));
        assert_eq!(std_decoder(&params).unwrap().evaluate(&enc).unwrap(), dec);
    }

    #[test]
    fn nullable_strategies_agree() {
        let dec = family([("values", Column::u64s(vec![5, 6, 7])), ("null", Column::bools(&[false, true, false]))]);
        for (enc, decoder) in [
            (compl_encode as fn(&Json, &Ports) -> _, compl_decoder as fn(&Json) -> _),
            (patched_encode, patched_decoder),
        ] {
            let (params, cols) = enc(&json!({}), &dec).unwrap();
            let out = decoder(&params).unwrap().evaluate(&cols).unwrap();
            assert_eq!(canon_nullable(&params, &out), canon_nullable(&params, &dec));
        }
    }
}
