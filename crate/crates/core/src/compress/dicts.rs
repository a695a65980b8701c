use std::collections::BTreeMap;

use rand::rngs::StdRng;
use rand::Rng;
use serde_json::{json, Value as Json};

use crate::circuit::{Builder, Circuit, Wire};
use crate::codec::recipes::fit_small_dictionary;
use crate::codec::scheme::{
    all_distinct, by_frequency, col_values, column_ty, first_fit, index_ty, is_strictly_increasing, num_or, rand_data,
    resize, the_column, tweak, ty, ty_or, with_col, FnScheme,
};
use crate::codec::{ensure, get, index_column, indices, ports, scalar, with, CodecError};
use crate::column::{Column, ElementType as T, Value};
use crate::ops::{ElementwiseFn as F, Ports};
use crate::repr::with_types;

pub(super) fn schemes() -> Vec<FnScheme> {
    vec![
        FnScheme::new("dict", dict_decoder, dict_check, dict_encode, pooled_sample).corrupt(dict_corrupt),
        FnScheme::new("dict.unique", dict_decoder, unique_check, dict_encode, pooled_sample).corrupt(unique_corrupt),
        FnScheme::new("dict.monotone", dict_decoder, monotone_check, monotone_encode, pooled_sample)
            .corrupt(monotone_corrupt),
        FnScheme::new("segdict", segdict_decoder, segdict_check, segdict_encode, pooled_sample)
            .corrupt(segdict_corrupt),
        FnScheme::new("segdict.two_level", two_level_decoder, two_level_check, two_level_encode, pooled_sample)
            .corrupt(segdict_corrupt),
        FnScheme::new("cascade", cascade_decoder, cascade_check, cascade_encode, skewed_sample)
            .corrupt(cascade_corrupt),
        FnScheme::new("subdict", subdict_decoder, subdict_check, subdict_encode, skewed_sample)
            .corrupt(subdict_corrupt),
    ]
}

fn pooled_sample(rng: &mut StdRng) -> (Json, Ports) {
    let n = rand_data::len(rng, 60);
    let col = match rng.random_range(0..6) {
        0 => Column::bits((0..n).map(|_| rng.random_bool(0.3)).collect()),
        1 => rand_data::floats(rng, 8).take(&(0..n).map(|_| rng.random_range(0..8)).collect::<Vec<_>>()),
        _ => {
            let t = rand_data::int_type(rng);
            let pool = rng.random_range(1..12);
            rand_data::pooled(rng, &t, n, pool)
        }
    };
    let hints = if rng.random_bool(0.3) { json!({"segment_length": rng.random_range(1..9)}) } else { json!({}) };
    (hints, ports([("column", col)]))
}

/// Zipf-like: a few values dominate, with a long tail.
fn skewed_sample(rng: &mut StdRng) -> (Json, Ports) {
    let n = rand_data::len(rng, 80);
    let t = rand_data::int_type(rng);
    let pool = rand_data::any_ints(rng, &t, 40);
    let idx: Vec<usize> = (0..n).map(|_| ((40.0f64).powf(rng.random::<f64>()) as usize - 1).min(39)).collect();
    let hints = match rng.random_range(0..3) {
        0 => json!({"bits": [1, 2]}),
        1 => json!({"bits": [2, 3, 2], "dict_size": 3}),
        _ => json!({}),
    };
    (hints, ports([("column", pool.take(&idx))]))
}

// Plain, unique and monotone dictionaries

fn dict_decoder(p: &Json) -> Result<Circuit, CodecError> {
    let (t, it) = (ty(p, "type")?, ty_or(p, "index_type", T::U32)?);
    let mut b = Builder::new();
    let d = b.input("dictionary", t);
    let i = b.input("indices", it);
    let out = b.gather(&i, &d);
    b.output("column", &out);
    Ok(b.finish()?)
}

fn dict_check(_: &Json, enc: &Ports) -> Result<(), String> {
    let d = get(enc, "dictionary")?.len() as u64;
    let i = indices(enc, "indices")?;
    ensure(i.iter().all(|x| *x < d), || format!("an index exceeds the dictionary size {d}"))
}

fn unique_check(p: &Json, enc: &Ports) -> Result<(), String> {
    dict_check(p, enc)?;
    ensure(all_distinct(&get(enc, "dictionary")?.values()), || "dictionary has a repeated entry".into())
}

fn monotone_check(p: &Json, enc: &Ports) -> Result<(), String> {
    dict_check(p, enc)?;
    ensure(is_strictly_increasing(&get(enc, "dictionary")?.values()), || "dictionary is not increasing".into())
}

fn dict_form(p: &Json, t: &T, dict: Vec<Value>, idx: Vec<u64>) -> Result<(Json, Ports), CodecError> {
    let it = index_ty(p, "index_type", dict.len().saturating_sub(1) as u64)?;
    let cols =
        ports([("dictionary", col_values(t, dict, "dictionary")?), ("indices", index_column(&it, idx, "indices")?)]);
    Ok((with_types(p, &[("type", t), ("index_type", &it)]), cols))
}

fn dict_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    let col = the_column(dec)?;
    let t = column_ty(p, col)?;
    let (dict, idx) = first_fit(col);
    dict_form(p, &t, dict, idx)
}

fn monotone_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    let col = the_column(dec)?;
    let t = column_ty(p, col)?;
    let mut dict = col.values();
    dict.sort();
    dict.dedup();
    let at: BTreeMap<&Value, u64> = dict.iter().enumerate().map(|(i, v)| (v, i as u64)).collect();
    let idx = col.iter().map(|v| at[&v]).collect();
    dict_form(p, &t, dict, idx)
}

fn dict_corrupt(_: &Json, enc: &Ports, rng: &mut StdRng) -> Option<Ports> {
    let d = enc.get("dictionary")?.len() as i128;
    Some(with_col(enc, "indices", tweak(enc.get("indices")?, rng, |_| d)?))
}

/// A copy of the first entry appended, keeping every index valid.
fn unique_corrupt(_: &Json, enc: &Ports, _: &mut StdRng) -> Option<Ports> {
    let d = enc.get("dictionary")?;
    if d.is_empty() {
        return None;
    }
    Some(with_col(enc, "dictionary", Column::concat(&[d, &d.slice(0, 1)], d.element_type()).ok()?))
}

fn monotone_corrupt(p: &Json, enc: &Ports, rng: &mut StdRng) -> Option<Ports> {
    let d = enc.get("dictionary")?;
    if d.len() < 2 {
        return unique_corrupt(p, enc, rng);
    }
    let mut order: Vec<usize> = (0..d.len()).collect();
    order.swap(0, 1);
    Some(with_col(enc, "dictionary", d.take(&order)))
}

// Uniform segment dictionaries: segment s owns entries s·d .. (s+1)·d.

fn segdict_params(p: &Json) -> Result<(T, T, T), CodecError> {
    Ok((ty(p, "type")?, ty_or(p, "index_type", T::U64)?, ty_or(p, "entry_index_type", T::U32)?))
}

/// The entry position `idx[i] + (i / ℓ)·d` of every element.
fn segment_entries(b: &mut Builder, len: &Wire, idx: &Wire, entries: &Wire) -> Wire {
    let l = b.cast(len, &T::U64);
    let n = b.length(idx);
    let s = b.segment_of(&n, &l);
    let up = b.binary(F::Add, &n, &l);
    let up = b.with_const(F::Sub, &up, 1u64);
    let m = b.binary(F::Div, &up, &l);
    let m = b.with_const(F::Max, &m, 1u64);
    let e = b.length(entries);
    let d = b.binary(F::Div, &e, &m);
    let base = b.with_scalar(F::Mul, &s, &d);
    let i = b.cast(idx, &T::U64);
    b.binary(F::Add, &base, &i)
}

fn segdict_decoder(p: &Json) -> Result<Circuit, CodecError> {
    let (t, lt, it) = segdict_params(p)?;
    let mut b = Builder::new();
    let l = b.input("segment_length", lt);
    let e = b.input("dictionary_entries", t);
    let i = b.input("indices", it);
    let at = segment_entries(&mut b, &l, &i, &e);
    let out = b.gather(&at, &e);
    b.output("column", &out);
    Ok(b.finish()?)
}

fn two_level_decoder(p: &Json) -> Result<Circuit, CodecError> {
    let (t, lt, it) = segdict_params(p)?;
    let gt = ty_or(p, "global_index_type", T::U32)?;
    let mut b = Builder::new();
    let l = b.input("segment_length", lt);
    let e = b.input("dictionary_entries", gt);
    let i = b.input("indices", it);
    let g = b.input("global_dictionary", t);
    let at = segment_entries(&mut b, &l, &i, &e);
    let gi = b.gather(&at, &e);
    let out = b.gather(&gi, &g);
    b.output("column", &out);
    Ok(b.finish()?)
}

fn segdict_check(_: &Json, enc: &Ports) -> Result<(), String> {
    let l = scalar(enc, "segment_length")?;
    ensure(l > 0, || "segment length must be positive".into())?;
    let idx = indices(enc, "indices")?;
    let m = (idx.len() as u64).div_ceil(l);
    let e = get(enc, "dictionary_entries")?.len() as u64;
    if m == 0 {
        return ensure(e == 0, || "an empty column has no segment dictionaries".into());
    }
    ensure(e % m == 0, || format!("{e} entries do not split into {m} equal dictionaries"))?;
    let d = e / m;
    ensure(idx.iter().all(|x| *x < d), || format!("an index exceeds the segment dictionary size {d}"))
}

fn two_level_check(p: &Json, enc: &Ports) -> Result<(), String> {
    segdict_check(p, enc)?;
    let g = get(enc, "global_dictionary")?.len() as u64;
    ensure(indices(enc, "dictionary_entries")?.iter().all(|x| *x < g), || {
        "an entry exceeds the global dictionary".into()
    })
}

/// Per-segment first-fit dictionaries padded to the largest one.
fn segment_dictionaries(col: &Column, l: usize) -> (Vec<Vec<Value>>, Vec<u64>, usize) {
    let mut dicts = Vec::new();
    let mut idx = Vec::with_capacity(col.len());
    for s in (0..col.len()).step_by(l) {
        let (d, i) = first_fit(&col.slice(s, (s + l).min(col.len())));
        dicts.push(d);
        idx.extend(i);
    }
    let d = dicts.iter().map(Vec::len).max().unwrap_or(0);
    for x in &mut dicts {
        if let Some(first) = x.first().cloned() {
            x.resize(d, first);
        }
    }
    (dicts, idx, d)
}

fn segdict_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    let col = the_column(dec)?;
    let t = column_ty(p, col)?;
    let l = num_or(p, "segment_length", 64)?.max(1);
    let (dicts, idx, d) = segment_dictionaries(col, l as usize);
    let (lt, it) = (index_ty(p, "index_type", l)?, index_ty(p, "entry_index_type", d.saturating_sub(1) as u64)?);
    let cols = ports([
        ("segment_length", index_column(&lt, vec![l], "segment_length")?),
        ("dictionary_entries", col_values(&t, dicts.concat(), "entries")?),
        ("indices", index_column(&it, idx, "indices")?),
    ]);
    let p = with(p, json!({"segment_length": l}));
    Ok((with_types(&p, &[("type", &t), ("index_type", &lt), ("entry_index_type", &it)]), cols))
}

fn two_level_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    let col = the_column(dec)?;
    let t = column_ty(p, col)?;
    let (global, gidx) = first_fit(col);
    let gt = index_ty(p, "global_index_type", global.len().saturating_sub(1) as u64)?;
    let codes = index_column(&gt, gidx, "global indices")?;
    let (q, mut cols) = segdict_encode(&with(p, json!({"type": gt.to_string()})), &ports([("column", codes)]))?;
    cols.insert("global_dictionary".into(), col_values(&t, global, "global dictionary")?);
    let q = with(&q, json!({"type": t.to_string(), "global_index_type": gt.to_string()}));
    Ok((q, cols))
}

fn segdict_corrupt(_: &Json, enc: &Ports, rng: &mut StdRng) -> Option<Ports> {
    let i = enc.get("indices")?;
    let m = (i.len() as u64).div_ceil(enc.get("segment_length")?.scalar_value_u64()?).max(1);
    let d = enc.get("dictionary_entries")?.len() as u64 / m;
    match tweak(i, rng, |_| d as i128) {
        Some(c) => Some(with_col(enc, "indices", c)),
        None => Some(with_col(enc, "dictionary_entries", resize(enc.get("dictionary_entries")?, rng)?)),
    }
}

// Cascaded dictionaries: index 0 defers an element to the next level; v > 0 reads entry v − 1.

fn level_bits(p: &Json) -> Result<Vec<u8>, CodecError> {
    let arr = p.get("bits").and_then(|b| b.as_array()).ok_or_else(|| CodecError::BadParams("missing `bits`".into()))?;
    let bits: Vec<u8> =
        arr.iter().filter_map(|b| b.as_u64()).filter(|b| (1..=63).contains(b)).map(|b| b as u8).collect();
    if bits.is_empty() || bits.len() != arr.len() {
        return Err(CodecError::BadParams("`bits` must list widths between 1 and 63".into()));
    }
    Ok(bits)
}

fn dict_label(i: usize) -> String {
    format!("dictionary_{}", i + 1)
}

fn idx_label(i: usize) -> String {
    format!("indices_{}", i + 1)
}

fn cascade_decoder(p: &Json) -> Result<Circuit, CodecError> {
    let (t, bits) = (ty(p, "type")?, level_bits(p)?);
    let mut b = Builder::new();
    let mut open: Option<Wire> = None;
    let (mut at, mut vals) = (Vec::new(), Vec::new());
    for (i, w) in bits.iter().enumerate() {
        let d = b.input(&dict_label(i), t.clone());
        let idx = b.input(&idx_label(i), T::UInt(*w));
        let pos = match &open {
            Some(o) => o.clone(),
            None => {
                let n = b.length(&idx);
                b.iota(&n)
            }
        };
        let hit = b.compare(&idx, crate::ops::CmpOp::Ne, Value::UInt(0));
        let miss = b.unary(F::Not, &hit);
        let k = b.select(&idx, &hit);
        let k = b.cast(&k, &T::U64);
        let k = b.with_const(F::Sub, &k, 1u64);
        vals.push(b.gather(&k, &d));
        at.push(b.select(&pos, &hit));
        open = Some(b.select(&pos, &miss));
    }
    let at = b.concat(&at.iter().collect::<Vec<_>>());
    let vals = b.concat(&vals.iter().collect::<Vec<_>>());
    let out = b.permute(&at, &vals);
    b.output("column", &out);
    Ok(b.finish()?)
}

fn cascade_check(p: &Json, enc: &Ports) -> Result<(), String> {
    let bits = level_bits(p).map_err(|e| e.to_string())?;
    let mut expect: Option<usize> = None;
    for (i, w) in bits.iter().enumerate() {
        let d = get(enc, &dict_label(i))?.len() as u128;
        ensure(d < 1u128 << w, || format!("level {} dictionary has {d} entries for {w} bits", i + 1))?;
        let idx = indices(enc, &idx_label(i))?;
        if let Some(e) = expect {
            ensure(idx.len() == e, || format!("level {} has {} indices for {e} deferred elements", i + 1, idx.len()))?;
        }
        expect = Some(idx.iter().filter(|x| **x == 0).count());
    }
    ensure(expect == Some(0), || "the last level defers elements".into())
}

fn cascade_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    let col = the_column(dec)?;
    let t = column_ty(p, col)?;
    let mut bits = if p.get("bits").is_some() { level_bits(p)? } else { vec![2, 4, 8] };
    let freq = by_frequency(col);
    let mut taken = 0usize;
    let mut level_of: BTreeMap<Value, (usize, u64)> = BTreeMap::new();
    let mut dicts: Vec<Vec<Value>> = Vec::new();
    let k = bits.len();
    for (i, w) in bits.iter_mut().enumerate() {
        let left = freq.len() - taken;
        if i + 1 == k {
            while (1u128 << *w) <= left as u128 {
                *w += 1;
            }
        }
        let cap = ((1u128 << *w) - 1).min(left as u128) as usize;
        let d: Vec<Value> = freq[taken..taken + cap].iter().map(|(v, _)| v.clone()).collect();
        for (j, v) in d.iter().enumerate() {
            level_of.insert(v.clone(), (i, j as u64 + 1));
        }
        taken += cap;
        dicts.push(d);
    }
    let mut cols = Ports::new();
    let mut coverage = Vec::new();
    let mut pending: Vec<usize> = (0..col.len()).collect();
    for (i, w) in bits.iter().enumerate() {
        let v: Vec<u64> =
            pending.iter().map(|&e| level_of.get(&col.value(e)).filter(|x| x.0 == i).map_or(0, |x| x.1)).collect();
        let before = pending.len();
        pending = pending.iter().zip(&v).filter(|(_, x)| **x == 0).map(|(e, _)| *e).collect();
        coverage.push(if col.is_empty() { 0.0 } else { (before - pending.len()) as f64 / col.len() as f64 });
        cols.insert(idx_label(i), index_column(&T::UInt(*w), v, "indices")?);
        cols.insert(dict_label(i), col_values(&t, dicts[i].clone(), "dictionary")?);
    }
    let p = with(p, json!({"bits": bits, "coverage": coverage}));
    Ok((with_types(&p, &[("type", &t)]), cols))
}

fn cascade_corrupt(p: &Json, enc: &Ports, rng: &mut StdRng) -> Option<Ports> {
    let k = level_bits(p).ok()?.len();
    let last = idx_label(k - 1);
    let c = enc.get(&last)?;
    if !c.is_empty() && rng.random_bool(0.5) {
        return Some(with_col(enc, &last, tweak(c, rng, |_| 0)?));
    }
    if k < 2 {
        return Some(with_col(
            enc,
            &dict_label(0),
            resize(enc.get(&dict_label(0))?, rng).filter(|d| d.len() < enc[&dict_label(0)].len())?,
        ));
    }
    Some(with_col(enc, &idx_label(1), resize(enc.get(&idx_label(1))?, rng)?))
}

// Dictionary with individually listed residual values

fn subdict_decoder(p: &Json) -> Result<Circuit, CodecError> {
    let (t, it) = (ty(p, "type")?, ty_or(p, "index_type", T::U8)?);
    let mut b = Builder::new();
    let d = b.input("dictionary", t.clone());
    let i = b.input("indices", it);
    let r = b.input("residual_data", t);
    let out = b.dict_with_residual(&d, &i, &r);
    b.output("column", &out);
    Ok(b.finish()?)
}

fn subdict_check(_: &Json, enc: &Ports) -> Result<(), String> {
    let idx = indices(enc, "indices")?;
    let d = get(enc, "dictionary")?.len() as u64;
    ensure(idx.iter().all(|x| *x <= d), || format!("an index exceeds the dictionary size {d}"))?;
    let zeros = idx.iter().filter(|x| **x == 0).count();
    let r = get(enc, "residual_data")?.len();
    ensure(r == zeros, || format!("{r} residual values for {zeros} open positions"))
}

fn subdict_encode(p: &Json, dec: &Ports) -> Result<(Json, Ports), CodecError> {
    let col = the_column(dec)?;
    let t = column_ty(p, col)?;
    let it = ty_or(p, "index_type", T::U8)?;
    let cap = it.int_range().ok_or_else(|| CodecError::BadParams(format!("index type {it} is not an integer")))?.1;
    let size = num_or(p, "dict_size", cap as u64)?.min(cap as u64) as usize;
    let (dict, idx, rest) = fit_small_dictionary(col, size);
    let cols = ports([
        ("dictionary", col_values(&t, dict, "dictionary")?),
        ("indices", index_column(&it, idx, "indices")?),
        ("residual_data", col.take(&rest)),
    ]);
    Ok((with_types(&with(p, json!({"dict_size": size})), &[("type", &t), ("index_type", &it)]), cols))
}

fn subdict_corrupt(_: &Json, enc: &Ports, rng: &mut StdRng) -> Option<Ports> {
    let r = enc.get("residual_data")?;
    if r.is_empty() {
        let d = enc.get("dictionary")?;
        if d.is_empty() {
            return None;
        }
        return Some(with_col(enc, "residual_data", d.slice(0, 1)));
    }
    Some(with_col(enc, "residual_data", resize(r, rng)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::verify_with;
    use crate::repr::testing::exercise;

    fn scheme(id: &str) -> FnScheme {
        schemes().into_iter().find(|s| s.id == id).unwrap()
    }

    fn bytes(s: &str) -> Column {
        Column::from_u64s(T::U8, s.bytes().map(u64::from).collect()).unwrap()
    }

    fn run(id: &str, p: Json, enc: Ports) -> Result<Column, String> {
        let s = scheme(id);
        verify_with(&s, &p, &enc)?;
        Ok((s.decoder)(&p).unwrap().evaluate(&enc).unwrap()["column"].clone())
    }

    #[test]
    fn sampled_roundtrips() {
        for s in schemes() {
            exercise(&s, 150);
        }
    }

    #[test]
    fn plain_and_constrained_dictionaries() {
        let p = json!({"type": "u8", "index_type": "u8"});
        let e = ports([("dictionary", bytes("xy")), ("indices", Column::from_u64s(T::U8, vec![1, 0, 1]).unwrap())]);
        assert_eq!(run("dict", p.clone(), e).unwrap(), bytes("yxy"));
        let dup = ports([("dictionary", bytes("xx")), ("indices", Column::from_u64s(T::U8, vec![0]).unwrap())]);
        assert!(run("dict", p.clone(), dup.clone()).is_ok());
        assert!(run("dict.unique", p.clone(), dup).is_err());
        let down = ports([("dictionary", bytes("yx")), ("indices", Column::from_u64s(T::U8, vec![0]).unwrap())]);
        assert!(run("dict.unique", p.clone(), down.clone()).is_ok());
        assert!(run("dict.monotone", p, down).is_err());
    }

    #[test]
    fn segment_dictionaries() {
        let p = json!({"type": "u8", "index_type": "u8", "entry_index_type": "u8"});
        let e = ports([
            ("segment_length", Column::from_u64s(T::U8, vec![2]).unwrap()),
            ("dictionary_entries", bytes("abcd")),
            ("indices", Column::from_u64s(T::U8, vec![1, 0, 0, 1]).unwrap()),
        ]);
        assert_eq!(run("segdict", p.clone(), e.clone()).unwrap(), bytes("bacd"));
        let bad = with_col(&e, "indices", Column::from_u64s(T::U8, vec![2, 0, 0, 1]).unwrap());
        assert!(run("segdict", p, bad).is_err());
    }

    /// Two-level decoding equals staging a segment dictionary and a plain dictionary.
    #[test]
    fn two_level_is_staged() {
        let col = bytes("abracadabra_alakazam");
        let s = scheme("segdict.two_level");
        let (p, e) = (s.encode)(&json!({"segment_length": 4}), &ports([("column", col.clone())])).unwrap();
        let gt = p["global_index_type"].as_str().unwrap();
        let inner = json!({"type": gt, "index_type": p["index_type"], "entry_index_type": p["entry_index_type"]});
        let mut first = e.clone();
        first.remove("global_dictionary");
        let codes = run("segdict", inner, first).unwrap();
        let staged = ports([("dictionary", e["global_dictionary"].clone()), ("indices", codes)]);
        let out = run("dict", json!({"type": "u8", "index_type": gt}), staged).unwrap();
        assert_eq!(out, col);
        assert_eq!(run("segdict.two_level", p, e).unwrap(), col);
    }

    #[test]
    fn cascade_phases() {
        let p = json!({"type": "u8", "bits": [1, 2]});
        let e = ports([
            ("dictionary_1", bytes("a")),
            ("indices_1", Column::from_u64s(T::UInt(1), vec![1, 0, 1]).unwrap()),
            ("dictionary_2", bytes("xy")),
            ("indices_2", Column::from_u64s(T::UInt(2), vec![2]).unwrap()),
        ]);
        assert_eq!(run("cascade", p.clone(), e.clone()).unwrap(), bytes("aya"));
        let dangling = with_col(&e, "indices_2", Column::from_u64s(T::UInt(2), vec![0]).unwrap());
        assert!(run("cascade", p.clone(), dangling).is_err());
        let short = with_col(&e, "indices_2", Column::from_u64s(T::UInt(2), vec![]).unwrap());
        assert!(run("cascade", p, short).is_err());

        let one = json!({"type": "u8", "bits": [2]});
        let e = ports([
            ("dictionary_1", bytes("xy")),
            ("indices_1", Column::from_u64s(T::UInt(2), vec![2, 1, 2]).unwrap()),
        ]);
        assert_eq!(run("cascade", one, e).unwrap(), bytes("yxy"));

        let s = scheme("cascade");
        let col = bytes("mississippi");
        let (p, e) = (s.encode)(&json!({"bits": [1, 1]}), &ports([("column", col.clone())])).unwrap();
        assert_eq!(p["bits"], json!([1, 2]));
        assert_eq!(run("cascade", p.clone(), e.clone()).unwrap(), col);
        // Everything deferred to the last level.
        let mut deferred = e.clone();
        let all = bytes("imps");
        let idx: Vec<u64> = col.iter().map(|v| all.iter().position(|w| w == v).unwrap() as u64 + 1).collect();
        deferred.insert("dictionary_1".into(), Column::empty(T::U8));
        deferred.insert("indices_1".into(), Column::from_u64s(T::UInt(1), vec![0; 11]).unwrap());
        deferred.insert("dictionary_2".into(), all);
        deferred.insert("indices_2".into(), Column::from_u64s(T::UInt(3), idx).unwrap());
        assert_eq!(run("cascade", json!({"type": "u8", "bits": [1, 3]}), deferred).unwrap(), col);
    }

    #[test]
    fn residual_dictionary() {
        let p = json!({"type": "u8", "index_type": "u8"});
        let idx = |v: Vec<u64>| Column::from_u64s(T::U8, v).unwrap();
        let e = ports([("dictionary", bytes("a")), ("indices", idx(vec![1, 0, 1])), ("residual_data", bytes("z"))]);
        assert_eq!(run("subdict", p.clone(), e).unwrap(), bytes("aza"));
        let e = ports([("dictionary", bytes("ab")), ("indices", idx(vec![2, 1])), ("residual_data", bytes(""))]);
        assert_eq!(run("subdict", p.clone(), e).unwrap(), bytes("ba"));
        let e = ports([("dictionary", bytes("")), ("indices", idx(vec![0, 0])), ("residual_data", bytes("qr"))]);
        assert_eq!(run("subdict", p.clone(), e).unwrap(), bytes("qr"));
        let e = ports([("dictionary", bytes("a")), ("indices", idx(vec![1, 0, 1])), ("residual_data", bytes("zz"))]);
        assert!(run("subdict", p, e).is_err());
    }
}
